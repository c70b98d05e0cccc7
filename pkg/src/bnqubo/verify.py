"""Decoding bit assignments into graphs, brute-force structure oracles, and
energy/score audits of solver output."""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from .encoder import PenaltyWeights, SplitPlan, transitivity_violations
from .pscs import CandidateList, lookup_score
from .qubo import Qubo
from .solver import CapExceededError, SolveResult


@dataclass
class StructureSolution:
    """Decoded assignment: chosen candidates, graph, and diagnostics."""

    parent_sets: tuple[frozenset[int] | None, ...]
    candidate_indices: tuple[tuple[int, ...] | None, ...]
    edges: tuple[tuple[int, int], ...]
    feasible: bool
    acyclic: bool
    violations: tuple[str, ...]
    total_score: float | None
    energy: float
    breakdown: dict[str, float] | None

    def to_json_dict(self) -> dict:
        return {
            "parent_sets": [None if p is None else sorted(p) for p in self.parent_sets],
            "candidate_indices": [
                None if c is None else list(c) for c in self.candidate_indices
            ],
            "edges": [list(e) for e in self.edges],
            "feasible": self.feasible,
            "acyclic": self.acyclic,
            "violations": list(self.violations),
            "total_score": self.total_score,
            "energy": self.energy,
            "breakdown": self.breakdown,
        }


def is_acyclic(edges: Sequence[tuple[int, int]], num_variables: int) -> bool:
    children: dict[int, list[int]] = {}
    indeg = [0] * num_variables
    for p, c in edges:
        children.setdefault(p, []).append(c)
        indeg[c] += 1
    queue = [v for v in range(num_variables) if indeg[v] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for c in children.get(v, ()):
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return seen == num_variables


def _edges_of(parent_sets: Sequence[frozenset[int] | None]) -> tuple[tuple[int, int], ...]:
    edges = []
    for child, ps in enumerate(parent_sets):
        if ps:
            edges.extend((p, child) for p in ps)
    return tuple(sorted(edges))


def decode(
    qubo: Qubo,
    assignment: Sequence[int],
    lists: Sequence[CandidateList],
    plan: SplitPlan | None = None,
    weights: PenaltyWeights | None = None,
) -> StructureSolution:
    """Interpret a bit assignment via the qubo's labels.

    All-zero candidate bits select the empty parent set; more than one set
    bit in a group flags the assignment infeasible. The split encoding
    decodes to the union of the two groups' picks, which is a legal decoding
    even when that union was not an original candidate. The energy breakdown
    (score / order / triangle parts) is computed when ``weights`` is given.
    """
    if qubo.labels is None:
        raise ValueError("decoding needs a labeled qubo")
    if len(assignment) != qubo.num_bits:
        raise ValueError(f"assignment must have {qubo.num_bits} entries")
    n_vars = len(lists)

    set_bits: dict[tuple[str, int], list[int]] = {}
    order_bits: dict[tuple[int, int], int] = {}
    for bit, label in enumerate(qubo.labels):
        value = int(assignment[bit])
        if label.kind == "r":
            order_bits[(label.i, label.j)] = value
        elif value:
            set_bits.setdefault((label.kind, label.i), []).append(label.j)

    violations: list[str] = []
    parent_sets: list[frozenset[int] | None] = []
    indices: list[tuple[int, ...] | None] = []
    for n in range(n_vars):
        if plan is None:
            lams = set_bits.get(("p", n), [])
            if len(lams) > 1:
                violations.append(f"variable {n}: bits {sorted(lams)} all set")
                parent_sets.append(None)
                indices.append(None)
                continue
            lam = lams[0] if lams else 0
            parent_sets.append(lists[n].family[lam].parents)
            indices.append((lam,))
        else:
            entry = plan.entries[n]
            lams1 = set_bits.get(("p1", n), [])
            lams2 = set_bits.get(("p2", n), [])
            bad = False
            if len(lams1) > 1:
                violations.append(f"variable {n} group 1: bits {sorted(lams1)} all set")
                bad = True
            if len(lams2) > 1:
                violations.append(f"variable {n} group 2: bits {sorted(lams2)} all set")
                bad = True
            if bad:
                parent_sets.append(None)
                indices.append(None)
                continue
            lam1 = lams1[0] if lams1 else 0
            lam2 = lams2[0] if lams2 else 0
            parent_sets.append(entry.family1[lam1] | entry.family2[lam2])
            indices.append((lam1, lam2))

    feasible = not violations
    edges = _edges_of(parent_sets)
    acyclic = feasible and is_acyclic(edges, n_vars)
    total_score = None
    if feasible:
        total_score = sum(lookup_score(lists[n], parent_sets[n])[1] for n in range(n_vars))

    breakdown = None
    if weights is not None:
        breakdown = _breakdown(qubo, assignment, lists, plan, weights, order_bits, n_vars)

    return StructureSolution(
        parent_sets=tuple(parent_sets),
        candidate_indices=tuple(indices),
        edges=edges,
        feasible=feasible,
        acyclic=acyclic,
        violations=tuple(violations),
        total_score=total_score,
        energy=qubo.energy(assignment),
        breakdown=breakdown,
    )


def _breakdown(
    qubo: Qubo,
    assignment: Sequence[int],
    lists: Sequence[CandidateList],
    plan: SplitPlan | None,
    weights: PenaltyWeights,
    order_bits: dict[tuple[int, int], int],
    n_vars: int,
) -> dict[str, float]:
    """Recompute the three energy parts from the encoding's semantics."""
    raw: dict[tuple[str, int], list[int]] = {}
    for bit, label in enumerate(qubo.labels):
        if label.kind != "r" and int(assignment[bit]):
            raw.setdefault((label.kind, label.i), []).append(label.j)

    score_part = 0.0
    edge_counts: dict[tuple[int, int], int] = {}  # (parent, child) -> multiplicity
    for n in range(n_vars):
        empty_score = lists[n].family[0].score
        score_part += empty_score
        if plan is None:
            fam = [c.parents for c in lists[n].family]
            offs = [c.score - empty_score for c in lists[n].family]
            lams = raw.get(("p", n), [])
            for lam in lams:
                score_part += offs[lam]
                for parent in fam[lam]:
                    edge_counts[(parent, n)] = edge_counts.get((parent, n), 0) + 1
            score_part += weights.onehot * (len(lams) * (len(lams) - 1) // 2)
        else:
            entry = plan.entries[n]
            lams1 = raw.get(("p1", n), [])
            lams2 = raw.get(("p2", n), [])
            for lam in lams1:
                score_part += lookup_score(lists[n], entry.family1[lam])[1] - empty_score
                for parent in entry.family1[lam]:
                    edge_counts[(parent, n)] = edge_counts.get((parent, n), 0) + 1
            for lam in lams2:
                score_part += lookup_score(lists[n], entry.family2[lam])[1] - empty_score
                for parent in entry.family2[lam]:
                    edge_counts[(parent, n)] = edge_counts.get((parent, n), 0) + 1
            for lam1 in lams1:
                for lam2 in lams2:
                    u1, u2 = entry.family1[lam1], entry.family2[lam2]
                    t = (
                        lookup_score(lists[n], u1 | u2)[1]
                        - lookup_score(lists[n], u1)[1]
                        - lookup_score(lists[n], u2)[1]
                        + empty_score
                    )
                    score_part += t
            pairs = len(lams1) * (len(lams1) - 1) // 2 + len(lams2) * (len(lams2) - 1) // 2
            score_part += weights.onehot * pairs

    order_part = 0.0
    for a in range(n_vars):
        for b in range(a + 1, n_vars):
            r = order_bits[(a, b)]
            q_ba = edge_counts.get((b, a), 0)
            q_ab = edge_counts.get((a, b), 0)
            order_part += weights.order * (q_ba * r + q_ab * (1 - r))

    triangle_part = weights.triangle * transitivity_violations(order_bits, n_vars)
    return {"score": score_part, "order": order_part, "triangle": float(triangle_part)}


def _options(
    lists: Sequence[CandidateList], plan: SplitPlan | None
) -> list[list[tuple[frozenset[int], float]]]:
    """Per-variable selectable parent sets with scores; the split encoding's
    hypothesis space is every cross pairing of the two sub-families."""
    options = []
    for n, cl in enumerate(lists):
        if plan is None:
            opts = [(c.parents, c.score) for c in cl.family]
        else:
            entry = plan.entries[n]
            seen: dict[frozenset[int], float] = {}
            for u1 in entry.family1:
                for u2 in entry.family2:
                    parents = u1 | u2
                    if parents not in seen:
                        seen[parents] = lookup_score(cl, parents)[1]
            opts = list(seen.items())
        options.append(opts)
    return options


def oracle_restricted(
    lists: Sequence[CandidateList],
    plan: SplitPlan | None = None,
    cap: int = 2_000_000,
) -> tuple[float, tuple[frozenset[int], ...]]:
    """Exact best acyclic structure selectable from the candidate families,
    by exhaustive enumeration with cycle and bound pruning.

    Ties break to the lexicographically smallest sorted edge list.
    """
    options = _options(lists, plan)
    n_vars = len(options)
    combos = 1
    for opts in options:
        combos *= len(opts)
        if combos > cap:
            raise CapExceededError(f"{combos}+ selections exceed oracle cap {cap}")

    tail_min = [0.0] * (n_vars + 1)
    for n in range(n_vars - 1, -1, -1):
        tail_min[n] = tail_min[n + 1] + min(s for _, s in options[n])

    best: dict = {"score": math.inf, "edges": None, "parents": None}
    chosen: list[tuple[frozenset[int], float]] = []

    def extend(n: int, partial_score: float, edges: list[tuple[int, int]]) -> None:
        if partial_score + tail_min[n] > best["score"]:
            return
        if n == n_vars:
            edge_key = tuple(sorted(edges))
            if partial_score < best["score"] or (
                partial_score == best["score"] and edge_key < best["edges"]
            ):
                best["score"] = partial_score
                best["edges"] = edge_key
                best["parents"] = tuple(ps for ps, _ in chosen)
            return
        for parents, s in options[n]:
            new_edges = [(p, n) for p in parents]
            if new_edges and not is_acyclic(edges + new_edges, n_vars):
                continue
            chosen.append((parents, s))
            extend(n + 1, partial_score + s, edges + new_edges)
            chosen.pop()

    extend(0, 0.0, [])
    return best["score"], best["parents"]


def core_replacement_preserves_acyclicity(
    lists: Sequence[CandidateList], parent_sets: Sequence[frozenset[int]]
) -> bool:
    """If the given structure is acyclic, replacing each parent set by the
    used-core of a record spanning it must stay acyclic (it only removes
    edges). Returns whether that implication holds."""
    n_vars = len(lists)
    cores = []
    for n, parents in enumerate(parent_sets):
        match = None
        for rec in lists[n].records:
            if rec.spans(frozenset(parents)):
                match = rec
                break
        if match is None:
            raise LookupError(f"no record spans {sorted(parents)} for variable {n}")
        cores.append(match.used)
    original_acyclic = is_acyclic(_edges_of(list(parent_sets)), n_vars)
    core_acyclic = is_acyclic(_edges_of(cores), n_vars)
    return core_acyclic or not original_acyclic


@dataclass
class AuditReport:
    checks: dict[str, bool | None]
    passed: bool
    energy: float
    total_score: float | None
    oracle_score: float | None
    breakdown: dict[str, float] | None
    solution: StructureSolution

    def to_json_dict(self) -> dict:
        return {
            "checks": self.checks,
            "passed": self.passed,
            "energy": self.energy,
            "total_score": self.total_score,
            "oracle_score": self.oracle_score,
            "breakdown": self.breakdown,
            "solution": self.solution.to_json_dict(),
        }

    def to_text(self) -> str:
        lines = ["audit report", "============"]
        for name, ok in self.checks.items():
            state = "skip" if ok is None else ("PASS" if ok else "FAIL")
            lines.append(f"{name:<24} {state}")
        lines.append(f"{'energy':<24} {self.energy!r}")
        lines.append(f"{'total_score':<24} {self.total_score!r}")
        lines.append(f"{'oracle_score':<24} {self.oracle_score!r}")
        if self.breakdown is not None:
            for part, value in self.breakdown.items():
                lines.append(f"{'part.' + part:<24} {value!r}")
        lines.append(f"{'verdict':<24} {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def save(self, json_path: str | Path, text_path: str | Path | None = None) -> None:
        Path(json_path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")
        if text_path is not None:
            Path(text_path).write_text(self.to_text())


def audit(
    qubo: Qubo,
    result: SolveResult,
    lists: Sequence[CandidateList],
    plan: SplitPlan | None = None,
    weights: PenaltyWeights | None = None,
    oracle_cap: int = 2_000_000,
) -> AuditReport:
    """Decode the solver's best assignment and cross-check it.

    Checks: reported energy matches re-evaluation; the decoded structure is
    feasible and acyclic; energy equals the decoded total score (with zero
    penalty parts when weights are available); and, when enumeration fits
    the cap, the decoded score equals the restricted oracle optimum.
    """
    solution = decode(qubo, result.assignment, lists, plan=plan, weights=weights)
    energy = solution.energy
    tol = 1e-9 * max(1.0, abs(energy))

    checks: dict[str, bool | None] = {}
    checks["energy_reeval"] = abs(result.energy - energy) <= tol
    checks["feasible"] = solution.feasible
    checks["acyclic"] = solution.acyclic
    if solution.feasible and solution.total_score is not None:
        identity = abs(energy - solution.total_score) <= tol
        if weights is not None and solution.breakdown is not None:
            identity = identity and solution.breakdown["order"] == 0.0
            identity = identity and solution.breakdown["triangle"] == 0.0
        checks["score_energy_identity"] = identity
    else:
        checks["score_energy_identity"] = False

    oracle_score: float | None = None
    try:
        oracle_score, _ = oracle_restricted(lists, plan=plan, cap=oracle_cap)
        # score-tied structures (a reversible edge between fully resolved
        # variables) can differ by an ulp under float summation; anything
        # beyond that scale is a real mismatch
        checks["oracle_match"] = solution.total_score is not None and (
            abs(solution.total_score - oracle_score)
            <= 1e-12 * max(1.0, abs(oracle_score))
        )
    except CapExceededError:
        checks["oracle_match"] = None

    passed = all(ok for ok in checks.values() if ok is not None)
    return AuditReport(
        checks=checks,
        passed=passed,
        energy=energy,
        total_score=solution.total_score,
        oracle_score=oracle_score,
        breakdown=solution.breakdown,
        solution=solution,
    )
