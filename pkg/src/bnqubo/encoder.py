"""QUBO construction for structure learning over candidate parent sets.

Each variable's candidate family is one-hot encoded on family-size-minus-one
bits (the empty set is the all-zero state). A variable's family can instead
be split into two sub-families whose unions form a direct product covering
the original candidates, cutting the bit count. Acyclicity is enforced with
pairwise order bits, order/edge coupling penalties, and transitivity triangle
penalties; penalty weights are calibrated from the score coefficients with a
safety margin.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from .pscs import CandidateList, IncompleteCandidatesError, lookup_score
from .qubo import BitLabel, Qubo


@dataclass(frozen=True)
class PenaltyWeights:
    """Calibrated penalty magnitudes.

    ``lower_bound`` is the sufficient bound derived from the score
    coefficients (clamped at zero); the working weights sit a margin above
    it: base = (1+margin) * max(lower_bound, floor), one-hot = base,
    triangle = 3 * base, order = (1+margin) * max(N-2, 1) * base.
    """

    lower_bound: float
    base: float
    onehot: float
    triangle: float
    order: float
    margin: float

    def validate(self, num_variables: int) -> None:
        if not self.lower_bound < self.onehot:
            raise ValueError("one-hot weight must exceed the lower bound")
        if not self.lower_bound < self.triangle / 3:
            raise ValueError("triangle weight must exceed 3x the lower bound")
        if num_variables >= 3 and not self.triangle / 3 < self.order / (num_variables - 2):
            raise ValueError("order weight too small for the triangle weight")

    def to_json_dict(self) -> dict:
        return {
            "lower_bound": self.lower_bound,
            "base": self.base,
            "onehot": self.onehot,
            "triangle": self.triangle,
            "order": self.order,
            "margin": self.margin,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PenaltyWeights":
        return cls(**{k: float(obj[k]) for k in ("lower_bound", "base", "onehot", "triangle", "order", "margin")})


@dataclass(frozen=True)
class ScoreBlock:
    """Per-variable score-component coefficients before penalties.

    ``linear1``/``linear2`` are the per-candidate score offsets of the two
    groups (index 0 is the empty set, offset exactly 0). ``cross`` holds the
    interaction coefficients; it is None for single-family encodings (a
    degenerate group 1 of just the empty set).
    """

    base_score: float
    linear1: tuple[float, ...]
    linear2: tuple[float, ...]
    cross: tuple[tuple[float, ...], ...] | None


@dataclass(frozen=True)
class SplitEntry:
    """One variable's family split: subsets of ``z`` versus the rest.

    ``pairing[k] = (a, b)`` maps original candidate k to family1[a] |
    family2[b]. Both sub-families carry the empty set at index 0.
    """

    z: frozenset[int]
    family1: tuple[frozenset[int], ...]
    family2: tuple[frozenset[int], ...]
    pairing: tuple[tuple[int, int], ...]

    @property
    def num_bits(self) -> int:
        return len(self.family1) + len(self.family2) - 2

    def to_json_dict(self) -> dict:
        return {
            "z": sorted(self.z),
            "family1": [sorted(u) for u in self.family1],
            "family2": [sorted(u) for u in self.family2],
            "pairing": [list(p) for p in self.pairing],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SplitEntry":
        return cls(
            z=frozenset(obj["z"]),
            family1=tuple(frozenset(u) for u in obj["family1"]),
            family2=tuple(frozenset(u) for u in obj["family2"]),
            pairing=tuple((int(a), int(b)) for a, b in obj["pairing"]),
        )


@dataclass(frozen=True)
class SplitPlan:
    budget: int
    entries: tuple[SplitEntry, ...]

    def to_json_dict(self) -> dict:
        return {"budget": self.budget, "entries": [e.to_json_dict() for e in self.entries]}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SplitPlan":
        return cls(
            budget=int(obj["budget"]),
            entries=tuple(SplitEntry.from_json_dict(e) for e in obj["entries"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SplitPlan":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


@dataclass
class Encoding:
    """A built QUBO together with the weights and layout that produced it.

    ``score_terms`` counts each variable's nonzero score-component
    coefficients; ``score_term_budgets`` is the closed-form upper bound on
    that count given the group sizes.
    """

    qubo: Qubo
    weights: PenaltyWeights
    kind: str  # "basic" | "split"
    num_variables: int
    score_terms: tuple[int, ...] = ()
    score_term_budgets: tuple[float, ...] = ()

    def meta_json_dict(self) -> dict:
        n_lin, n_quad = self.qubo.num_terms()
        return {
            "kind": self.kind,
            "num_variables": self.num_variables,
            "num_bits": self.qubo.num_bits,
            "weights": self.weights.to_json_dict(),
            "terms": {
                "linear": n_lin,
                "quadratic": n_quad,
                "score_component": list(self.score_terms),
                "score_component_budget": list(self.score_term_budgets),
            },
        }


def optimize_split(family: Sequence[frozenset[int]], budget: int) -> SplitEntry:
    """Pick the subset ``z`` (at most ``budget`` variables) minimizing the
    combined sub-family sizes.

    Variables with identical membership patterns across the family are
    interchangeable, so the search runs over unions of such classes. Ties
    break to the smaller, then lexicographically smaller, ``z``. The empty
    ``z`` is always searched, so the result never needs more bits than the
    unsplit family.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    family = [frozenset(u) for u in family]
    if not family or family[0]:
        raise ValueError("candidate family must start with the empty set")
    ground = sorted(set().union(*family)) if len(family) > 1 else []

    patterns: dict[frozenset[int], list[int]] = {}
    for m in ground:
        pat = frozenset(k for k, u in enumerate(family) if m in u)
        patterns.setdefault(pat, []).append(m)
    classes = sorted(patterns.values(), key=lambda ms: ms[0])

    best_key: tuple[int, int, tuple[int, ...]] | None = None
    best_z: frozenset[int] = frozenset()

    def consider(z: frozenset[int]) -> None:
        nonlocal best_key, best_z
        fam1 = _dedup([u & z for u in family])
        fam2 = _dedup([u - z for u in family])
        key = (len(fam1) + len(fam2), len(z), tuple(sorted(z)))
        if best_key is None or key < best_key:
            best_key = key
            best_z = z

    def explore(idx: int, z: frozenset[int]) -> None:
        consider(z)
        for nxt in range(idx, len(classes)):
            members = classes[nxt]
            if len(z) + len(members) <= budget:
                explore(nxt + 1, z | frozenset(members))

    explore(0, frozenset())
    return split_family(family, best_z)


def _dedup(parts: list[frozenset[int]]) -> list[frozenset[int]]:
    seen: dict[frozenset[int], int] = {}
    for p in parts:
        if p not in seen:
            seen[p] = len(seen)
    return list(seen)


def split_family(family: Sequence[frozenset[int]], z: frozenset[int]) -> SplitEntry:
    """Split a candidate family along a fixed ``z``; ``optimize_split`` chooses
    ``z``, this builds the resulting direct-product structure."""
    family = [frozenset(u) for u in family]
    fam1 = _dedup([u & z for u in family])
    fam2 = _dedup([u - z for u in family])
    idx1 = {u: i for i, u in enumerate(fam1)}
    idx2 = {u: i for i, u in enumerate(fam2)}
    pairing = tuple((idx1[u & z], idx2[u - z]) for u in family)
    return SplitEntry(z=z, family1=tuple(fam1), family2=tuple(fam2), pairing=pairing)


def optimize_split_plan(lists: Sequence[CandidateList], budget: int) -> SplitPlan:
    entries = []
    for cl in lists:
        if not cl.complete:
            raise IncompleteCandidatesError(
                f"candidate list for variable {cl.target} is partial; refusing to split"
            )
        entries.append(optimize_split([c.parents for c in cl.family], budget))
    return SplitPlan(budget=budget, entries=tuple(entries))


def penalty_weights(
    blocks: Sequence[ScoreBlock],
    num_variables: int,
    margin: float = 0.1,
    floor_fraction: float = 1e-3,
) -> PenaltyWeights:
    """Calibrate penalty magnitudes from the score coefficients.

    The sufficient lower bound is the largest score drop any single
    candidate bit can buy (including interaction), clamped at zero; a small
    positive floor keeps the constraints enforced when no candidate improves
    the score.
    """
    worst = 0.0
    max_abs = 0.0
    for blk in blocks:
        if blk.cross is None:
            for s in blk.linear2:
                worst = max(worst, -s)
                max_abs = max(max_abs, abs(s))
        else:
            for a, s1 in enumerate(blk.linear1):
                for b, s2 in enumerate(blk.linear2):
                    t = blk.cross[a][b]
                    worst = max(worst, -s1 - t, -s2 - t)
                    max_abs = max(max_abs, abs(t))
                max_abs = max(max_abs, abs(s1))
            for s2 in blk.linear2:
                max_abs = max(max_abs, abs(s2))
    floor = floor_fraction * max_abs if max_abs > 0.0 else 1.0
    base = (1.0 + margin) * max(worst, floor)
    order = (1.0 + margin) * max(num_variables - 2, 1) * base
    weights = PenaltyWeights(
        lower_bound=worst,
        base=base,
        onehot=base,
        triangle=3.0 * base,
        order=order,
        margin=margin,
    )
    weights.validate(num_variables)
    return weights


def score_blocks_basic(lists: Sequence[CandidateList]) -> list[ScoreBlock]:
    blocks = []
    for cl in lists:
        empty_score = cl.family[0].score
        blocks.append(
            ScoreBlock(
                base_score=empty_score,
                linear1=(0.0,),
                linear2=tuple(c.score - empty_score for c in cl.family),
                cross=None,
            )
        )
    return blocks


def score_blocks_split(lists: Sequence[CandidateList], plan: SplitPlan) -> list[ScoreBlock]:
    blocks = []
    for cl, entry in zip(lists, plan.entries):
        empty_score = cl.family[0].score
        s1 = tuple(
            lookup_score(cl, u)[1] - empty_score if u else 0.0 for u in entry.family1
        )
        s2 = tuple(
            lookup_score(cl, u)[1] - empty_score if u else 0.0 for u in entry.family2
        )
        cross = []
        for a, u1 in enumerate(entry.family1):
            row = []
            for b, u2 in enumerate(entry.family2):
                if a == 0 or b == 0:
                    row.append(0.0)
                else:
                    union_score = lookup_score(cl, u1 | u2)[1]
                    row.append(union_score - (s1[a] + empty_score) - (s2[b] + empty_score) + empty_score)
            cross.append(tuple(row))
        blocks.append(
            ScoreBlock(
                base_score=empty_score,
                linear1=s1,
                linear2=s2,
                cross=tuple(cross),
            )
        )
    return blocks


def _validate_lists(lists: Sequence[CandidateList]) -> int:
    n_vars = len(lists)
    if n_vars < 2:
        raise ValueError("need at least 2 variables to encode")
    for n, cl in enumerate(lists):
        if cl.target != n:
            raise ValueError(f"candidate list {n} targets variable {cl.target}")
        if not cl.complete:
            raise IncompleteCandidatesError(
                f"candidate list for variable {n} is partial; refusing to encode"
            )
        if not cl.family or cl.family[0].parents:
            raise ValueError(f"candidate family {n} must start with the empty set")
    return n_vars


def encode_basic(
    lists: Sequence[CandidateList],
    weights: PenaltyWeights | None = None,
    margin: float = 0.1,
) -> Encoding:
    """One-hot encode each candidate family directly ("p" bits)."""
    n_vars = _validate_lists(lists)
    families = [((frozenset(),), tuple(c.parents for c in lists[n].family)) for n in range(n_vars)]
    blocks = score_blocks_basic(lists)
    if weights is None:
        weights = penalty_weights(blocks, n_vars, margin=margin)
    weights.validate(n_vars)
    qubo = _build(families, blocks, weights, n_vars, kinds=(None, "p"))
    terms, budgets = _term_counts(families, blocks)
    return Encoding(
        qubo=qubo,
        weights=weights,
        kind="basic",
        num_variables=n_vars,
        score_terms=terms,
        score_term_budgets=budgets,
    )


def encode_split(
    lists: Sequence[CandidateList],
    plan: SplitPlan,
    weights: PenaltyWeights | None = None,
    margin: float = 0.1,
) -> Encoding:
    """Encode each variable as a direct product of its two sub-families
    ("p1"/"p2" bits), with interaction coefficients making every cross pair
    score exactly as the union it decodes to."""
    n_vars = _validate_lists(lists)
    if len(plan.entries) != n_vars:
        raise ValueError("split plan does not match the candidate lists")
    for n, (cl, entry) in enumerate(zip(lists, plan.entries)):
        fam = [c.parents for c in cl.family]
        for k, (a, b) in enumerate(entry.pairing):
            if entry.family1[a] | entry.family2[b] != fam[k]:
                raise ValueError(f"split plan for variable {n} does not reproduce candidate {k}")
    families = [(plan.entries[n].family1, plan.entries[n].family2) for n in range(n_vars)]
    blocks = score_blocks_split(lists, plan)
    if weights is None:
        weights = penalty_weights(blocks, n_vars, margin=margin)
    weights.validate(n_vars)
    qubo = _build(families, blocks, weights, n_vars, kinds=("p1", "p2"))
    terms, budgets = _term_counts(families, blocks)
    return Encoding(
        qubo=qubo,
        weights=weights,
        kind="split",
        num_variables=n_vars,
        score_terms=terms,
        score_term_budgets=budgets,
    )


def _build(
    families: list[tuple[tuple[frozenset[int], ...], tuple[frozenset[int], ...]]],
    blocks: list[ScoreBlock],
    weights: PenaltyWeights,
    n_vars: int,
    kinds: tuple[str | None, str],
) -> Qubo:
    labels: list[BitLabel] = []
    pbit: dict[tuple[int, int, int], int] = {}  # (group, variable, family index) -> bit
    for n in range(n_vars):
        for g, fam in enumerate(families[n]):
            kind = kinds[g]
            if kind is None:
                continue
            for lam in range(1, len(fam)):
                pbit[(g, n, lam)] = len(labels)
                labels.append(BitLabel(kind, n, lam))
    rbit: dict[tuple[int, int], int] = {}
    for a in range(n_vars):
        for b in range(a + 1, n_vars):
            rbit[(a, b)] = len(labels)
            labels.append(BitLabel("r", a, b))

    qubo = Qubo(num_bits=len(labels), labels=labels)

    # score component
    for n, blk in enumerate(blocks):
        qubo.add_constant(blk.base_score)
        for g, lin in enumerate((blk.linear1, blk.linear2)):
            if kinds[g] is None:
                continue
            for lam in range(1, len(lin)):
                qubo.add_linear(pbit[(g, n, lam)], lin[lam])
            for lam in range(1, len(lin)):
                for lam2 in range(lam + 1, len(lin)):
                    qubo.add_quadratic(pbit[(g, n, lam)], pbit[(g, n, lam2)], weights.onehot)
        if blk.cross is not None:
            for a in range(1, len(blk.linear1)):
                for b in range(1, len(blk.linear2)):
                    t = blk.cross[a][b]
                    if t != 0.0:
                        qubo.add_quadratic(pbit[(0, n, a)], pbit[(1, n, b)], t)

    # bits whose candidate set contains a given parent, per child variable
    contains: dict[tuple[int, int], list[int]] = {}
    for n in range(n_vars):
        for g, fam in enumerate(families[n]):
            if kinds[g] is None:
                continue
            for lam in range(1, len(fam)):
                for parent in fam[lam]:
                    contains.setdefault((parent, n), []).append(pbit[(g, n, lam)])

    # order/edge coupling: penalize an edge whenever the parent is placed
    # after the child (order bit r[a,b]=1 places b after a)
    for a in range(n_vars):
        for b in range(a + 1, n_vars):
            r = rbit[(a, b)]
            for bit in contains.get((b, a), ()):  # edge b -> a, illegal when b is after a
                qubo.add_quadratic(bit, r, weights.order)
            for bit in contains.get((a, b), ()):  # edge a -> b, illegal when b is not after a
                qubo.add_linear(bit, weights.order)
                qubo.add_quadratic(bit, r, -weights.order)

    # transitivity triangles
    for a in range(n_vars):
        for b in range(a + 1, n_vars):
            for c in range(b + 1, n_vars):
                r_ab, r_bc, r_ac = rbit[(a, b)], rbit[(b, c)], rbit[(a, c)]
                qubo.add_linear(r_ac, weights.triangle)
                qubo.add_quadratic(r_ab, r_bc, weights.triangle)
                qubo.add_quadratic(r_ab, r_ac, -weights.triangle)
                qubo.add_quadratic(r_bc, r_ac, -weights.triangle)

    return qubo


def _term_counts(
    families: list[tuple[tuple[frozenset[int], ...], tuple[frozenset[int], ...]]],
    blocks: list[ScoreBlock],
) -> tuple[tuple[int, ...], tuple[float, ...]]:
    terms = []
    budgets = []
    for fams, blk in zip(families, blocks):
        n1 = len(blk.linear1) - 1
        n2 = len(blk.linear2) - 1
        count = sum(1 for s in blk.linear1[1:] if s != 0.0)
        count += sum(1 for s in blk.linear2[1:] if s != 0.0)
        if blk.cross is not None:
            count += sum(
                1 for row in blk.cross[1:] for t in row[1:] if t != 0.0
            )
        count += n1 * (n1 - 1) // 2 + n2 * (n2 - 1) // 2  # one-hot pairs
        terms.append(count)
        budgets.append(score_term_budget((len(fams[0]), len(fams[1]))))
    return tuple(terms), tuple(budgets)


def transitivity_violations(order_bits, num_variables: int):
    """Sum of triangle penalties R over all index triples a<b<c; zero exactly
    when the order bits are transitive. ``order_bits[(a, b)]`` is the 0/1
    value placing b after a."""
    total = 0
    for a in range(num_variables):
        for b in range(a + 1, num_variables):
            for c in range(b + 1, num_variables):
                r_ab = order_bits[(a, b)]
                r_bc = order_bits[(b, c)]
                r_ac = order_bits[(a, c)]
                total += r_ac + r_ab * r_bc - r_ab * r_ac - r_bc * r_ac
    return total


def expected_bits_basic(lists: Sequence[CandidateList]) -> int:
    n = len(lists)
    return sum(cl.num_candidates - 1 for cl in lists) + n * (n - 1) // 2


def expected_bits_split(plan: SplitPlan) -> int:
    n = len(plan.entries)
    return sum(e.num_bits for e in plan.entries) + n * (n - 1) // 2


def score_term_budget(group_sizes: tuple[int, int]) -> float:
    """Upper bound on one variable's score-component term count given its
    two group sizes."""
    lam = group_sizes[0] + group_sizes[1]
    return 0.5 * (lam - 0.5) ** 2 - 9.0 / 8.0
