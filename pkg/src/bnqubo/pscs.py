"""Parent-set candidate search.

For one target variable, repeatedly trains trees while shrinking the
explanatory pool, recording (used, allowed, score) spans. A span certifies
the score of every variable set squeezed between its used and allowed sets,
so together the records cover the whole power set of potential parents and
any subset's score can be looked up without retraining.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

from .cart import score as tree_score
from .cart import train_cart, used_variables
from .data import Dataset


class IncompleteCandidatesError(RuntimeError):
    """A candidate list was cut short by resource caps and cannot serve."""


@dataclass(frozen=True)
class CandidateRecord:
    """Span (used, allowed, score): every X with used <= X <= allowed scores
    the same as ``used``."""

    used: frozenset[int]
    allowed: frozenset[int]
    score: float

    def spans(self, variables: frozenset[int]) -> bool:
        return self.used <= variables <= self.allowed


@dataclass(frozen=True)
class Candidate:
    parents: frozenset[int]
    score: float


@dataclass
class CandidateList:
    """Search output for one variable.

    ``records`` is the ordered training/reuse log; ``family`` the
    deduplicated candidate parent sets (empty set first). ``complete`` is
    False when a resource cap aborted the search, in which case encoding
    must refuse the list.
    """

    target: int
    threshold: float
    records: list[CandidateRecord]
    family: list[Candidate]
    complete: bool = True
    train_seconds: float = 0.0
    memo_hits: int = 0

    @property
    def num_trainings(self) -> int:
        return len(self.records)

    @property
    def num_candidates(self) -> int:
        return len(self.family)

    @property
    def ground_set(self) -> frozenset[int]:
        out: frozenset[int] = frozenset()
        for cand in self.family:
            out |= cand.parents
        return out

    def candidate_index(self, parents: frozenset[int]) -> int:
        for i, cand in enumerate(self.family):
            if cand.parents == parents:
                return i
        raise KeyError(f"{sorted(parents)} not in candidate family")

    def to_json_dict(self) -> dict:
        return {
            "target": self.target,
            "threshold": self.threshold,
            "complete": self.complete,
            "records": [
                {"used": sorted(r.used), "allowed": sorted(r.allowed), "score": r.score}
                for r in self.records
            ],
            "family": [
                {"parents": sorted(c.parents), "score": c.score} for c in self.family
            ],
            "stats": {
                "num_trainings": self.num_trainings,
                "num_candidates": self.num_candidates,
                "memo_hits": self.memo_hits,
                "train_seconds": self.train_seconds,
            },
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "CandidateList":
        return cls(
            target=int(obj["target"]),
            threshold=float(obj["threshold"]),
            records=[
                CandidateRecord(
                    used=frozenset(r["used"]),
                    allowed=frozenset(r["allowed"]),
                    score=float(r["score"]),
                )
                for r in obj["records"]
            ],
            family=[
                Candidate(parents=frozenset(c["parents"]), score=float(c["score"]))
                for c in obj["family"]
            ],
            complete=bool(obj["complete"]),
            train_seconds=float(obj["stats"]["train_seconds"]),
            memo_hits=int(obj["stats"]["memo_hits"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CandidateList":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SearchLimits:
    max_trainings: int | None = None
    max_seconds: float | None = None


def run_pscs(
    data: Dataset,
    target: int,
    threshold: float,
    limits: SearchLimits = SearchLimits(),
) -> CandidateList:
    """Enumerate candidate spans for ``target``.

    Starting from the full explanatory pool, each call either reuses an
    existing span containing the pool or trains a tree and records a new
    span, then recurses with each used variable removed (ascending index).
    Pools already explored are skipped; re-entering one would replay an
    identical subtree because records only ever accumulate.

    When a cap in ``limits`` trips, the partial list is returned with
    ``complete=False``.
    """
    if not 0 <= target < data.num_variables:
        raise ValueError(f"target {target} out of range")

    records: list[CandidateRecord] = []
    family: list[Candidate] = []
    seen_parents: set[frozenset[int]] = set()
    visited: set[frozenset[int]] = set()
    state = {"hits": 0, "train_seconds": 0.0, "aborted": False}
    t_start = time.perf_counter()

    def over_budget() -> bool:
        if limits.max_trainings is not None and len(records) >= limits.max_trainings:
            return True
        if limits.max_seconds is not None:
            return time.perf_counter() - t_start > limits.max_seconds
        return False

    def visit(pool: frozenset[int]) -> None:
        if state["aborted"]:
            return
        if pool in visited:
            state["hits"] += 1
            return
        visited.add(pool)

        used: frozenset[int] | None = None
        for rec in records:
            if rec.spans(pool):
                used = rec.used
                state["hits"] += 1
                break
        if used is None:
            if over_budget():
                state["aborted"] = True
                return
            t0 = time.perf_counter()
            tree = train_cart(data, target, pool, threshold)
            state["train_seconds"] += time.perf_counter() - t0
            used = used_variables(tree)
            value = tree_score(tree)
            records.append(CandidateRecord(used=used, allowed=pool, score=value))
            if used not in seen_parents:
                seen_parents.add(used)
                family.append(Candidate(parents=used, score=value))
        for u in sorted(used):
            visit(pool - {u})
            if state["aborted"]:
                return

    visit(frozenset(range(data.num_variables)) - {target})

    complete = not state["aborted"]
    # empty set first, others in discovery order
    ordered = [c for c in family if not c.parents] + [c for c in family if c.parents]
    return CandidateList(
        target=target,
        threshold=threshold,
        records=records,
        family=ordered,
        complete=complete,
        train_seconds=state["train_seconds"],
        memo_hits=state["hits"],
    )


def _pscs_job(args: tuple[Dataset, int, float, SearchLimits]) -> CandidateList:
    data, target, threshold, limits = args
    return run_pscs(data, target, threshold, limits=limits)


def run_pscs_all(
    data: Dataset,
    threshold: float,
    limits: SearchLimits = SearchLimits(),
    jobs: int = 1,
) -> list[CandidateList]:
    """Candidate search for every variable; variables are independent and may
    run in parallel worker processes."""
    targets = list(range(data.num_variables))
    if jobs <= 1 or len(targets) <= 1:
        return [run_pscs(data, n, threshold, limits=limits) for n in targets]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=min(jobs, len(targets))) as pool:
        return list(pool.map(_pscs_job, [(data, n, threshold, limits) for n in targets]))


def lookup_score(
    candidates: CandidateList,
    variables: frozenset[int],
    data: Dataset | None = None,
    allow_fallback: bool = True,
) -> tuple[frozenset[int], float]:
    """Score of restricting the explanatory pool to ``variables``.

    Returns the matched span's used set and score. Complete lists cover every
    subset; for partial lists a fallback training (requires ``data``) fills
    the gap and is memoized onto the list.
    """
    variables = frozenset(variables)
    first: CandidateRecord | None = None
    for rec in candidates.records:
        if rec.spans(variables):
            if first is None:
                first = rec
            elif not math.isclose(rec.score, first.score, rel_tol=1e-9, abs_tol=1e-9):
                raise AssertionError(
                    f"span scores disagree for {sorted(variables)}: "
                    f"{first.score} vs {rec.score}"
                )
    if first is not None:
        return first.used, first.score
    if candidates.complete:
        raise LookupError(
            f"no span covers {sorted(variables)} despite a complete list; "
            "candidate list is corrupt"
        )
    if not allow_fallback or data is None:
        raise IncompleteCandidatesError(
            f"candidate list for variable {candidates.target} is partial and "
            "fallback training is unavailable"
        )
    tree = train_cart(data, candidates.target, variables, candidates.threshold)
    used = used_variables(tree)
    value = tree_score(tree)
    candidates.records.append(CandidateRecord(used=used, allowed=variables, score=value))
    if all(c.parents != used for c in candidates.family):
        candidates.family.append(Candidate(parents=used, score=value))
    return used, value


def coverage_holds(candidates: CandidateList, num_variables: int) -> bool:
    """Exhaustively verify that every subset of the potential parents is
    spanned by some record. Exponential; meant for small problems."""
    pool = sorted(set(range(num_variables)) - {candidates.target})
    if len(pool) > 20:
        raise ValueError("coverage check is exponential; refuse > 20 variables")
    spans = [
        (_mask(rec.used, pool), _mask(rec.allowed, pool)) for rec in candidates.records
    ]
    for bits in range(1 << len(pool)):
        ok = any(u & bits == u and bits & ~w == 0 for u, w in spans)
        if not ok:
            return False
    return True


def _mask(variables: frozenset[int], pool: list[int]) -> int:
    out = 0
    for i, v in enumerate(pool):
        if v in variables:
            out |= 1 << i
    return out
