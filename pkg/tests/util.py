"""Shared test helpers: independent oracles and instance builders.

The oracles here deliberately avoid the library's own computation paths:
scores are recomputed from raw row partitions, energies by direct term
summation, and coverage by scanning raw subsets.
"""

from __future__ import annotations

import itertools
import math
import random
from collections import Counter

import numpy as np

import bnqubo as bq
from bnqubo.verify import is_acyclic


def partition_score(tree: bq.DecisionTree, data: bq.Dataset) -> float:
    """Score oracle: route every row through the tree independently, group
    rows by the leaf they land in, and sum empirical entropies."""
    groups: dict[int, list[int]] = {}
    for r in range(data.num_rows):
        node = tree.root
        while not node.is_leaf:
            if data.cells[r, node.split_variable] == node.split_state:
                node = node.left
            else:
                node = node.right
        groups.setdefault(id(node), []).append(int(data.cells[r, tree.target]))
    total = 0.0
    for values in groups.values():
        m = len(values)
        for c in Counter(values).values():
            total += -c * math.log(c / m)
    return total


def naive_minimum(qubo: bq.Qubo) -> tuple[float, tuple[int, ...]]:
    """Enumeration oracle: evaluate the Hamiltonian term by term for every
    assignment, in lexicographic order."""
    best_e = math.inf
    best_v: tuple[int, ...] = ()
    for bits in itertools.product((0, 1), repeat=qubo.num_bits):
        e = qubo.constant
        for i, w in enumerate(qubo.linear):
            e += w * bits[i]
        for (i, j), w in qubo.quadratic.items():
            e += w * bits[i] * bits[j]
        if e < best_e:
            best_e = e
            best_v = bits
    return best_e, best_v


def subset_coverage_scan(candidates: bq.CandidateList, num_variables: int) -> bool:
    """Coverage oracle: raw subset scan against the record spans."""
    pool = [v for v in range(num_variables) if v != candidates.target]
    for size in range(len(pool) + 1):
        for combo in itertools.combinations(pool, size):
            subset = frozenset(combo)
            if not any(
                rec.used <= subset <= rec.allowed for rec in candidates.records
            ):
                return False
    return True


def signed_order_triple_sum(order: dict[tuple[int, int], int], num_variables: int) -> int:
    """Sum of transitivity penalties over all (a, b, c) with a < b and c a
    distinct third index, using sign-adjusted order values."""

    def r(x: int, y: int) -> int:
        return order[(x, y)] if x < y else 1 - order[(y, x)]

    total = 0
    for a in range(num_variables):
        for b in range(a + 1, num_variables):
            for c in range(num_variables):
                if c in (a, b):
                    continue
                total += r(a, c) + r(a, b) * r(b, c) - r(a, b) * r(a, c) - r(b, c) * r(a, c)
    return total


def make_copy_dataset(rows: int = 100, seed: int = 0) -> bq.Dataset:
    """Three binary variables: x1 is an exact copy of x0, x2 independent."""
    rng = np.random.default_rng(seed)
    cells = np.zeros((rows, 3), dtype=np.int64)
    cells[: rows // 2, 0] = 0
    cells[rows // 2 :, 0] = 1
    cells[:, 1] = cells[:, 0]
    cells[:, 2] = rng.integers(0, 2, rows)
    return bq.Dataset(cells=cells, states=(2, 2, 2), names=("a", "b", "c"))


def small_instance(
    seed: int,
    num_variables: int = 4,
    rows: int = 250,
    states: int = 2,
    threshold: float = 0.006,
) -> tuple[bq.Dataset, list[bq.CandidateList]]:
    spec = bq.SyntheticSpec(
        num_variables=num_variables,
        num_rows=rows,
        states=states,
        max_parents=3,
        edge_probability=0.6,
        seed=seed,
    )
    dataset, _ = bq.generate_synthetic(spec)
    lists = bq.run_pscs_all(dataset, threshold=threshold)
    return dataset, lists


def random_feasible_assignment(
    rng: random.Random,
    qubo: bq.Qubo,
    lists: list[bq.CandidateList],
    plan: bq.SplitPlan | None = None,
) -> tuple[list[int], list[frozenset[int]]]:
    """Sample an assignment with one candidate choice per group whose decoded
    graph is acyclic, and order bits set from a random linear extension."""
    bit_of = qubo.bit_index()
    n_vars = len(lists)
    while True:
        v = [0] * qubo.num_bits
        parent_sets: list[frozenset[int]] = []
        for n, cl in enumerate(lists):
            if plan is None:
                lam = rng.randrange(cl.num_candidates)
                if lam:
                    v[bit_of[bq.BitLabel("p", n, lam)]] = 1
                parent_sets.append(cl.family[lam].parents)
            else:
                entry = plan.entries[n]
                lam1 = rng.randrange(len(entry.family1))
                lam2 = rng.randrange(len(entry.family2))
                if lam1:
                    v[bit_of[bq.BitLabel("p1", n, lam1)]] = 1
                if lam2:
                    v[bit_of[bq.BitLabel("p2", n, lam2)]] = 1
                parent_sets.append(entry.family1[lam1] | entry.family2[lam2])
        edges = [(p, c) for c, ps in enumerate(parent_sets) for p in ps]
        if is_acyclic(edges, n_vars):
            break

    order: list[int] = []
    remaining = set(range(n_vars))
    while remaining:
        ready = sorted(m for m in remaining if not (parent_sets[m] & remaining))
        pick = rng.choice(ready)
        order.append(pick)
        remaining.discard(pick)
    position = {m: i for i, m in enumerate(order)}
    for a in range(n_vars):
        for b in range(a + 1, n_vars):
            if position[b] > position[a]:
                v[bit_of[bq.BitLabel("r", a, b)]] = 1
    return v, parent_sets


def manual_candidate_list(target: int, entries: list[tuple[set[int], float]]) -> bq.CandidateList:
    """Hand-built list whose records span exactly their own parent sets."""
    records = [
        bq.CandidateRecord(used=frozenset(p), allowed=frozenset(p), score=s)
        for p, s in entries
    ]
    family = [bq.Candidate(parents=frozenset(p), score=s) for p, s in entries]
    return bq.CandidateList(
        target=target, threshold=0.1, records=records, family=family, complete=True
    )
