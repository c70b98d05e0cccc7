"""Qubo minimizers: exact enumeration for small instances and single-flip
Metropolis annealing with a geometric inverse-temperature schedule."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .qubo import Qubo


class CapExceededError(RuntimeError):
    """The instance is too large for the requested exact method."""


@dataclass
class SolveResult:
    method: str
    assignment: tuple[int, ...]
    energy: float
    restart_energies: tuple[float, ...] = ()
    samples: tuple[tuple[float, tuple[int, ...]], ...] = ()
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "assignment": list(self.assignment),
            "energy": self.energy,
            "restart_energies": list(self.restart_energies),
            "samples": [{"energy": e, "assignment": list(v)} for e, v in self.samples],
            "seed": self.seed,
            "params": self.params,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SolveResult":
        return cls(
            method=obj["method"],
            assignment=tuple(int(b) for b in obj["assignment"]),
            energy=float(obj["energy"]),
            restart_energies=tuple(float(e) for e in obj["restart_energies"]),
            samples=tuple(
                (float(s["energy"]), tuple(int(b) for b in s["assignment"]))
                for s in obj["samples"]
            ),
            seed=obj.get("seed"),
            params=dict(obj.get("params", {})),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SolveResult":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _assignment_matrix(width: int) -> np.ndarray:
    """All 2^width bit rows; row k holds the big-endian bits of k, so row
    order equals lexicographic order of the bit tuples."""
    count = 1 << width
    codes = np.arange(count, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(float)


def solve_exhaustive(qubo: Qubo, cap: int = 24) -> SolveResult:
    """Exact global minimum by full enumeration.

    Bits are split into two halves so the energy of all assignments is the
    sum of two half-energies plus a cross matrix product, evaluated in
    chunks. Ties break to the lexicographically smallest assignment.
    """
    n = qubo.num_bits
    if n > cap:
        raise CapExceededError(f"{n} bits exceeds exhaustive cap {cap}")
    if n == 0:
        return SolveResult(
            method="exhaustive", assignment=(), energy=qubo.constant, params={"cap": cap}
        )

    hi = n // 2
    lo = n - hi
    lin = np.asarray(qubo.linear, dtype=float)
    q_hi = np.zeros((hi, hi))
    q_lo = np.zeros((lo, lo))
    q_cross = np.zeros((hi, lo))
    for (i, j), w in qubo.quadratic.items():
        if j < hi:
            q_hi[i, j] = w
        elif i >= hi:
            q_lo[i - hi, j - hi] = w
        else:
            q_cross[i, j - hi] = w

    rows_hi = _assignment_matrix(hi) if hi else np.zeros((1, 0))
    rows_lo = _assignment_matrix(lo)
    e_hi = rows_hi @ lin[:hi] + ((rows_hi @ q_hi) * rows_hi).sum(axis=1)
    e_lo = rows_lo @ lin[hi:] + ((rows_lo @ q_lo) * rows_lo).sum(axis=1)

    best_energy = math.inf
    best_code = 0
    chunk = max(1, min(len(rows_hi), (1 << 22) // max(1, len(rows_lo))))
    for start in range(0, len(rows_hi), chunk):
        stop = min(start + chunk, len(rows_hi))
        cross = (rows_hi[start:stop] @ q_cross) @ rows_lo.T
        block = e_hi[start:stop, None] + e_lo[None, :] + cross
        flat = int(np.argmin(block))
        value = float(block.flat[flat])
        code = ((start + flat // len(rows_lo)) << lo) | (flat % len(rows_lo))
        if value < best_energy or (value == best_energy and code < best_code):
            best_energy = value
            best_code = code

    assignment = tuple((best_code >> (n - 1 - i)) & 1 for i in range(n))
    energy = qubo.energy(assignment)
    return SolveResult(
        method="exhaustive",
        assignment=assignment,
        energy=energy,
        samples=((energy, assignment),),
        params={"cap": cap},
    )


def _beta_range(qubo: Qubo) -> tuple[float, float]:
    # hot end: flips against the largest coefficient stay likely; cold end:
    # well below the smallest coefficient scale, since energy gaps between
    # near-optimal states come from coefficient differences
    mags = [abs(w) for w in qubo.linear if w != 0.0]
    mags += [abs(w) for w in qubo.quadratic.values() if w != 0.0]
    if not mags:
        return 0.1, 10.0
    hot = max(mags)
    cold = max(min(mags), hot * 1e-4)
    return 1.0 / hot, 100.0 / cold


def solve_anneal(
    qubo: Qubo,
    sweeps: int = 1500,
    restarts: int = 20,
    seed: int = 0,
    beta_min: float | None = None,
    beta_max: float | None = None,
    keep_samples: int = 10,
) -> SolveResult:
    """Best-of-restarts simulated annealing, deterministic under ``seed``.

    Each restart runs sequential single-flip Metropolis sweeps over a
    geometric inverse-temperature ladder auto-scaled to the coefficient
    magnitudes. The overall best re-evaluates its energy exactly; restarts
    tie-break to the lexicographically smallest assignment.
    """
    n = qubo.num_bits
    auto_min, auto_max = _beta_range(qubo)
    b_min = auto_min if beta_min is None else beta_min
    b_max = auto_max if beta_max is None else beta_max
    params = {
        "sweeps": sweeps,
        "restarts": restarts,
        "beta_min": b_min,
        "beta_max": b_max,
    }
    if n == 0:
        return SolveResult(
            method="anneal", assignment=(), energy=qubo.constant, seed=seed, params=params
        )

    betas = [float(b) for b in np.geomspace(b_min, b_max, num=max(sweeps, 1))]
    lin = list(map(float, qubo.linear))
    neighbors: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for (i, j), w in qubo.quadratic.items():
        if w != 0.0:
            neighbors[i].append((j, w))
            neighbors[j].append((i, w))

    outcomes: list[tuple[float, tuple[int, ...]]] = []
    for restart in range(restarts):
        rng = random.Random(f"{seed}:{restart}")
        v = [rng.randint(0, 1) for _ in range(n)]
        fields = [
            lin[i] + sum(w * v[j] for j, w in neighbors[i]) for i in range(n)
        ]
        best_v = list(v)
        best_e = qubo.energy(v)
        cur_e = best_e
        exp = math.exp
        rand = rng.random
        for beta in betas:
            for i in range(n):
                delta = (1 - 2 * v[i]) * fields[i]
                if delta <= 0.0 or rand() < exp(-beta * delta):
                    step = 1 - 2 * v[i]
                    v[i] ^= 1
                    cur_e += delta
                    for j, w in neighbors[i]:
                        fields[j] += w * step
                    if cur_e < best_e:
                        best_e = cur_e
                        best_v = list(v)
        exact = qubo.energy(best_v)
        outcomes.append((exact, tuple(best_v)))

    outcomes_sorted = sorted(set(outcomes))
    best_energy, best_assignment = min(outcomes)
    return SolveResult(
        method="anneal",
        assignment=best_assignment,
        energy=best_energy,
        restart_energies=tuple(e for e, _ in outcomes),
        samples=tuple(outcomes_sorted[:keep_samples]),
        seed=seed,
        params=params,
    )
