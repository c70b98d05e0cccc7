"""Bit-labeled quadratic pseudo-Boolean functions.

A Qubo is H(v) = constant + sum_i linear[i] v_i + sum_{i<j} quadratic[i,j] v_i v_j
over binary v. Coefficients adding to the same key accumulate. Two export
formats round-trip bit-exactly: a JSON document and a plain-text coordinate
format (``i j w`` lines, ``i i w`` for linear terms).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

KINDS = ("p", "p1", "p2", "r")


@dataclass(frozen=True)
class BitLabel:
    """Semantic tag of one bit.

    Candidate-selection bits use kind "p" (single-family encoding) or
    "p1"/"p2" (split encoding); ``i`` is the variable, ``j`` the family
    index. Order bits use kind "r" with ``i < j``; value 1 places variable
    ``j`` after variable ``i``.
    """

    kind: str
    i: int
    j: int

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown bit kind {self.kind!r}")
        if self.kind == "r" and not self.i < self.j:
            raise ValueError("order bits require i < j")

    def __str__(self) -> str:
        return f"{self.kind}[{self.i},{self.j}]"


class Qubo:
    """Mutable coefficient container with exact evaluation."""

    def __init__(
        self,
        num_bits: int,
        labels: list[BitLabel] | None = None,
        constant: float = 0.0,
    ):
        if num_bits < 0:
            raise ValueError("num_bits must be non-negative")
        if labels is not None and len(labels) != num_bits:
            raise ValueError("labels must cover every bit")
        self.num_bits = num_bits
        self.constant = float(constant)
        self.linear: list[float] = [0.0] * num_bits
        self.quadratic: dict[tuple[int, int], float] = {}
        self.labels = list(labels) if labels is not None else None
        self._cache: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None = None

    def add_constant(self, w: float) -> None:
        self.constant += w
        self._cache = None

    def add_linear(self, i: int, w: float) -> None:
        self.linear[i] += w
        self._cache = None

    def add_quadratic(self, i: int, j: int, w: float) -> None:
        if i == j:
            raise ValueError("quadratic terms need two distinct bits")
        if i > j:
            i, j = j, i
        self.quadratic[(i, j)] = self.quadratic.get((i, j), 0.0) + w
        self._cache = None

    def _arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        if self._cache is None:
            keys = sorted(self.quadratic)
            qi = np.array([k[0] for k in keys], dtype=np.int64)
            qj = np.array([k[1] for k in keys], dtype=np.int64)
            qw = np.array([self.quadratic[k] for k in keys], dtype=float)
            lin = np.asarray(self.linear, dtype=float)
            self._cache = (lin, qi, qj, qw)
        return self._cache

    def energy(self, assignment) -> float:
        """Evaluate H at a 0/1 assignment."""
        v = np.asarray(assignment, dtype=float)
        if v.shape != (self.num_bits,):
            raise ValueError(f"assignment must have {self.num_bits} entries")
        lin, qi, qj, qw = self._arrays()
        total = self.constant + float(lin @ v)
        if len(qw):
            total += float(qw @ (v[qi] * v[qj]))
        return total

    def num_terms(self) -> tuple[int, int]:
        """Counts of nonzero (linear, quadratic) coefficients."""
        n_lin = sum(1 for w in self.linear if w != 0.0)
        n_quad = sum(1 for w in self.quadratic.values() if w != 0.0)
        return n_lin, n_quad

    def bit_index(self) -> dict[BitLabel, int]:
        if self.labels is None:
            raise ValueError("this qubo carries no bit labels")
        return {label: i for i, label in enumerate(self.labels)}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Qubo):
            return NotImplemented
        return (
            self.num_bits == other.num_bits
            and self.constant == other.constant
            and self.linear == other.linear
            and self.quadratic == other.quadratic
            and self.labels == other.labels
        )

    # -- JSON format ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "num_bits": self.num_bits,
            "constant": self.constant,
            "linear": list(self.linear),
            "quadratic": [[i, j, self.quadratic[(i, j)]] for i, j in sorted(self.quadratic)],
            "labels": None
            if self.labels is None
            else [{"kind": l.kind, "i": l.i, "j": l.j} for l in self.labels],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Qubo":
        labels = obj.get("labels")
        q = cls(
            num_bits=int(obj["num_bits"]),
            labels=None
            if labels is None
            else [BitLabel(d["kind"], int(d["i"]), int(d["j"])) for d in labels],
            constant=float(obj["constant"]),
        )
        for i, w in enumerate(obj["linear"]):
            q.linear[i] = float(w)
        for i, j, w in obj["quadratic"]:
            q.quadratic[(int(i), int(j))] = float(w)
        return q

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()) + "\n")

    @classmethod
    def load_json(cls, path: str | Path) -> "Qubo":
        return cls.from_json_dict(json.loads(Path(path).read_text()))

    # -- coordinate text format -------------------------------------------

    def to_coordinate_text(self) -> str:
        lines = [f"# num_bits {self.num_bits}", f"# constant {self.constant!r}"]
        if self.labels is not None:
            for i, label in enumerate(self.labels):
                lines.append(f"# label {i} {label.kind} {label.i} {label.j}")
        for i, w in enumerate(self.linear):
            if w != 0.0:
                lines.append(f"{i} {i} {w!r}")
        for (i, j), w in sorted(self.quadratic.items()):
            lines.append(f"{i} {j} {w!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_coordinate_text(cls, text: str) -> "Qubo":
        num_bits = 0
        constant = 0.0
        labels: list[tuple[int, BitLabel]] = []
        entries: list[tuple[int, int, float]] = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts[0] == "num_bits":
                    num_bits = int(parts[1])
                elif parts[0] == "constant":
                    constant = float(parts[1])
                elif parts[0] == "label":
                    labels.append(
                        (int(parts[1]), BitLabel(parts[2], int(parts[3]), int(parts[4])))
                    )
                continue
            i_s, j_s, w_s = line.split()
            entries.append((int(i_s), int(j_s), float(w_s)))
        label_list = None
        if labels:
            label_list = [l for _, l in sorted(labels, key=lambda t: t[0])]
        q = cls(num_bits=num_bits, labels=label_list, constant=constant)
        for i, j, w in entries:
            if i == j:
                q.linear[i] = w
            else:
                q.quadratic[(min(i, j), max(i, j))] = w
        return q

    def save_coordinate(self, path: str | Path) -> None:
        Path(path).write_text(self.to_coordinate_text())

    @classmethod
    def load_coordinate(cls, path: str | Path) -> "Qubo":
        return cls.from_coordinate_text(Path(path).read_text())
