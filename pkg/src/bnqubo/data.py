"""Discrete tabular datasets: CSV ingestion with discretization, and synthesis
from random directed acyclic models."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

DEFAULT_MISSING_TOKENS = ("", "NA", "N/A", "NaN", "nan", "null", "NULL", "?")


class IngestError(ValueError):
    """Raised when a CSV cannot be turned into a usable dataset."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable matrix of state indices with per-variable cardinalities.

    Every cell of column ``n`` is an integer in ``[0, states[n])`` and every
    variable has at least two states. Rows are complete (no missing values).
    Instances are safe to share across threads/processes.
    """

    cells: np.ndarray
    states: tuple[int, ...]
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.int64))
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        object.__setattr__(self, "names", tuple(str(x) for x in self.names))
        if cells.ndim != 2:
            raise ValueError("cells must be a 2-d matrix")
        rows, cols = cells.shape
        if rows < 1:
            raise ValueError("dataset needs at least one row")
        if len(self.states) != cols or len(self.names) != cols:
            raise ValueError("states/names must match the number of columns")
        for n, k in enumerate(self.states):
            if k < 2:
                raise ValueError(f"variable {n} has {k} states; at least 2 required")
            col = cells[:, n]
            if int(col.min()) < 0 or int(col.max()) >= k:
                raise ValueError(f"variable {n} has values outside [0, {k})")

    @property
    def num_rows(self) -> int:
        return self.cells.shape[0]

    @property
    def num_variables(self) -> int:
        return self.cells.shape[1]

    def column(self, n: int) -> np.ndarray:
        return self.cells[:, n]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.states == other.states
            and self.names == other.names
            and np.array_equal(self.cells, other.cells)
        )

    def __hash__(self) -> int:
        return hash((self.states, self.names, self.cells.tobytes()))

    def to_json_dict(self) -> dict:
        return {
            "names": list(self.names),
            "states": list(self.states),
            "rows": self.cells.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Dataset":
        return cls(
            cells=np.asarray(obj["rows"], dtype=np.int64),
            states=tuple(obj["states"]),
            names=tuple(obj["names"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        return cls.from_json_dict(json.loads(Path(path).read_text()))

    def to_csv(self, path: str | Path) -> None:
        """Write the state indices back out as a plain CSV with header."""
        df = pd.DataFrame(self.cells, columns=list(self.names))
        df.to_csv(path, index=False)


@dataclass(frozen=True)
class IngestConfig:
    """Knobs for turning a raw CSV into a :class:`Dataset`.

    Numeric columns with more than ``max_states`` distinct values are
    quantile-binned into ``bins`` states; other columns are treated as
    categorical and dropped when they have more than ``max_states`` distinct
    labels. Rows containing any ``missing_tokens`` entry are dropped first.
    """

    bins: int = 3
    max_states: int = 4
    missing_tokens: tuple[str, ...] = DEFAULT_MISSING_TOKENS

    def __post_init__(self) -> None:
        if self.bins < 2:
            raise ValueError("bins must be at least 2")
        if self.max_states < 2:
            raise ValueError("max_states must be at least 2")


@dataclass(frozen=True)
class ColumnReport:
    name: str
    action: str  # "binned" | "categorical" | "dropped"
    detail: str
    variable: int | None = None  # index in the resulting dataset, if kept


@dataclass
class IngestResult:
    dataset: Dataset
    columns: list[ColumnReport]
    dropped_rows: int

    def to_json_dict(self) -> dict:
        return {
            "dropped_rows": self.dropped_rows,
            "columns": [
                {
                    "name": c.name,
                    "action": c.action,
                    "detail": c.detail,
                    "variable": c.variable,
                }
                for c in self.columns
            ],
        }


def quantile_bin(values: np.ndarray, bins: int) -> np.ndarray:
    """Assign each value to a quantile bin, ties going to the lower bin.

    Order-preserving: x <= y implies bin(x) <= bin(y).
    """
    values = np.asarray(values, dtype=float)
    edges = np.quantile(values, [j / bins for j in range(1, bins)])
    return (values[:, None] > edges[None, :]).sum(axis=1).astype(np.int64)


def _dense_codes(values: np.ndarray) -> tuple[np.ndarray, int]:
    """Map values to dense 0..k-1 codes preserving sort order."""
    uniq, codes = np.unique(values, return_inverse=True)
    return codes.astype(np.int64), len(uniq)


def ingest_csv(path: str | Path, config: IngestConfig = IngestConfig()) -> IngestResult:
    """Read a CSV with header, discretize, and return the surviving columns.

    Raises :class:`IngestError` when the file is unreadable, no rows survive
    cleaning, or fewer than two columns survive discretization.
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except Exception as exc:
        raise IngestError(f"cannot read CSV {path}: {exc}") from exc
    if df.shape[1] < 2:
        raise IngestError(f"{path}: need at least 2 columns, found {df.shape[1]}")

    missing = df.isin(config.missing_tokens).any(axis=1)
    dropped_rows = int(missing.sum())
    df = df.loc[~missing]
    if df.shape[0] == 0:
        raise IngestError(f"{path}: no rows left after dropping missing values")

    reports: list[ColumnReport] = []
    kept_cols: list[np.ndarray] = []
    kept_states: list[int] = []
    kept_names: list[str] = []

    for name in df.columns:
        raw = df[name].to_numpy()
        numeric = pd.to_numeric(pd.Series(raw), errors="coerce")
        is_numeric = not numeric.isna().any()
        if is_numeric:
            vals = numeric.to_numpy(dtype=float)
            distinct = len(np.unique(vals))
            if distinct > config.max_states:
                codes = quantile_bin(vals, config.bins)
                codes, k = _dense_codes(codes)
                action, detail = "binned", f"quantile bins={config.bins}"
            else:
                codes, k = _dense_codes(vals)
                action, detail = "categorical", f"{distinct} numeric levels"
        else:
            distinct = len(np.unique(raw))
            if distinct > config.max_states:
                reports.append(
                    ColumnReport(name, "dropped", f"{distinct} labels > max_states={config.max_states}")
                )
                continue
            codes, k = _dense_codes(raw)
            action, detail = "categorical", f"{distinct} labels"
        if k < 2:
            reports.append(ColumnReport(name, "dropped", "constant after discretization"))
            continue
        reports.append(ColumnReport(name, action, detail, variable=len(kept_cols)))
        kept_cols.append(codes)
        kept_states.append(k)
        kept_names.append(name)

    if len(kept_cols) < 2:
        raise IngestError(f"{path}: fewer than 2 columns survived discretization")

    dataset = Dataset(
        cells=np.column_stack(kept_cols),
        states=tuple(kept_states),
        names=tuple(kept_names),
    )
    return IngestResult(dataset=dataset, columns=reports, dropped_rows=dropped_rows)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for sampling a dataset from a random directed acyclic model."""

    num_variables: int
    num_rows: int
    states: int | tuple[int, ...] = 3
    max_parents: int = 2
    edge_probability: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_variables < 1:
            raise ValueError("num_variables must be positive")
        if self.num_rows < 1:
            raise ValueError("num_rows must be positive")
        if self.max_parents < 0:
            raise ValueError("max_parents must be non-negative")
        if not 0.0 <= self.edge_probability <= 1.0:
            raise ValueError("edge_probability must lie in [0, 1]")
        for k in self.state_counts():
            if k < 2:
                raise ValueError("every variable needs at least 2 states")

    def state_counts(self) -> tuple[int, ...]:
        if isinstance(self.states, int):
            return (self.states,) * self.num_variables
        if len(self.states) != self.num_variables:
            raise ValueError("states tuple must have num_variables entries")
        return tuple(int(s) for s in self.states)

    def to_json_dict(self) -> dict:
        return {
            "num_variables": self.num_variables,
            "num_rows": self.num_rows,
            "states": list(self.states) if not isinstance(self.states, int) else self.states,
            "max_parents": self.max_parents,
            "edge_probability": self.edge_probability,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SyntheticSpec":
        states = obj.get("states", 3)
        if isinstance(states, list):
            states = tuple(states)
        return cls(
            num_variables=int(obj["num_variables"]),
            num_rows=int(obj["num_rows"]),
            states=states,
            max_parents=int(obj.get("max_parents", 2)),
            edge_probability=float(obj.get("edge_probability", 0.3)),
            seed=int(obj.get("seed", 0)),
        )


@dataclass(frozen=True)
class GroundTruth:
    """Generating graph of a synthetic dataset: parent sets per variable."""

    parents: tuple[frozenset[int], ...]

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        out = []
        for child, ps in enumerate(self.parents):
            out.extend((p, child) for p in sorted(ps))
        return tuple(sorted(out))

    def to_json_dict(self) -> dict:
        return {"parents": [sorted(ps) for ps in self.parents]}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "GroundTruth":
        return cls(parents=tuple(frozenset(ps) for ps in obj["parents"]))


def _sample_model(
    rng: np.random.Generator, spec: SyntheticSpec
) -> tuple[np.ndarray, list[frozenset[int]], list[np.ndarray], list[tuple[tuple[int, int], ...]]]:
    """Draw the generating model: a topological order, parent sets along it,
    and one categorical distribution per parent configuration."""
    n_vars = spec.num_variables
    states = spec.state_counts()

    order = rng.permutation(n_vars)
    parents: list[frozenset[int]] = [frozenset()] * n_vars
    for pos in range(n_vars):
        node = int(order[pos])
        pool = [int(order[q]) for q in range(pos)]
        chosen = [v for v in pool if rng.random() < spec.edge_probability]
        if len(chosen) > spec.max_parents:
            keep = rng.choice(len(chosen), size=spec.max_parents, replace=False)
            chosen = [chosen[i] for i in sorted(keep)]
        parents[node] = frozenset(chosen)

    tables: list[np.ndarray] = [np.empty(0)] * n_vars
    strides: list[tuple[tuple[int, int], ...]] = [()] * n_vars
    for node in range(n_vars):
        n_cfg = 1
        st: list[tuple[int, int]] = []
        for p in sorted(parents[node]):
            st.append((p, n_cfg))
            n_cfg *= states[p]
        tables[node] = rng.dirichlet(np.ones(states[node]), size=n_cfg)
        strides[node] = tuple(st)
    return order, parents, tables, strides


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, GroundTruth]:
    """Sample a dataset by ancestral sampling from a random DAG with random
    conditional tables. Deterministic for a fixed spec (seed included)."""
    rng = np.random.default_rng(spec.seed)
    n_vars = spec.num_variables
    states = spec.state_counts()
    order, parents, tables, strides = _sample_model(rng, spec)

    cells = np.zeros((spec.num_rows, n_vars), dtype=np.int64)
    for pos in range(n_vars):
        node = int(order[pos])
        cfg = np.zeros(spec.num_rows, dtype=np.int64)
        for p, stride in strides[node]:
            cfg += cells[:, p] * stride
        probs = tables[node][cfg]
        cum = np.cumsum(probs, axis=1)
        u = rng.random(spec.num_rows)
        cells[:, node] = np.minimum((cum < u[:, None]).sum(axis=1), states[node] - 1)

    dataset = Dataset(cells=cells, states=states, names=tuple(f"x{i}" for i in range(n_vars)))
    return dataset, GroundTruth(parents=tuple(parents))
