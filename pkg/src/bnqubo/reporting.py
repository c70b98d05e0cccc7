"""Per-variable candidate-search and encoding metrics: delimited output plus
scatter figures rendered alongside it."""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from pathlib import Path

from .encoder import optimize_split
from .pscs import CandidateList


def prior_method_bits(num_variables: int, max_parents: int) -> int:
    """Bit count of the path-matrix formulation this toolkit replaces:
    N(N-1) path bits, N(N-1)/2 order bits, and N*ceil(log2(M+1)) counter
    bits for the parent cap M."""
    n = num_variables
    mu = math.ceil(math.log2(max_parents + 1)) if max_parents > 0 else 0
    return n * (n - 1) + n * (n - 1) // 2 + n * mu


def half_split_bound_bits(ground_set_size: int) -> int:
    """Worst-case score bits at the half split of a ground set of g
    variables: each sub-family is at most the power set of its side, so
    2^ceil(g/2) + 2^floor(g/2) - 2 bits suffice regardless of the family."""
    g = ground_set_size
    return 2 ** math.ceil(g / 2) + 2 ** (g // 2) - 2


def metrics_rows(
    lists: Sequence[CandidateList],
    budgets: Sequence[int] = (0, 1, 2),
) -> list[dict]:
    """One row per variable: search effort, family size, and the split
    encoding's bit requirement at each requested budget."""
    budgets = sorted(set(int(k) for k in budgets))
    n_vars = len(lists)
    observed_max_parents = max(
        (len(c.parents) for cl in lists for c in cl.family), default=0
    )
    reference_bits = prior_method_bits(n_vars, observed_max_parents)

    rows = []
    for cl in lists:
        row: dict = {
            "variable": cl.target,
            "num_trainings": cl.num_trainings,
            "num_candidates": cl.num_candidates,
            "trainings_per_candidate": cl.num_trainings / cl.num_candidates,
            "train_seconds": cl.train_seconds,
            "memo_hits": cl.memo_hits,
            "ground_set_size": len(cl.ground_set),
            "bits_basic": cl.num_candidates - 1,
        }
        family = [c.parents for c in cl.family]
        for k in budgets:
            entry = optimize_split(family, k)
            row[f"bits_split_k{k}"] = entry.num_bits
        row["bits_bound_half_split"] = half_split_bound_bits(len(cl.ground_set))
        row["prior_method_bits"] = reference_bits
        rows.append(row)
    return rows


def write_metrics_csv(rows: list[dict], path: str | Path) -> None:
    if not rows:
        raise ValueError("no metrics rows to write")
    fieldnames = list(rows[0].keys())
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def render_metrics_figures(rows: list[dict], outdir: str | Path) -> list[Path]:
    """Render the two scatter views next to the CSV: search efficiency
    against family size, and required bits (per budget) plus ground-set size
    against the unsplit bit count."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    log_lam = [math.log2(r["num_candidates"]) for r in rows]
    efficiency = [r["trainings_per_candidate"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(log_lam, efficiency, s=24)
    ax.set_xlabel("log2(candidate family size)")
    ax.set_ylabel("trainings per candidate")
    ax.set_title("candidate search efficiency")
    fig.tight_layout()
    path = outdir / "metrics_efficiency.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    budget_cols = sorted(
        (c for c in rows[0] if c.startswith("bits_split_k")),
        key=lambda c: int(c.removeprefix("bits_split_k")),
    )
    bits_basic = [r["bits_basic"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for col in budget_cols:
        k = col.removeprefix("bits_split_k")
        ax1.scatter(bits_basic, [r[col] for r in rows], s=24, label=f"budget {k}")
    lim = max(bits_basic + [1])
    ax1.plot([0, lim], [0, lim], ls="--", lw=1, color="gray")
    ax1.set_xlabel("bits without splitting")
    ax1.set_ylabel("bits with split")
    ax1.set_title("split encoding bit savings")
    ax1.legend()
    ax2.scatter(bits_basic, [r["ground_set_size"] for r in rows], s=24)
    ax2.set_xlabel("bits without splitting")
    ax2.set_ylabel("candidate ground-set size")
    ax2.set_title("parent pool breadth")
    fig.tight_layout()
    path = outdir / "metrics_bits.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    return written
