"""Greedy binary classification trees over discrete variables.

Trees split one-state-versus-rest on an explanatory variable, growing only
while the split's cross-entropy decrease (mean nats per dataset row) meets a
threshold. Training is a pure, deterministic function of its inputs, which
the candidate search relies on: retraining restricted to the variables a tree
actually used reproduces the tree exactly.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class TreeNode:
    """One node: class counts plus, for internal nodes, the binary split.

    ``left`` holds the rows where the split variable equals ``split_state``;
    ``right`` holds the rest.
    """

    counts: tuple[int, ...]
    split_variable: int | None = None
    split_state: int | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.split_variable is None


@dataclass(frozen=True)
class DecisionTree:
    target: int
    allowed: frozenset[int]
    threshold: float
    num_rows: int
    root: TreeNode

    def leaves(self) -> list[TreeNode]:
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.append(node.right)
                stack.append(node.left)
        return out


def _entropy_rows(mat: np.ndarray) -> np.ndarray:
    """Total entropy -sum_s c_s log(c_s / total) for each row of counts."""
    mat = np.asarray(mat, dtype=float)
    totals = mat.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        data_term = np.where(mat > 0, mat * np.log(mat), 0.0).sum(axis=1)
        total_term = np.where(totals > 0, totals * np.log(totals), 0.0)
    return total_term - data_term


def _entropy(counts: np.ndarray) -> float:
    return float(_entropy_rows(np.asarray(counts, dtype=float)[None, :])[0])


def train_cart(
    data: Dataset, target: int, allowed: Iterable[int], threshold: float
) -> DecisionTree:
    """Grow a tree for ``target`` using explanatory variables ``allowed``.

    At each node every one-state-versus-rest split of every allowed variable
    is scored by its cross-entropy decrease, normalized per dataset row; the
    best split is taken when the decrease reaches ``threshold``. Ties break
    to the lowest variable index, then the lowest state index, which makes
    the result reproducible when the allowed set shrinks to the variables
    actually used.
    """
    allowed_set = frozenset(int(w) for w in allowed)
    if not 0 <= target < data.num_variables:
        raise ValueError(f"target {target} out of range")
    if target in allowed_set:
        raise ValueError(f"target {target} cannot be explanatory")
    for w in allowed_set:
        if not 0 <= w < data.num_variables:
            raise ValueError(f"explanatory variable {w} out of range")

    y = data.column(target)
    k_target = data.states[target]
    total_rows = data.num_rows
    order_w = sorted(allowed_set)

    # Grown iteratively; entries link children by index, children indices are
    # always larger than the parent's, so freezing in reverse order works.
    entries: list[dict] = []
    stack: list[tuple[np.ndarray, int, str]] = [(np.arange(total_rows), -1, "")]
    while stack:
        rows, parent, side = stack.pop()
        counts = np.bincount(y[rows], minlength=k_target)
        e_parent = _entropy(counts)

        best_dec = -math.inf
        best_split: tuple[int, int] | None = None
        best_mask: np.ndarray | None = None
        for w in order_w:
            xw = data.cells[rows, w]
            k_w = data.states[w]
            table = np.bincount(xw * k_target + y[rows], minlength=k_w * k_target)
            table = table.reshape(k_w, k_target)
            left_tot = table.sum(axis=1)
            valid = (left_tot > 0) & (left_tot < len(rows))
            if not valid.any():
                continue
            e_left = _entropy_rows(table)
            e_right = _entropy_rows(counts[None, :] - table)
            dec = (e_parent - e_left - e_right) / total_rows
            for t in range(k_w):
                if valid[t] and dec[t] > best_dec:
                    best_dec = float(dec[t])
                    best_split = (w, t)
                    best_mask = xw == t

        idx = len(entries)
        entry = {
            "counts": tuple(int(c) for c in counts),
            "split": None,
            "left": -1,
            "right": -1,
        }
        entries.append(entry)
        if parent >= 0:
            entries[parent][side] = idx
        if best_split is not None and best_dec >= threshold:
            entry["split"] = best_split
            stack.append((rows[~best_mask], idx, "right"))
            stack.append((rows[best_mask], idx, "left"))

    frozen: list[TreeNode | None] = [None] * len(entries)
    for idx in range(len(entries) - 1, -1, -1):
        e = entries[idx]
        if e["split"] is None:
            frozen[idx] = TreeNode(counts=e["counts"])
        else:
            w, t = e["split"]
            frozen[idx] = TreeNode(
                counts=e["counts"],
                split_variable=w,
                split_state=t,
                left=frozen[e["left"]],
                right=frozen[e["right"]],
            )

    return DecisionTree(
        target=target,
        allowed=allowed_set,
        threshold=threshold,
        num_rows=total_rows,
        root=frozen[0],
    )


def used_variables(tree: DecisionTree) -> frozenset[int]:
    """Distinct split variables of the tree; a subset of ``tree.allowed``."""
    used = set()
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if not node.is_leaf:
            used.add(node.split_variable)
            stack.append(node.right)
            stack.append(node.left)
    return frozenset(used)


def score(tree: DecisionTree, alpha: float = 0.0) -> float:
    """Negative log likelihood (nats) of the training data under the tree's
    per-leaf multinomials; ``alpha`` adds a Dirichlet pseudo-count."""
    total = 0.0
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            total += _leaf_term(node.counts, alpha)
        else:
            stack.append(node.right)
            stack.append(node.left)
    return total


def _leaf_term(counts: tuple[int, ...], alpha: float) -> float:
    if alpha == 0.0:
        return _entropy(np.asarray(counts, dtype=float))
    total = sum(counts)
    denom = total + alpha * len(counts)
    return -sum(c * math.log((c + alpha) / denom) for c in counts if c > 0)


def tree_to_json_dict(tree: DecisionTree) -> dict:
    """Flat node-array dump (root at index 0) for inspection and debugging."""
    nodes = []
    index: dict[int, int] = {}
    stack = [tree.root]
    ordered: list[TreeNode] = []
    while stack:
        node = stack.pop()
        index[id(node)] = len(ordered)
        ordered.append(node)
        if not node.is_leaf:
            stack.append(node.right)
            stack.append(node.left)
    for node in ordered:
        nodes.append(
            {
                "counts": list(node.counts),
                "split_variable": node.split_variable,
                "split_state": node.split_state,
                "left": index[id(node.left)] if node.left is not None else None,
                "right": index[id(node.right)] if node.right is not None else None,
            }
        )
    return {
        "target": tree.target,
        "allowed": sorted(tree.allowed),
        "threshold": tree.threshold,
        "num_rows": tree.num_rows,
        "used": sorted(used_variables(tree)),
        "score": score(tree),
        "nodes": nodes,
    }


def dump_tree(tree: DecisionTree, path: str | Path) -> None:
    Path(path).write_text(json.dumps(tree_to_json_dict(tree), indent=2) + "\n")
