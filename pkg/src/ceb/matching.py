"""Exact solvers for the three integer matching models.

All three models maximize a sum of IoU scores over binary flow variables:

* ground-truth-to-candidate matching -- each ground-truth instance matches at
  most one candidate, and each region may be covered by at most one selected
  candidate;
* selected-selected matching -- a plain one-to-one max-weight bipartite
  matching between the selected instances of two neighboring frames;
* selected-unselected matching -- neighbor-frame instances against candidate
  subgraphs, with the same per-region exclusivity as the first model.

A single depth-first branch-and-bound handles all of them: rows are assigned
in order, candidate columns carry a conflict set (the regions they cover, or
the column itself for one-to-one matching), and the upper bound adds each
remaining row's best available score.  Among equal-objective optima the flow
set that is lexicographically smallest (as a sorted pair list) is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .errors import CapacityError

# Pairs scoring below this IoU cannot affect a meaningful optimum; they are
# dropped from the model so degenerate one-pixel overlaps produce no flows.
MIN_MATCHABLE_IOU = 1e-6

_TIE_EPS = 1e-12
DEFAULT_NODE_BUDGET = 2_000_000


@dataclass(frozen=True)
class ScoreMatrix:
    """Sparse IoU scores between left-side ids (rows) and right-side ids (cols)."""

    rows: tuple
    cols: tuple
    scores: Mapping

    def __post_init__(self):
        rows, cols = set(self.rows), set(self.cols)
        for (i, j), s in self.scores.items():
            if i not in rows or j not in cols:
                raise ValueError(f"score entry ({i}, {j}) outside the declared rows/cols")
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"score {s} for ({i}, {j}) outside [0, 1]")

    @classmethod
    def build(cls, rows, cols, entries: Mapping, min_score: float = MIN_MATCHABLE_IOU):
        """Keep only entries at or above min_score; absent pairs are never matched."""
        kept = {k: float(v) for k, v in entries.items() if v >= min_score}
        return cls(tuple(rows), tuple(cols), kept)


@dataclass(frozen=True)
class MatchingResult:
    flows: tuple[tuple, ...]  # sorted (row, col) pairs
    objective: float


def _search(row_ids, row_options, node_budget) -> tuple[tuple, ...]:
    """Exhaustive DFS with a per-row best-score bound.

    row_options[k] lists (col, score, conflicts) for row k, sorted by
    descending score then ascending col; skipping the row is always allowed.
    """
    n = len(row_ids)
    suffix = [0.0] * (n + 1)
    for k in range(n - 1, -1, -1):
        best_here = row_options[k][0][1] if row_options[k] else 0.0
        suffix[k] = suffix[k + 1] + best_here

    best_obj = -1.0
    best_flows: tuple = ()
    used: set = set()
    flows: list = []
    visited = 0

    def rec(k: int, obj: float):
        nonlocal best_obj, best_flows, visited
        visited += 1
        if visited > node_budget:
            raise CapacityError(f"matching search exceeded its budget of {node_budget} nodes")
        if k == n:
            cand = tuple(sorted(flows))
            if obj > best_obj + _TIE_EPS or (obj > best_obj - _TIE_EPS and cand < best_flows):
                best_obj = obj
                best_flows = cand
            return
        if obj + suffix[k] < best_obj - _TIE_EPS:
            return
        for col, score, conflicts in row_options[k]:
            if not used.isdisjoint(conflicts):
                continue
            used.update(conflicts)
            flows.append((row_ids[k], col))
            rec(k + 1, obj + score)
            flows.pop()
            used.difference_update(conflicts)
        rec(k + 1, obj)

    rec(0, 0.0)
    return best_flows


def _solve(row_ids, col_conflicts, matrix: ScoreMatrix, node_budget) -> MatchingResult:
    by_row: dict = {i: [] for i in row_ids}
    for (i, j), s in matrix.scores.items():
        if i in by_row:
            by_row[i].append((j, s, col_conflicts[j]))
    row_options = []
    for i in row_ids:
        opts = sorted(by_row[i], key=lambda t: (-t[1], t[0]))
        row_options.append(opts)
    flows = _search(list(row_ids), row_options, node_budget)
    objective = math.fsum(matrix.scores[f] for f in flows)
    return MatchingResult(flows, objective)


def solve_gi(gt_ids, candidates, region_map, matrix: ScoreMatrix,
             node_budget: int = DEFAULT_NODE_BUDGET) -> MatchingResult:
    """Optimal matching of ground-truth instances onto candidate subgraphs.

    region_map must map every region referenced by the candidates to the index
    set of candidates containing it; selecting a candidate claims all of its
    regions, which enforces the one-selection-per-region constraint.
    """
    for idx, cand in enumerate(candidates):
        for region in cand:
            if idx not in region_map.get(region, frozenset()):
                raise ValueError(f"region map does not cover region {region} of candidate {idx}")
    conflicts = {j: frozenset(candidates[j]) for j in range(len(candidates))}
    rows = sorted(gt_ids)
    return _solve(rows, conflicts, matrix, node_budget)


def solve_sum(left_ids, candidates, region_map, matrix: ScoreMatrix,
              node_budget: int = DEFAULT_NODE_BUDGET) -> MatchingResult:
    """Neighbor-frame selected instances against not-yet-selected candidates."""
    return solve_gi(left_ids, candidates, region_map, matrix, node_budget)


def solve_ssm(left_ids, right_ids, matrix: ScoreMatrix,
              node_budget: int = DEFAULT_NODE_BUDGET) -> MatchingResult:
    """One-to-one max-weight matching between two selected-instance sets."""
    conflicts = {j: frozenset([j]) for j in right_ids}
    rows = sorted(left_ids)
    return _solve(rows, conflicts, matrix, node_budget)


def unmatched_left(left_ids, result: MatchingResult) -> list:
    """Left-side items that appear in no flow, in their original order."""
    matched = {i for i, _j in result.flows}
    return [i for i in left_ids if i not in matched]


def dump_model_lp(name: str, rows, region_map, matrix: ScoreMatrix) -> str:
    """Plain-text LP-style listing of a model, for external cross-checking."""
    lines = [f"\\* {name} *\\", "maximize"]
    terms = [f"{matrix.scores[(i, j)]:.9g} f_{i}_{j}"
             for (i, j) in sorted(matrix.scores)]
    lines.append("  obj: " + (" + ".join(terms) if terms else "0"))
    lines.append("subject to")
    for i in sorted(rows):
        cols = sorted(j for (ii, j) in matrix.scores if ii == i)
        if cols:
            lines.append(f"  row_{i}: " + " + ".join(f"f_{i}_{j}" for j in cols) + " <= 1")
    for region in sorted(region_map):
        terms = [f"f_{i}_{j}" for (i, j) in sorted(matrix.scores) if j in region_map[region]]
        if terms:
            lines.append(f"  region_{region}: " + " + ".join(terms) + " <= 1")
    lines.append("binary")
    lines.append("  " + " ".join(f"f_{i}_{j}" for (i, j) in sorted(matrix.scores)))
    lines.append("end")
    return "\n".join(lines) + "\n"
