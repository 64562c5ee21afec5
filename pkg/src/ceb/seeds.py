"""Instance candidate forest over probability thresholds, and seed extraction.

Probability values above 0.50 are quantized into bins of width ``step``; each
occupied bin contributes one threshold (the bin's lower edge).  Thresholding
the map at each value, in ascending order, yields nested connected components
that form a forest; the leaf components are the local-maximum plateaus and
become watershed seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .raster_io import ProbMap

# Guards float jitter when a value sits on a bin edge; expressed in bin units.
_BIN_EPS = 1e-9

_STRUCT_8 = np.ones((3, 3), dtype=bool)
_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def _structure(connectivity: int):
    if connectivity == 8:
        return _STRUCT_8
    if connectivity == 4:
        return _STRUCT_4
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


@dataclass(frozen=True)
class ThresholdList:
    """Ascending quantized threshold values, all strictly above 0.50."""

    values: tuple[float, ...]
    step: float


@dataclass(frozen=True)
class ForestNode:
    node_id: int
    level: int        # index into the threshold list
    threshold: float
    area: int
    anchor: tuple[int, int]  # first pixel in scan order


@dataclass
class CandidateForest:
    """Nested thresholded components; parent maps each node to its enclosing one."""

    shape: tuple[int, int]
    thresholds: tuple[float, ...]
    nodes: list[ForestNode]
    parent: dict[int, int]
    _level_grids: list[np.ndarray] = field(repr=False, default_factory=list)
    _level_nodes: list[dict[int, int]] = field(repr=False, default_factory=list)

    def pixels(self, node_id: int) -> frozenset[tuple[int, int]]:
        node = self.nodes[node_id]
        grid = self._level_grids[node.level]
        comp = None
        for label, nid in self._level_nodes[node.level].items():
            if nid == node_id:
                comp = label
                break
        ys, xs = np.nonzero(grid == comp)
        return frozenset(zip(xs.tolist(), ys.tolist()))

    def leaves(self) -> list[int]:
        parents = set(self.parent.values())
        return [n.node_id for n in self.nodes if n.node_id not in parents]


@dataclass(frozen=True)
class SeedSet:
    """Disjoint seed pixel sets keyed by positive seed id."""

    seeds: dict[int, frozenset[tuple[int, int]]]

    def __len__(self) -> int:
        return len(self.seeds)


def build_threshold_list(prob: ProbMap, step: float = 1.0 / 255.0) -> ThresholdList:
    """Quantize the map's distinct values above 0.50 into bins of width ``step``."""
    if not 0.0 < step <= 0.1:
        raise ValueError(f"quantization step must be in (0, 0.1], got {step}")
    vals = np.unique(prob.values).astype(np.float64)
    bins = np.floor(vals / step + _BIN_EPS).astype(np.int64)
    half_bin = int(np.floor(0.5 / step + _BIN_EPS))
    kept = sorted({int(b) for b in bins if b > half_bin})
    return ThresholdList(tuple(b * step for b in kept), step)


def _pixel_bins(prob: ProbMap, step: float) -> np.ndarray:
    return np.floor(prob.values.astype(np.float64) / step + _BIN_EPS).astype(np.int64)


def build_forest(prob: ProbMap, thresholds: ThresholdList, connectivity: int = 8) -> CandidateForest:
    """Label the components above each threshold and link them into a forest.

    The component set at a threshold is nested inside the previous (lower)
    threshold's components, so each node at level h > 0 has exactly one parent
    at level h-1.
    """
    if not thresholds.values:
        raise ValueError("threshold list is empty (no foreground)")
    structure = _structure(connectivity)
    bins = _pixel_bins(prob, thresholds.step)
    height, width = prob.shape

    nodes: list[ForestNode] = []
    parent: dict[int, int] = {}
    level_grids: list[np.ndarray] = []
    level_nodes: list[dict[int, int]] = []

    for level, value in enumerate(thresholds.values):
        tbin = int(round(value / thresholds.step))
        mask = bins >= tbin
        grid, count = ndimage.label(mask, structure=structure)
        flat = grid.ravel()
        areas = np.bincount(flat, minlength=count + 1)
        labels_present, first_idx = np.unique(flat, return_index=True)
        first_of = dict(zip(labels_present.tolist(), first_idx.tolist()))
        node_of: dict[int, int] = {}
        for comp in range(1, count + 1):
            idx = first_of[comp]
            anchor = (int(idx % width), int(idx // width))
            node_id = len(nodes)
            nodes.append(ForestNode(node_id, level, value, int(areas[comp]), anchor))
            node_of[comp] = node_id
            if level > 0:
                prev_comp = int(level_grids[level - 1][anchor[1], anchor[0]])
                parent[node_id] = level_nodes[level - 1][prev_comp]
        level_grids.append(grid)
        level_nodes.append(node_of)

    return CandidateForest((height, width), thresholds.values, nodes, parent,
                           level_grids, level_nodes)


def extract_seeds(forest: CandidateForest, min_area: int = 3) -> SeedSet:
    """One seed per leaf node with area >= min_area, ids 1..n in scan order."""
    leaves = [forest.nodes[i] for i in forest.leaves() if forest.nodes[i].area >= min_area]
    leaves.sort(key=lambda n: (n.anchor[1], n.anchor[0]))
    seeds = {i + 1: forest.pixels(n.node_id) for i, n in enumerate(leaves)}
    return SeedSet(seeds)
