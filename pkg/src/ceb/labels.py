"""Boundary label assignment from a ground-truth matching result.

Every boundary whose two regions lie inside one selected candidate is a false
boundary (it separates parts of the same instance); every other boundary is
true.  Selected candidates are region-disjoint, so at most one of them can
contain a given edge.
"""

from __future__ import annotations

from .matching import MatchingResult
from .region_graph import RegionGraph

BoundaryLabeling = dict[tuple[int, int], bool]  # True = true boundary


def assign_labels(result: MatchingResult, candidates, graph: RegionGraph) -> BoundaryLabeling:
    """Label every edge of the graph from the selected candidates."""
    selected = [candidates[j] for _i, j in result.flows]
    labeling: BoundaryLabeling = {}
    for a, b in sorted(graph.edges):
        internal = any(a in cand and b in cand for cand in selected)
        labeling[(a, b)] = not internal
    return labeling
