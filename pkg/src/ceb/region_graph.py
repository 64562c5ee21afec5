"""Region adjacency graph and connected-subgraph instance candidates."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CapacityError

Pixel = tuple[int, int]
EdgeKey = tuple[int, int]


@dataclass(frozen=True)
class RegionGraph:
    """Undirected graph: one node per region, one edge per boundary key."""

    areas: dict[int, int]                      # node -> pixel count
    edges: dict[EdgeKey, int]                  # (i, j) with i < j -> boundary pixel count
    adjacency: dict[int, tuple[int, ...]]      # node -> sorted neighbor nodes

    def nodes(self) -> list[int]:
        return sorted(self.areas)

    def edge_keys(self, node: int) -> list[EdgeKey]:
        return [(node, n) if node < n else (n, node) for n in self.adjacency[node]]


def build_graph(regions, boundaries) -> RegionGraph:
    """Build the graph from flood outputs; dangling boundary keys are rejected."""
    areas = {int(rid): len(pixels) for rid, pixels in regions.items()}
    edges: dict[EdgeKey, int] = {}
    adjacency: dict[int, set[int]] = {rid: set() for rid in areas}
    for key, pixels in boundaries.items():
        a, b = int(key[0]), int(key[1])
        if a == b:
            raise ValueError(f"boundary key {key} is a self-loop")
        if a > b:
            a, b = b, a
        if a not in areas or b not in areas:
            raise ValueError(f"boundary key {key} references a missing region")
        if (a, b) in edges:
            raise ValueError(f"duplicate boundary key {key}")
        edges[(a, b)] = len(pixels)
        adjacency[a].add(b)
        adjacency[b].add(a)
    return RegionGraph(areas, edges, {n: tuple(sorted(s)) for n, s in adjacency.items()})


def graph_components(graph: RegionGraph) -> list[tuple[int, ...]]:
    """Connected components as sorted node tuples, ordered by smallest node."""
    seen: set[int] = set()
    comps = []
    for start in graph.nodes():
        if start in seen:
            continue
        stack = [start]
        seen.add(start)
        comp = {start}
        while stack:
            node = stack.pop()
            for nb in graph.adjacency[node]:
                if nb not in seen:
                    seen.add(nb)
                    comp.add(nb)
                    stack.append(nb)
        comps.append(tuple(sorted(comp)))
    return comps


def _component_subsets(adjacency, comp, emit):
    """Emit every connected vertex subset of the component exactly once.

    Each subset is generated from its minimum vertex by expanding with the
    exclusive neighborhood rule, so no subset is produced twice.
    """
    for root in comp:
        initial_ext = [u for u in adjacency[root] if u > root]

        def grow(sub: frozenset, ext: list[int], seen: frozenset):
            emit(sub)
            ext = list(ext)
            while ext:
                w = ext.pop(0)
                fresh = [u for u in adjacency[w] if u > root and u not in seen]
                grow(sub | {w}, ext + fresh, seen | set(fresh))

        grow(frozenset([root]), initial_ext, frozenset([root, *initial_ext]))


def enumerate_candidates(graph: RegionGraph, max_nodes: int = 20,
                         max_candidates: int = 100_000) -> list[frozenset[int]]:
    """All connected node subsets per component, in lexicographic order.

    Raises CapacityError when a component has more than max_nodes nodes or the
    total output would exceed max_candidates.
    """
    out: list[frozenset[int]] = []
    for comp in graph_components(graph):
        if len(comp) > max_nodes:
            raise CapacityError(
                f"component containing region {comp[0]} has {len(comp)} nodes "
                f"(cap {max_nodes})")

        def emit(sub: frozenset):
            if len(out) >= max_candidates:
                raise CapacityError(f"candidate enumeration exceeds cap {max_candidates}")
            out.append(sub)

        _component_subsets(graph.adjacency, comp, emit)
    out.sort(key=lambda s: tuple(sorted(s)))
    return out


def candidates_containing(region: int, candidates) -> frozenset[int]:
    """Indices of the candidates that contain the region."""
    hits = frozenset(i for i, c in enumerate(candidates) if region in c)
    if not hits:
        raise ValueError(f"region {region} appears in no candidate")
    return hits


def region_to_candidates(candidates) -> dict[int, frozenset[int]]:
    """The full region -> candidate-index map used by the matching constraints."""
    out: dict[int, set[int]] = {}
    for i, cand in enumerate(candidates):
        for region in cand:
            out.setdefault(region, set()).add(i)
    return {r: frozenset(s) for r, s in out.items()}


def candidate_mask(region_ids, regions, boundaries) -> set[Pixel]:
    """Pixel realization of a candidate: member regions plus internal boundaries.

    A boundary is internal when both of its regions belong to the candidate;
    boundary pixels on the candidate's outer rim are excluded.
    """
    ids = set(region_ids)
    mask: set[Pixel] = set()
    for rid in ids:
        mask |= regions[rid]
    for (a, b), pixels in boundaries.items():
        if a in ids and b in ids:
            mask |= pixels
    return mask
