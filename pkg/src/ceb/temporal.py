"""Temporal consistency across video frames via iterative matching and selection.

Per frame, boundary scores split edges into false (below a low threshold),
true (above a high threshold), and uncertain.  False edges are contracted,
true edges removed, and regions left isolated become the initial selected
instances.  Each iteration then matches neighbor frames' selected instances
against a frame's selected set (selected-selected matching); neighbors left
unmatched try to claim not-yet-selected candidates (selected-unselected
matching).  When both neighbors propose candidates for the same connected
component of the reduced graph, the direction with the larger summed matching
score wins, ties going to the earlier frame.  First/last frames follow their
only neighbor.  After a fixed number of iterations, the surviving uncertain
edges are binarized at the ordinary threshold and the remaining regions merge
into the final instances.

All frames update synchronously from the same iteration's states; a sweep
schedule (ascending frame order, reading already-updated earlier frames) is
available for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import matching, pipeline, region_graph
from .raster_io import LabelMap


@dataclass(frozen=True)
class TemporalConfig:
    sigma1: float = 0.1        # scores below: false boundary
    sigma2: float = 0.9        # scores above: true boundary
    iterations: int = 10
    schedule: str = "synchronous"  # or "sweep"
    debug_checks: bool = True

    def __post_init__(self):
        if not 0.0 <= self.sigma1 <= self.sigma2 <= 1.0:
            raise ValueError("need 0 <= sigma1 <= sigma2 <= 1")
        if self.iterations < 0:
            raise ValueError("iteration count must be >= 0")
        if self.schedule not in ("synchronous", "sweep"):
            raise ValueError(f"unknown schedule {self.schedule!r}")


class FrameContext:
    """Per-frame immutable inputs: watershed outputs, scores, and mask cache."""

    def __init__(self, regions, boundaries, graph, scores, prob, frame: int):
        self.regions = regions
        self.boundaries = boundaries
        self.graph = graph
        self.scores = dict(scores)
        self.prob = prob
        self.frame = frame
        self._masks: dict[frozenset, frozenset] = {}

    @classmethod
    def from_artifacts(cls, artifacts: pipeline.FrameArtifacts, scores) -> "FrameContext":
        return cls(artifacts.regions, artifacts.boundaries, artifacts.graph,
                   scores, artifacts.prob, artifacts.frame)

    def mask(self, region_ids: frozenset) -> frozenset:
        cached = self._masks.get(region_ids)
        if cached is None:
            cached = frozenset(region_graph.candidate_mask(
                region_ids, self.regions, self.boundaries))
            self._masks[region_ids] = cached
        return cached


@dataclass(frozen=True)
class FrameState:
    """Selected instances plus the reduced graph of a frame at one iteration."""

    frame: int
    selected: tuple[frozenset, ...]            # instances as original region-id sets
    supernodes: dict[int, frozenset]           # node id (min member) -> region ids
    edges: dict[tuple[int, int], tuple]        # supernode pair -> uncertain boundary keys
    candidates: tuple[frozenset, ...]          # connected supernode subsets
    false_keys: frozenset
    true_keys: frozenset
    uncertain_keys: frozenset

    def instance_regions(self, candidate: frozenset) -> frozenset:
        out: set[int] = set()
        for sn in candidate:
            out |= self.supernodes[sn]
        return frozenset(out)


def _union_find_groups(nodes, pairs):
    parent = {n: n for n in nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in sorted(pairs):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, set] = {}
    for n in nodes:
        groups.setdefault(find(n), set()).add(n)
    return [frozenset(groups[r]) for r in sorted(groups)]


def _enumerate_supernode_candidates(supernodes, edges, cfg) -> tuple[frozenset, ...]:
    if not supernodes:
        return ()
    areas = {sn: len(members) for sn, members in supernodes.items()}
    counts = {key: len(keys) for key, keys in edges.items()}
    adjacency: dict[int, set[int]] = {sn: set() for sn in supernodes}
    for a, b in edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    graph = region_graph.RegionGraph(areas, counts,
                                     {n: tuple(sorted(s)) for n, s in adjacency.items()})
    return tuple(region_graph.enumerate_candidates(graph, cfg.max_nodes, cfg.max_candidates))


def init_state(ctx: FrameContext, tcfg: TemporalConfig,
               cfg: pipeline.PipelineConfig) -> FrameState:
    """Contract false edges, drop true edges, select isolated region groups."""
    for key in ctx.graph.edges:
        if key not in ctx.scores:
            raise ValueError(f"no score for boundary {key} in frame {ctx.frame}")
    false_keys = frozenset(k for k in ctx.graph.edges if ctx.scores[k] < tcfg.sigma1)
    true_keys = frozenset(k for k in ctx.graph.edges if ctx.scores[k] > tcfg.sigma2)
    uncertain = frozenset(ctx.graph.edges) - false_keys - true_keys

    groups = _union_find_groups(ctx.graph.nodes(), false_keys)
    node_of = {}
    supernodes = {}
    for group in groups:
        sn = min(group)
        supernodes[sn] = group
        for member in group:
            node_of[member] = sn

    edges: dict[tuple[int, int], list] = {}
    for key in sorted(uncertain):
        a, b = node_of[key[0]], node_of[key[1]]
        if a == b:
            continue  # uncertain edge swallowed by a false-merged group
        pair = (a, b) if a < b else (b, a)
        edges.setdefault(pair, []).append(key)

    incident = {sn: 0 for sn in supernodes}
    for a, b in edges:
        incident[a] += 1
        incident[b] += 1
    selected = tuple(supernodes[sn] for sn in sorted(supernodes) if incident[sn] == 0)
    remaining = {sn: members for sn, members in supernodes.items() if incident[sn] > 0}
    candidates = _enumerate_supernode_candidates(remaining,
                                                 {k: tuple(v) for k, v in edges.items()},
                                                 cfg)
    return FrameState(ctx.frame, selected, remaining,
                      {k: tuple(v) for k, v in edges.items()}, candidates,
                      false_keys, true_keys, uncertain)


def _iou_entries(left_masks, right_masks):
    entries = {}
    for i, lm in enumerate(left_masks):
        for j, rm in enumerate(right_masks):
            inter = len(lm & rm)
            if inter:
                entries[(i, j)] = inter / (len(lm) + len(rm) - inter)
    return entries


def _direction_flows(states, ctxs, w: int, v: int):
    """Neighbor frame v proposes candidates of frame w; returns (flows, scores)."""
    st = states[w]
    neighbor = states[v]
    if not neighbor.selected or not st.candidates:
        return [], {}
    left_masks = [ctxs[v].mask(inst) for inst in neighbor.selected]
    right_masks = [ctxs[w].mask(inst) for inst in st.selected]

    left_ids = list(range(len(left_masks)))
    occupied: set[int] = set()
    if right_masks:
        ssm_entries = _iou_entries(left_masks, right_masks)
        ssm_matrix = matching.ScoreMatrix.build(left_ids, list(range(len(right_masks))),
                                                ssm_entries)
        ssm = matching.solve_ssm(left_ids, list(range(len(right_masks))), ssm_matrix)
        occupied = {i for i, _j in ssm.flows}
    free = [i for i in left_ids if i not in occupied]
    if not free:
        return [], {}

    cand_masks = [ctxs[w].mask(st.instance_regions(c)) for c in st.candidates]
    entries = {}
    for i in free:
        lm = left_masks[i]
        for j, cm in enumerate(cand_masks):
            inter = len(lm & cm)
            if inter:
                entries[(i, j)] = inter / (len(lm) + len(cm) - inter)
    matrix = matching.ScoreMatrix.build(free, list(range(len(st.candidates))), entries)
    region_map = region_graph.region_to_candidates(st.candidates)
    result = matching.solve_sum(free, st.candidates, region_map, matrix)
    return list(result.flows), dict(matrix.scores)


def _component_of_candidates(state: FrameState) -> dict[int, int]:
    groups = _union_find_groups(sorted(state.supernodes), state.edges.keys())
    comp_of_sn = {}
    for group in groups:
        root = min(group)
        for sn in group:
            comp_of_sn[sn] = root
    return {j: comp_of_sn[min(cand)] for j, cand in enumerate(state.candidates)}


def _frame_delta(states, ctxs, w: int) -> list[int]:
    """Candidate indices of frame w selected this iteration."""
    st = states[w]
    if not st.candidates:
        return []
    last = len(states) - 1
    prev_flows, prev_scores = _direction_flows(states, ctxs, w, w - 1) if w > 0 else ([], {})
    next_flows, next_scores = _direction_flows(states, ctxs, w, w + 1) if w < last else ([], {})

    if w == 0:
        winning = [j for _i, j in next_flows]
    elif w == last:
        winning = [j for _i, j in prev_flows]
    else:
        comp_of = _component_of_candidates(st)
        prev_sum: dict[int, float] = {}
        next_sum: dict[int, float] = {}
        for i, j in prev_flows:
            comp = comp_of[j]
            prev_sum[comp] = prev_sum.get(comp, 0.0) + prev_scores[(i, j)]
        for i, j in next_flows:
            comp = comp_of[j]
            next_sum[comp] = next_sum.get(comp, 0.0) + next_scores[(i, j)]
        winning = []
        for comp in sorted(set(prev_sum) | set(next_sum)):
            use_prev = prev_sum.get(comp, 0.0) >= next_sum.get(comp, 0.0)
            flows = prev_flows if use_prev else next_flows
            winning.extend(j for _i, j in flows if comp_of[j] == comp)
    return sorted(set(winning))


def _apply_delta(state: FrameState, chosen: list[int], cfg) -> FrameState:
    if not chosen:
        return state
    new_instances = []
    used_sns: set[int] = set()
    for j in chosen:
        cand = state.candidates[j]
        if used_sns & cand:
            raise AssertionError("two selected candidates share a region group")
        used_sns |= cand
        new_instances.append(state.instance_regions(cand))
    new_instances.sort(key=min)
    supernodes = {sn: m for sn, m in state.supernodes.items() if sn not in used_sns}
    edges = {pair: keys for pair, keys in state.edges.items()
             if pair[0] not in used_sns and pair[1] not in used_sns}
    candidates = _enumerate_supernode_candidates(supernodes, edges, cfg)
    return FrameState(state.frame, state.selected + tuple(new_instances),
                      supernodes, edges, candidates,
                      state.false_keys, state.true_keys, state.uncertain_keys)


def _check_invariants(before: FrameState, after: FrameState, ctx: FrameContext) -> None:
    # monotone selection
    assert set(before.selected) <= set(after.selected)
    # no region selected twice
    seen: set[int] = set()
    for inst in after.selected:
        assert not (seen & inst), "region selected in two instances"
        seen |= inst
    # selected plus remaining supernodes partition the frame's regions
    remaining = {r for members in after.supernodes.values() for r in members}
    assert not (seen & remaining)
    assert seen | remaining == set(ctx.graph.nodes())


def iterate(states, ctxs, tcfg: TemporalConfig, cfg: pipeline.PipelineConfig):
    """One matching-and-selection round over all frames."""
    if tcfg.schedule == "synchronous":
        deltas = [_frame_delta(states, ctxs, w) for w in range(len(states))]
        new_states = [_apply_delta(st, d, cfg) for st, d in zip(states, deltas)]
    else:  # sweep: frames read already-updated earlier neighbors
        new_states = list(states)
        for w in range(len(states)):
            delta = _frame_delta(new_states, ctxs, w)
            new_states[w] = _apply_delta(new_states[w], delta, cfg)
    if tcfg.debug_checks:
        for before, after, ctx in zip(states, new_states, ctxs):
            _check_invariants(before, after, ctx)
    return new_states


def final_selection(state: FrameState, ctx: FrameContext,
                    theta: float = 0.5) -> list[frozenset]:
    """Binarize leftover uncertain edges and merge the remaining region groups."""
    merge_pairs = []
    for pair, keys in state.edges.items():
        if any(ctx.scores[k] < theta for k in keys):
            merge_pairs.append(pair)
    leftovers = []
    if state.supernodes:
        for group in _union_find_groups(sorted(state.supernodes), merge_pairs):
            members: set[int] = set()
            for sn in group:
                members |= state.supernodes[sn]
            leftovers.append(frozenset(members))
    leftovers.sort(key=min)
    return list(state.selected) + leftovers


def run_temporal(ctxs, cfg: pipeline.PipelineConfig, tcfg: TemporalConfig,
                 trace: list | None = None) -> list[list[frozenset]]:
    """Initialize, iterate, and finalize; returns per-frame instance lists."""
    states = [init_state(ctx, tcfg, cfg) for ctx in ctxs]
    if trace is not None:
        trace.append(states)
    for _t in range(tcfg.iterations):
        states = iterate(states, ctxs, tcfg, cfg)
        if trace is not None:
            trace.append(states)
    return [final_selection(st, ctx, cfg.theta) for st, ctx in zip(states, ctxs)]


def segment_video(frames, scorer, cfg: pipeline.PipelineConfig | None = None,
                  tcfg: TemporalConfig | None = None,
                  trace: list | None = None) -> list[LabelMap]:
    """Per-frame stages plus the temporal rounds; one label map per frame."""
    if not frames:
        raise ValueError("need at least one frame")
    cfg = cfg or pipeline.PipelineConfig()
    tcfg = tcfg or TemporalConfig()
    artifacts = [pipeline.analyze_frame(f, cfg, w) for w, f in enumerate(frames)]
    ctxs = [FrameContext.from_artifacts(a, pipeline.score_records(a.records, scorer))
            for a in artifacts]
    finals = run_temporal(ctxs, cfg, tcfg, trace)
    return [pipeline.materialize(instances, art, cfg)
            for instances, art in zip(finals, artifacts)]
