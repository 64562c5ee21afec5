"""Single-frame orchestration: seeds -> flood -> graph -> signatures -> merge.

Inference never enumerates candidate subgraphs: boundary scores are binarized
and regions connected by false boundaries are merged into instances.  Training
label generation does enumerate candidates and solves the ground-truth
matching model; components whose enumeration exceeds the configured caps are
skipped (their boundaries are excluded from training rather than approximated).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import labels as labels_mod
from . import matching, region_graph, seeds as seeds_mod, signature, watershed
from .classifier import OracleScorer, binarize
from .errors import CapacityError
from .gridutil import set_iou, top_left
from .raster_io import LabelMap, ProbMap

log = logging.getLogger(__name__)

Pixel = tuple[int, int]


@dataclass(frozen=True)
class PipelineConfig:
    delta: float = 1.0 / 255.0          # threshold quantization step
    min_area: int = 3                   # smallest leaf kept as a seed
    connectivity: int = 8
    foreground_threshold: float = 0.5
    canvas_side: int = 64
    branch_length: int = 20
    theta: float = 0.5                  # boundary score binarization threshold
    max_nodes: int = 20
    max_candidates: int = 100_000
    node_budget: int = matching.DEFAULT_NODE_BUDGET
    mode: str = "ceb"                   # "ceb" or "ceb_wo_cls"
    rim: str = "probability"            # or "unassigned"

    def __post_init__(self):
        if self.mode not in ("ceb", "ceb_wo_cls"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.rim not in ("probability", "unassigned"):
            raise ValueError(f"unknown rim policy {self.rim!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")


@dataclass
class FrameArtifacts:
    """Everything the per-frame stages produce, reusable across modes."""

    prob: ProbMap
    frame: int
    foreground: frozenset
    seed_set: seeds_mod.SeedSet
    regions: dict
    boundaries: dict
    graph: region_graph.RegionGraph
    records: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.regions


def analyze_frame(prob: ProbMap, cfg: PipelineConfig | None = None,
                  frame_index: int = 0) -> FrameArtifacts:
    """Run seeds, flood, graph, and signature extraction for one frame."""
    cfg = cfg or PipelineConfig()
    ys, xs = np.nonzero(prob.values >= cfg.foreground_threshold)
    foreground = frozenset(zip(xs.tolist(), ys.tolist()))
    thresholds = seeds_mod.build_threshold_list(prob, cfg.delta)
    if not thresholds.values or not foreground:
        return FrameArtifacts(prob, frame_index, foreground, seeds_mod.SeedSet({}),
                              {}, {}, region_graph.build_graph({}, {}))
    forest = seeds_mod.build_forest(prob, thresholds, cfg.connectivity)
    seed_set = seeds_mod.extract_seeds(forest, cfg.min_area)
    if not seed_set.seeds:
        return FrameArtifacts(prob, frame_index, foreground, seed_set,
                              {}, {}, region_graph.build_graph({}, {}))
    regions, boundaries = watershed.flood(prob, foreground, seed_set, cfg.connectivity)
    graph = region_graph.build_graph(regions, boundaries)
    records = signature.extract_all(regions, boundaries, foreground, prob.shape,
                                    canvas_side=cfg.canvas_side,
                                    branch_length=cfg.branch_length,
                                    frame=frame_index)
    return FrameArtifacts(prob, frame_index, foreground, seed_set,
                          regions, boundaries, graph, records)


def score_records(records, scorer) -> dict:
    """Boundary-key -> score for one frame's signature records."""
    return {rec.boundary_key: float(scorer.score(rec)) for rec in records}


def groups_from_labels(graph: region_graph.RegionGraph, labeling) -> list[frozenset[int]]:
    """Merge regions over false boundaries; each connected group is one instance."""
    parent = {node: node for node in graph.nodes()}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for key, is_true in sorted(labeling.items()):
        if not is_true:
            a, b = find(key[0]), find(key[1])
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, set[int]] = {}
    for node in graph.nodes():
        groups.setdefault(find(node), set()).add(node)
    return [frozenset(groups[root]) for root in sorted(groups)]


def materialize(instances, artifacts: FrameArtifacts, cfg: PipelineConfig) -> LabelMap:
    """Render instances (sets of region ids) into a label map.

    Instance ids follow the scan order of each core mask's top-left pixel.
    Boundary pixels between two different instances (rim pixels) go to the
    adjacent instance whose core mask has the higher mean probability, ties to
    the lower id; the "unassigned" policy leaves them background.
    """
    height, width = artifacts.prob.shape
    grid = np.zeros((height, width), dtype=np.int32)
    if not instances:
        return LabelMap(grid)
    masks = [region_graph.candidate_mask(inst, artifacts.regions, artifacts.boundaries)
             for inst in instances]
    order = sorted(range(len(instances)), key=lambda i: top_left(masks[i]))
    instance_of: dict[int, int] = {}
    mean_prob: dict[int, float] = {}
    arr = artifacts.prob.values
    for new_id, idx in enumerate(order, start=1):
        for x, y in masks[idx]:
            grid[y, x] = new_id
        for region in instances[idx]:
            instance_of[region] = new_id
        mask = masks[idx]
        mean_prob[new_id] = float(sum(arr[y, x] for x, y in mask)) / len(mask)

    if cfg.rim == "probability":
        for (a, b), pixels in sorted(artifacts.boundaries.items()):
            ia, ib = instance_of.get(a), instance_of.get(b)
            sides = [i for i in (ia, ib) if i is not None]
            if not sides or ia == ib:
                continue
            if len(sides) == 1:
                winner = sides[0]
            elif mean_prob[ia] > mean_prob[ib]:
                winner = ia
            elif mean_prob[ib] > mean_prob[ia]:
                winner = ib
            else:
                winner = min(ia, ib)
            for x, y in pixels:
                if grid[y, x] == 0:
                    grid[y, x] = winner
    return LabelMap(grid)


def segment_frame(prob: ProbMap, scorer=None, cfg: PipelineConfig | None = None,
                  frame_index: int = 0) -> LabelMap:
    """Full single-frame segmentation with the given boundary scorer."""
    cfg = cfg or PipelineConfig()
    artifacts = analyze_frame(prob, cfg, frame_index)
    return segment_from_artifacts(artifacts, scorer, cfg)


def segment_from_artifacts(artifacts: FrameArtifacts, scorer,
                           cfg: PipelineConfig) -> LabelMap:
    if artifacts.empty:
        return LabelMap.zeros(*artifacts.prob.shape)
    if cfg.mode == "ceb_wo_cls":
        labeling = {key: True for key in artifacts.boundaries}
    else:
        if scorer is None:
            raise ValueError("mode 'ceb' requires a scorer")
        scores = score_records(artifacts.records, scorer)
        labeling = binarize(scores, cfg.theta)
    instances = groups_from_labels(artifacts.graph, labeling)
    return materialize(instances, artifacts, cfg)


def segment_frame_wo_cls(prob: ProbMap, cfg: PipelineConfig | None = None) -> LabelMap:
    """All boundaries treated as true: pure watershed-region instances."""
    cfg = cfg or PipelineConfig()
    if cfg.mode != "ceb_wo_cls":
        cfg = replace(cfg, mode="ceb_wo_cls")
    return segment_frame(prob, None, cfg)


def _enumerate_by_component(graph, cfg):
    """Candidates per component; oversized components are skipped with a warning."""
    candidates: list[frozenset[int]] = []
    skipped: list[tuple[int, ...]] = []
    for comp in region_graph.graph_components(graph):
        sub_areas = {n: graph.areas[n] for n in comp}
        sub_edges = {k: v for k, v in graph.edges.items() if k[0] in sub_areas}
        sub = region_graph.RegionGraph(
            sub_areas, sub_edges,
            {n: graph.adjacency[n] for n in comp})
        try:
            candidates.extend(region_graph.enumerate_candidates(
                sub, cfg.max_nodes, max(cfg.max_candidates - len(candidates), 0)))
        except CapacityError as exc:
            log.warning("skipping component %s for label generation: %s", comp[:4], exc)
            skipped.append(comp)
    candidates.sort(key=lambda c: tuple(sorted(c)))
    return candidates, skipped


def build_matching_model(prob: ProbMap, gt: LabelMap, cfg: PipelineConfig | None = None,
                         frame_index: int = 0):
    """The ground-truth matching model for one frame.

    Returns (gt_ids, candidates, region_map, score_matrix, artifacts, skipped).
    """
    cfg = cfg or PipelineConfig()
    if gt.shape != prob.shape:
        raise ValueError(f"ground truth {gt.shape} does not match probability map {prob.shape}")
    artifacts = analyze_frame(prob, cfg, frame_index)
    if artifacts.empty:
        empty = matching.ScoreMatrix.build((), (), {})
        return [], [], {}, empty, artifacts, []
    candidates, skipped = _enumerate_by_component(artifacts.graph, cfg)
    gt_instances = gt.instances()
    gt_ids = sorted(gt_instances)
    cand_masks = [region_graph.candidate_mask(c, artifacts.regions, artifacts.boundaries)
                  for c in candidates]
    entries = {}
    for gid in gt_ids:
        gpx = gt_instances[gid]
        for j, mask in enumerate(cand_masks):
            iou = set_iou(gpx, mask)
            if iou >= matching.MIN_MATCHABLE_IOU:
                entries[(gid, j)] = iou
    scores = matching.ScoreMatrix.build(gt_ids, range(len(candidates)), entries)
    region_map = region_graph.region_to_candidates(candidates)
    return gt_ids, candidates, region_map, scores, artifacts, skipped


def training_labels(prob: ProbMap, gt: LabelMap, cfg: PipelineConfig | None = None,
                    frame_index: int = 0):
    """Ground-truth-derived labels for every boundary of the frame.

    Returns (labeling, artifacts, skipped_components).  Boundaries in skipped
    components default to true; callers producing training data should drop
    them (make_training_set does).
    """
    cfg = cfg or PipelineConfig()
    gt_ids, candidates, region_map, scores, artifacts, skipped = \
        build_matching_model(prob, gt, cfg, frame_index)
    if artifacts.empty:
        return {}, artifacts, []
    result = matching.solve_gi(gt_ids, candidates, region_map, scores, cfg.node_budget)
    labeling = labels_mod.assign_labels(result, candidates, artifacts.graph)
    skipped_nodes = {n for comp in skipped for n in comp}
    for (a, b) in labeling:
        if a in skipped_nodes or b in skipped_nodes:
            labeling[(a, b)] = True
    return labeling, artifacts, skipped


def make_training_set(prob: ProbMap, gt: LabelMap, cfg: PipelineConfig | None = None,
                      frame_index: int = 0) -> list[signature.SignatureRecord]:
    """Labeled signature records for one (probability map, ground truth) pair."""
    cfg = cfg or PipelineConfig()
    labeling, artifacts, skipped = training_labels(prob, gt, cfg, frame_index)
    skipped_nodes = {n for comp in skipped for n in comp}
    records = []
    for rec in artifacts.records:
        a, b = rec.boundary_key
        if a in skipped_nodes or b in skipped_nodes:
            continue
        records.append(rec.with_label(labeling[rec.boundary_key]))
    return records


def oracle_scorer(prob: ProbMap, gt: LabelMap, cfg: PipelineConfig | None = None,
                  frame_index: int = 0) -> OracleScorer:
    """Ground-truth passthrough scorer for this frame's boundaries."""
    labeling, _artifacts, _skipped = training_labels(prob, gt, cfg, frame_index)
    return OracleScorer.for_frame(labeling, frame_index)
