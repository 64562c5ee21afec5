"""Instance segmentation metrics and a synthetic probability-map generator.

F1 and AP use one-to-one matching of predictions to ground truth by descending
IoU with a strict 0.5 threshold for a true positive.  AJI pairs ground truth
instances with predictions one-to-one by descending IoU (no threshold) and
divides aggregated intersection by aggregated union plus leftover prediction
area; each prediction is usable once.

The generator places non-overlapping probability disks, blurs them, adds
noise, and (for videos) drifts the cell centers while keeping ids stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import matching
from .raster_io import LabelMap, ProbMap


@dataclass(frozen=True)
class MetricsReport:
    f1: float
    aji: float
    ap: float
    tp: int
    fp: int
    fn: int
    n_gt: int
    n_pred: int
    frames: tuple["MetricsReport", ...] = field(default=())

    def as_row(self) -> dict:
        return {"f1": self.f1, "aji": self.aji, "ap": self.ap,
                "tp": self.tp, "fp": self.fp, "fn": self.fn,
                "n_gt": self.n_gt, "n_pred": self.n_pred}


def _overlap_table(gt: np.ndarray, pred: np.ndarray):
    g = gt.ravel().astype(np.int64)
    p = pred.ravel().astype(np.int64)
    gt_areas = {int(i): int(a) for i, a in enumerate(np.bincount(g)) if i > 0 and a > 0}
    pred_areas = {int(i): int(a) for i, a in enumerate(np.bincount(p)) if i > 0 and a > 0}
    both = (g > 0) & (p > 0)
    inter: dict[tuple[int, int], int] = {}
    if both.any():
        stride = p.max() + 1
        codes = g[both] * stride + p[both]
        uniq, counts = np.unique(codes, return_counts=True)
        for code, count in zip(uniq.tolist(), counts.tolist()):
            inter[(int(code // stride), int(code % stride))] = int(count)
    return gt_areas, pred_areas, inter


def _iou_of(pair, gt_areas, pred_areas, inter):
    i = inter.get(pair, 0)
    if i == 0:
        return 0.0
    gi, pj = pair
    return i / (gt_areas[gi] + pred_areas[pj] - i)


def evaluate(pred: LabelMap, gt: LabelMap, match: str = "greedy") -> MetricsReport:
    """Score a prediction against ground truth (same dimensions required)."""
    if pred.shape != gt.shape:
        raise ValueError(f"dimension mismatch: pred {pred.shape} vs gt {gt.shape}")
    gt_areas, pred_areas, inter = _overlap_table(gt.labels, pred.labels)
    tp_pairs = _match_pairs(gt_areas, pred_areas, inter, match)
    tp = len(tp_pairs)
    fp = len(pred_areas) - tp
    fn = len(gt_areas) - tp
    f1 = 2 * tp / (2 * tp + fp + fn) if (tp + fp + fn) else 1.0
    ap = tp / (tp + fp + fn) if (tp + fp + fn) else 1.0

    aji_num, aji_den = _aji_sums(gt_areas, pred_areas, inter)
    aji = aji_num / aji_den if aji_den else 1.0
    return MetricsReport(f1, aji, ap, tp, fp, fn, len(gt_areas), len(pred_areas))


def _match_pairs(gt_areas, pred_areas, inter, match: str):
    eligible = [(pair, _iou_of(pair, gt_areas, pred_areas, inter))
                for pair in inter]
    eligible = [(pair, iou) for pair, iou in eligible if iou > 0.5]
    if match == "greedy":
        eligible.sort(key=lambda t: (-t[1], -inter[t[0]], t[0]))
        used_gt: set[int] = set()
        used_pred: set[int] = set()
        pairs = []
        for (gi, pj), _iou in eligible:
            if gi in used_gt or pj in used_pred:
                continue
            used_gt.add(gi)
            used_pred.add(pj)
            pairs.append((gi, pj))
        return pairs
    if match == "optimal":
        # maximum-cardinality matching over IoU>0.5 pairs, via the SSM solver
        scores = matching.ScoreMatrix.build(sorted(gt_areas), sorted(pred_areas),
                                            {pair: 1.0 for pair, _ in eligible})
        result = matching.solve_ssm(sorted(gt_areas), sorted(pred_areas), scores)
        return list(result.flows)
    raise ValueError(f"unknown matching mode {match!r}")


def _aji_sums(gt_areas, pred_areas, inter):
    # Greedy one-to-one pairing by descending IoU.  Tie keys are label-free
    # (intersection, then areas) so relabeling instances cannot change the sums.
    def order(kv):
        (gi, pj), i = kv
        return (-_iou_of((gi, pj), gt_areas, pred_areas, inter),
                -i, -gt_areas[gi], -pred_areas[pj], gi, pj)

    used_gt: set[int] = set()
    used_pred: set[int] = set()
    num = 0
    den = 0
    for (gi, pj), i in sorted(inter.items(), key=order):
        if gi in used_gt or pj in used_pred:
            continue
        used_gt.add(gi)
        used_pred.add(pj)
        num += i
        den += gt_areas[gi] + pred_areas[pj] - i
    for gi in gt_areas:
        if gi not in used_gt:
            den += gt_areas[gi]
    for pj in pred_areas:
        if pj not in used_pred:
            den += pred_areas[pj]
    return num, den


def evaluate_video(preds, gts, match: str = "greedy") -> MetricsReport:
    """Aggregate counts over frames; AJI aggregates its numerator/denominator."""
    if len(preds) != len(gts):
        raise ValueError("prediction and ground-truth frame counts differ")
    frames = tuple(evaluate(p, g, match) for p, g in zip(preds, gts))
    tp = sum(f.tp for f in frames)
    fp = sum(f.fp for f in frames)
    fn = sum(f.fn for f in frames)
    num = 0
    den = 0
    for p, g in zip(preds, gts):
        ga, pa, inter = _overlap_table(g.labels, p.labels)
        n, d = _aji_sums(ga, pa, inter)
        num += n
        den += d
    f1 = 2 * tp / (2 * tp + fp + fn) if (tp + fp + fn) else 1.0
    ap = tp / (tp + fp + fn) if (tp + fp + fn) else 1.0
    aji = num / den if den else 1.0
    return MetricsReport(f1, aji, ap, tp, fp, fn,
                         sum(f.n_gt for f in frames), sum(f.n_pred for f in frames),
                         frames)


# ---------------------------------------------------------------------------
# Synthetic data


@dataclass(frozen=True)
class SynthSpec:
    size: int = 128
    cells: int = 12
    radius: tuple[int, int] = (6, 11)
    blur_sigma: float = 1.0
    noise: float = 0.06
    seed: int = 0
    frames: int = 1
    drift: int = 0
    min_gap: int = 2
    fg_level: float = 0.95
    bg_level: float = 0.05
    max_tries: int = 4000


def _place_cells(spec: SynthSpec, rng) -> list[tuple[int, int, int]]:
    cells: list[tuple[int, int, int]] = []
    tries = 0
    while len(cells) < spec.cells:
        tries += 1
        if tries > spec.max_tries:
            raise ValueError(f"could not place {spec.cells} cells after {spec.max_tries} tries")
        r = int(rng.integers(spec.radius[0], spec.radius[1] + 1))
        cx = int(rng.integers(r + 1, spec.size - r - 1))
        cy = int(rng.integers(r + 1, spec.size - r - 1))
        ok = all(math.hypot(cx - x, cy - y) >= r + cr + spec.min_gap
                 for x, y, cr in cells)
        if ok:
            cells.append((cx, cy, r))
    return cells


def _noise_field(spec: SynthSpec, rng) -> np.ndarray:
    """Smooth noise with max amplitude spec.noise.

    White per-pixel noise would shatter every probability plateau into
    single-pixel peaks; real segmentation outputs vary smoothly, so the noise
    is low-pass filtered before scaling.
    """
    if spec.noise == 0.0:
        return np.zeros((spec.size, spec.size))
    white = rng.uniform(-1.0, 1.0, (spec.size, spec.size))
    smooth = ndimage.gaussian_filter(white, 2.0, mode="nearest")
    peak = np.abs(smooth).max()
    return smooth * (spec.noise / peak) if peak > 0 else smooth


def _render(spec: SynthSpec, cells, noise_field) -> tuple[ProbMap, LabelMap]:
    size = spec.size
    labels = np.zeros((size, size), dtype=np.int32)
    yy, xx = np.mgrid[0:size, 0:size]
    for idx, (cx, cy, r) in enumerate(cells, start=1):
        disk = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
        labels[disk] = idx
    base = np.where(labels > 0, spec.fg_level, spec.bg_level)
    blurred = ndimage.gaussian_filter(base, spec.blur_sigma, mode="nearest")
    noisy = np.clip(blurred + noise_field, 0.0, 1.0)
    return ProbMap(noisy.astype(np.float32)), LabelMap(labels)


def synth_image(spec: SynthSpec) -> tuple[ProbMap, LabelMap]:
    """Deterministic single image: disks at fg_level over bg_level, blurred + noise."""
    rng = np.random.default_rng(spec.seed)
    cells = _place_cells(spec, rng)
    noise_field = _noise_field(spec, rng)
    return _render(spec, cells, noise_field)


def synth_video(spec: SynthSpec) -> tuple[list[ProbMap], list[LabelMap]]:
    """Frames generated by drifting cell centers; ids stable, noise field shared.

    A zero drift therefore produces identical frames, and a one-frame video
    matches synth_image exactly.
    """
    rng = np.random.default_rng(spec.seed)
    cells = _place_cells(spec, rng)
    noise_field = _noise_field(spec, rng)
    probs, gts = [], []
    prob, gt = _render(spec, cells, noise_field)
    probs.append(prob)
    gts.append(gt)
    for _frame in range(1, spec.frames):
        moved = []
        for i, (cx, cy, r) in enumerate(cells):
            nx, ny = cx, cy
            for _try in range(8):
                if spec.drift == 0:
                    break
                dx = int(rng.integers(-spec.drift, spec.drift + 1))
                dy = int(rng.integers(-spec.drift, spec.drift + 1))
                tx, ty = cx + dx, cy + dy
                if not (r + 1 <= tx < spec.size - r - 1 and r + 1 <= ty < spec.size - r - 1):
                    continue
                others = moved + cells[i + 1:]
                if all(math.hypot(tx - x, ty - y) >= r + cr + spec.min_gap
                       for x, y, cr in others):
                    nx, ny = tx, ty
                    break
            moved.append((nx, ny, r))
        cells = moved
        prob, gt = _render(spec, cells, noise_field)
        probs.append(prob)
        gts.append(gt)
    return probs, gts
