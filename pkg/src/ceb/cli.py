"""Command-line interface.

Exit codes: 0 success, 1 runtime error (diagnostics on stderr), 2 usage error.
Option values may also come from a flat ``key = value`` config file; explicit
command-line flags win over the file, which wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import classifier, matching, metrics_synth, pipeline, signature
from . import seeds as seeds_mod
from . import temporal, watershed
from .errors import CebError
from .raster_io import (LabelMap, read_labelmap, read_probmap, write_labelmap,
                        write_probmap)

_PIPELINE_KEYS = {
    "delta": float, "min_area": int, "connectivity": int,
    "foreground_threshold": float, "canvas_side": int, "branch_length": int,
    "theta": float, "max_nodes": int, "max_candidates": int, "rim": str,
}
_TEMPORAL_KEYS = {"sigma1": float, "sigma2": float, "iterations": int, "schedule": str}
_SCORER_KEYS = {
    "hidden": int, "learning_rate": float, "epochs": int, "gamma": float,
    "alpha": float, "seed": int, "input_side": int,
}
_ALL_CONFIG_KEYS = {**_PIPELINE_KEYS, **_TEMPORAL_KEYS, **_SCORER_KEYS}


def _read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _ALL_CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _ALL_CONFIG_KEYS[key](value.strip())
    return values


def _merge_config(args, keys) -> dict:
    file_values = _read_config_file(args.config) if getattr(args, "config", None) else {}
    merged = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key in file_values:
            merged[key] = file_values[key]
    return merged


def _pipeline_config(args, mode=None) -> pipeline.PipelineConfig:
    merged = _merge_config(args, _PIPELINE_KEYS)
    if mode is not None:
        merged["mode"] = mode
    return pipeline.PipelineConfig(**merged)


def _temporal_config(args) -> temporal.TemporalConfig:
    return temporal.TemporalConfig(**_merge_config(args, _TEMPORAL_KEYS))


def _scorer_config(args) -> classifier.ScorerConfig:
    return classifier.ScorerConfig(**_merge_config(args, _SCORER_KEYS))


def _config_defaults() -> dict:
    from dataclasses import asdict
    return {**asdict(pipeline.PipelineConfig()),
            **asdict(temporal.TemporalConfig()),
            **asdict(classifier.ScorerConfig())}


def _add_config_flags(parser, keys):
    defaults = _config_defaults()
    parser.add_argument("--config", help="flat key = value config file")
    for key, typ in keys.items():
        shown = defaults[key]
        if isinstance(shown, float):
            shown = f"{shown:g}"
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ,
                            default=None, help=f"default {shown}")


def _build_scorer(args):
    mode = "ceb_wo_cls" if args.mode == "wo-cls" else "ceb"
    if mode == "ceb_wo_cls":
        return None, mode
    if args.scores:
        return classifier.ExternalScorer.from_csv(args.scores), mode
    if args.model:
        return classifier.ScorerModel.load(args.model), mode
    raise ValueError("mode 'ceb' needs --model or --scores (or use --mode wo-cls)")


def _frame_paths(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ValueError(f"{directory}: not a directory")
    paths = sorted(p for p in directory.iterdir() if p.is_file())
    if not paths:
        raise ValueError(f"{directory}: no frame files")
    return paths


# ---------------------------------------------------------------------------
# commands


def cmd_segment(args) -> int:
    scorer, mode = _build_scorer(args)
    cfg = _pipeline_config(args, mode)
    prob = read_probmap(args.probmap)
    result = pipeline.segment_frame(prob, scorer, cfg)
    write_labelmap(result, args.out)
    return 0


def _analyze_one(job):
    path, cfg, index = job
    return pipeline.analyze_frame(read_probmap(path), cfg, index)


def cmd_segment_video(args) -> int:
    scorer, mode = _build_scorer(args)
    cfg = _pipeline_config(args, mode)
    tcfg = _temporal_config(args)
    paths = _frame_paths(args.frames)
    jobs = [(p, cfg, i) for i, p in enumerate(paths)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            artifacts = list(pool.map(_analyze_one, jobs))
    else:
        artifacts = [_analyze_one(j) for j in jobs]
    if mode == "ceb_wo_cls":
        score_sets = [{k: 1.0 for k in a.boundaries} for a in artifacts]
    else:
        score_sets = [pipeline.score_records(a.records, scorer) for a in artifacts]
    ctxs = [temporal.FrameContext.from_artifacts(a, s)
            for a, s in zip(artifacts, score_sets)]
    finals = temporal.run_temporal(ctxs, cfg, tcfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path, instances, art in zip(paths, finals, artifacts):
        labmap = pipeline.materialize(instances, art, cfg)
        write_labelmap(labmap, out_dir / (path.stem + "_instances.pgm"))
    return 0


def cmd_make_training(args) -> int:
    cfg = _pipeline_config(args)
    prob = read_probmap(args.probmap)
    gt = read_labelmap(args.gt)
    records = pipeline.make_training_set(prob, gt, cfg)
    signature.write_signature_set(records, args.out_dir)
    if args.dump_model:
        gt_ids, _cands, region_map, scores, _arts, _skipped = \
            pipeline.build_matching_model(prob, gt, cfg)
        text = matching.dump_model_lp("gt-candidate matching", gt_ids,
                                      region_map, scores)
        Path(args.dump_model).write_text(text)
    return 0


def cmd_extract_signatures(args) -> int:
    cfg = _pipeline_config(args)
    prob = read_probmap(args.probmap)
    artifacts = pipeline.analyze_frame(prob, cfg)
    signature.write_signature_set(artifacts.records, args.out_dir)
    return 0


def cmd_train(args) -> int:
    records = signature.load_signature_set(args.manifest)
    model = classifier.train(records, _scorer_config(args))
    model.save(args.out)
    return 0


def cmd_score(args) -> int:
    records = signature.load_signature_set(args.manifest)
    model = classifier.ScorerModel.load(args.model)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["signature_id", "score"])
        for rec in records:
            writer.writerow([rec.signature_id, f"{model.score(rec):.9f}"])
    return 0


def cmd_evaluate(args) -> int:
    if bool(args.pred_dir) != bool(args.gt_dir) or (not args.pred_dir and not (args.pred and args.gt)):
        raise ValueError("evaluate needs --pred/--gt or --pred-dir/--gt-dir")
    if args.pred_dir:
        pred_paths = _frame_paths(args.pred_dir)
        gt_paths = _frame_paths(args.gt_dir)
        if len(pred_paths) != len(gt_paths):
            raise ValueError("prediction and ground-truth frame counts differ")
        preds = [read_labelmap(p) for p in pred_paths]
        gts = [read_labelmap(p) for p in gt_paths]
        report = metrics_synth.evaluate_video(preds, gts, args.match)
    else:
        report = metrics_synth.evaluate(read_labelmap(args.pred),
                                        read_labelmap(args.gt), args.match)
    rows = [("all", report)] + [(str(i), fr) for i, fr in enumerate(report.frames)]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "f1", "aji", "ap", "tp", "fp", "fn", "n_gt", "n_pred"])
            for name, r in rows:
                writer.writerow([name, f"{r.f1:.6f}", f"{r.aji:.6f}", f"{r.ap:.6f}",
                                 r.tp, r.fp, r.fn, r.n_gt, r.n_pred])
    print(f"{'frame':>6} {'F1':>8} {'AJI':>8} {'AP':>8} {'TP':>5} {'FP':>5} {'FN':>5}")
    for name, r in rows:
        print(f"{name:>6} {r.f1:8.4f} {r.aji:8.4f} {r.ap:8.4f} {r.tp:5d} {r.fp:5d} {r.fn:5d}")
    return 0


def cmd_synth(args) -> int:
    spec = metrics_synth.SynthSpec(size=args.size, cells=args.cells,
                                   radius=(args.radius_min, args.radius_max),
                                   blur_sigma=args.blur, noise=args.noise,
                                   seed=args.seed, frames=args.frames,
                                   drift=args.drift, min_gap=args.gap)
    out_dir = Path(args.out_dir)
    (out_dir / "probmaps").mkdir(parents=True, exist_ok=True)
    (out_dir / "gt").mkdir(parents=True, exist_ok=True)
    probs, gts = metrics_synth.synth_video(spec)
    for i, (prob, gt) in enumerate(zip(probs, gts)):
        write_probmap(prob, out_dir / "probmaps" / f"frame_{i:03d}.cebp")
        write_labelmap(gt, out_dir / "gt" / f"frame_{i:03d}.pgm")
    return 0


def cmd_seeds(args) -> int:
    cfg = _pipeline_config(args)
    prob = read_probmap(args.probmap)
    thresholds = seeds_mod.build_threshold_list(prob, cfg.delta)
    grid = LabelMap.zeros(prob.height, prob.width).labels.copy()
    if thresholds.values:
        forest = seeds_mod.build_forest(prob, thresholds, cfg.connectivity)
        seed_set = seeds_mod.extract_seeds(forest, cfg.min_area)
        for sid, pixels in seed_set.seeds.items():
            for x, y in pixels:
                grid[y, x] = sid
    write_labelmap(LabelMap(grid), args.dump)
    return 0


def cmd_watershed(args) -> int:
    cfg = _pipeline_config(args)
    prob = read_probmap(args.probmap)
    artifacts = pipeline.analyze_frame(prob, cfg)
    labmap = watershed.status_labelmap(prob.shape, artifacts.regions, artifacts.boundaries)
    write_labelmap(labmap, args.dump)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ceb",
                                     description="Boundary-centric cell instance segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment one probability map")
    p.add_argument("--probmap", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", help="CEBM model file for the built-in scorer")
    p.add_argument("--scores", help="external signature_id,score CSV")
    p.add_argument("--mode", choices=["ceb", "wo-cls"], default="ceb",
                   help="default ceb")
    _add_config_flags(p, _PIPELINE_KEYS)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("segment-video", help="segment a directory of frames with temporal rounds")
    p.add_argument("--frames", required=True, help="directory of frame files (lexicographic order)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--model")
    p.add_argument("--scores")
    p.add_argument("--mode", choices=["ceb", "wo-cls"], default="ceb",
                   help="default ceb")
    p.add_argument("--jobs", type=int, default=1, help="frame-level parallelism (default 1)")
    _add_config_flags(p, {**_PIPELINE_KEYS, **_TEMPORAL_KEYS})
    p.set_defaults(func=cmd_segment_video)

    p = sub.add_parser("make-training", help="signatures with ground-truth-derived labels")
    p.add_argument("--probmap", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dump-model", help="write the matching model as LP-style text")
    _add_config_flags(p, _PIPELINE_KEYS)
    p.set_defaults(func=cmd_make_training)

    p = sub.add_parser("extract-signatures", help="signatures without labels")
    p.add_argument("--probmap", required=True)
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p, _PIPELINE_KEYS)
    p.set_defaults(func=cmd_extract_signatures)

    p = sub.add_parser("train", help="train the built-in boundary scorer")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, _SCORER_KEYS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a signature manifest with a model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="instance segmentation metrics")
    p.add_argument("--pred")
    p.add_argument("--gt")
    p.add_argument("--pred-dir")
    p.add_argument("--gt-dir")
    p.add_argument("--match", choices=["greedy", "optimal"], default="greedy",
                   help="default greedy")
    p.add_argument("--out", help="CSV report path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic probability-map corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--size", type=int, default=128, help="default 128")
    p.add_argument("--cells", type=int, default=12, help="default 12")
    p.add_argument("--radius-min", type=int, default=6, help="default 6")
    p.add_argument("--radius-max", type=int, default=11, help="default 11")
    p.add_argument("--blur", type=float, default=1.0, help="default 1.0")
    p.add_argument("--noise", type=float, default=0.06, help="default 0.06")
    p.add_argument("--seed", type=int, default=0, help="default 0")
    p.add_argument("--frames", type=int, default=1, help="default 1")
    p.add_argument("--drift", type=int, default=0, help="default 0")
    p.add_argument("--gap", type=int, default=2, help="default 2")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("seeds", help="dump extracted seeds as a label map")
    p.add_argument("--probmap", required=True)
    p.add_argument("--dump", required=True)
    _add_config_flags(p, _PIPELINE_KEYS)
    p.set_defaults(func=cmd_seeds)

    p = sub.add_parser("watershed", help="dump regions (watershed pixels as 65535)")
    p.add_argument("--probmap", required=True)
    p.add_argument("--dump", required=True)
    _add_config_flags(p, _PIPELINE_KEYS)
    p.set_defaults(func=cmd_watershed)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CebError, OSError, ValueError) as exc:
        print(f"ceb: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
