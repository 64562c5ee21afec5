import numpy as np
import pytest

from ceb.classifier import OracleScorer
from ceb.metrics_synth import SynthSpec, synth_video
from ceb.pipeline import PipelineConfig, oracle_scorer, segment_frame, training_labels
from ceb.region_graph import build_graph
from ceb.temporal import (FrameContext, TemporalConfig, final_selection,
                          init_state, iterate, run_temporal, segment_video)

CFG = PipelineConfig()
TCFG = TemporalConfig()


def _strip_regions(groups):
    """1D strips: groups maps region id -> (start, stop) pixel columns."""
    return {rid: {(x, 0) for x in range(a, b)} for rid, (a, b) in groups.items()}


def _ctx(regions, boundaries, scores, frame=0):
    graph = build_graph(regions, boundaries)
    return FrameContext(regions, boundaries, graph, scores, None, frame)


def _two_cell_frame(frame, score12, score34):
    """Two cells, each split into two regions by one candidate boundary."""
    regions = _strip_regions({1: (0, 2), 2: (3, 5), 3: (6, 8), 4: (9, 11)})
    boundaries = {(1, 2): {(2, 0)}, (3, 4): {(8, 0)}}
    return _ctx(regions, boundaries, {(1, 2): score12, (3, 4): score34}, frame)


def test_init_state_all_high_scores_select_everything():
    ctx = _two_cell_frame(0, 0.95, 0.96)
    state = init_state(ctx, TCFG, CFG)
    assert state.selected == (frozenset({1}), frozenset({2}),
                              frozenset({3}), frozenset({4}))
    assert state.candidates == ()
    assert state.supernodes == {}


def test_init_state_all_uncertain_keeps_graph():
    ctx = _two_cell_frame(0, 0.5, 0.5)
    state = init_state(ctx, TCFG, CFG)
    assert state.selected == ()
    assert set(state.supernodes) == {1, 2, 3, 4}
    assert len(state.candidates) == 6  # three per two-node component


def test_init_state_contracts_false_edges():
    # chain 1-2-3 with edge scores (0.05, 0.5)
    regions = _strip_regions({1: (0, 2), 2: (3, 5), 3: (6, 8)})
    boundaries = {(1, 2): {(2, 0)}, (2, 3): {(5, 0)}}
    ctx = _ctx(regions, boundaries, {(1, 2): 0.05, (2, 3): 0.5})
    state = init_state(ctx, TCFG, CFG)
    assert state.selected == ()
    assert state.supernodes == {1: frozenset({1, 2}), 3: frozenset({3})}
    assert set(state.edges) == {(1, 3)}
    assert set(state.candidates) == {frozenset({1}), frozenset({3}), frozenset({1, 3})}


def test_init_state_missing_score_rejected():
    regions = _strip_regions({1: (0, 2), 2: (3, 5)})
    boundaries = {(1, 2): {(2, 0)}}
    ctx = _ctx(regions, boundaries, {})
    with pytest.raises(ValueError, match="no score"):
        init_state(ctx, TCFG, CFG)


def test_propagation_walkthrough():
    # last frame decisive, earlier frames uncertain: selections propagate
    # backward one frame per iteration
    ctxs = [_two_cell_frame(0, 0.5, 0.5),
            _two_cell_frame(1, 0.5, 0.5),
            _two_cell_frame(2, 0.05, 0.05)]
    states = [init_state(c, TCFG, CFG) for c in ctxs]
    assert [len(s.selected) for s in states] == [0, 0, 2]

    states = iterate(states, ctxs, TCFG, CFG)
    assert [len(s.selected) for s in states] == [0, 2, 2]
    assert set(states[1].selected) == {frozenset({1, 2}), frozenset({3, 4})}

    states = iterate(states, ctxs, TCFG, CFG)
    assert [len(s.selected) for s in states] == [2, 2, 2]
    assert set(states[0].selected) == {frozenset({1, 2}), frozenset({3, 4})}


def test_iterate_noop_when_everything_selected():
    ctxs = [_two_cell_frame(0, 0.05, 0.95), _two_cell_frame(1, 0.05, 0.95)]
    states = [init_state(c, TCFG, CFG) for c in ctxs]
    after = iterate(states, ctxs, TCFG, CFG)
    assert after == states


def _chain_frame(frame, scores=(0.5, 0.5)):
    regions = _strip_regions({1: (0, 4), 2: (5, 9), 3: (10, 14)})
    boundaries = {(1, 2): {(4, 0)}, (2, 3): {(9, 0)}}
    return _ctx(regions, boundaries,
                {(1, 2): scores[0], (2, 3): scores[1]}, frame)


def _selected_ctx(frame, instances):
    """A frame whose regions exactly equal the given instance strips, all selected."""
    regions = {i + 1: set(pixels) for i, pixels in enumerate(instances)}
    return _ctx(regions, {}, {}, frame)


def test_directional_conflict_resolved_by_larger_sum():
    mid = _chain_frame(1)
    # prev frame proposes {1,2}+{3}; next frame proposes {1}+{2,3} more weakly
    prev_inst = [{(x, 0) for x in range(0, 9)} - {(0, 0)},   # ~cand {1,2}
                 {(x, 0) for x in range(10, 14)}]            # = cand {3}
    next_inst = [{(x, 0) for x in range(0, 3)},              # ~cand {1}
                 {(x, 0) for x in range(5, 13)}]             # ~cand {2,3}
    ctxs = [_selected_ctx(0, prev_inst), mid, _selected_ctx(2, next_inst)]
    tcfg = TemporalConfig(iterations=1)
    states = [init_state(c, tcfg, CFG) for c in ctxs]
    assert len(states[0].selected) == 2 and len(states[2].selected) == 2
    states = iterate(states, ctxs, tcfg, CFG)
    assert set(states[1].selected) == {frozenset({1, 2}), frozenset({3})}


def test_directional_tie_goes_to_earlier_frame():
    mid = _chain_frame(1)
    prev_inst = [{(x, 0) for x in range(0, 9)}]    # exactly cand {1,2}
    next_inst = [{(x, 0) for x in range(5, 14)}]   # exactly cand {2,3}
    ctxs = [_selected_ctx(0, prev_inst), mid, _selected_ctx(2, next_inst)]
    tcfg = TemporalConfig(iterations=1)
    states = [init_state(c, tcfg, CFG) for c in ctxs]
    states = iterate(states, ctxs, tcfg, CFG)
    assert frozenset({1, 2}) in set(states[1].selected)
    assert frozenset({2, 3}) not in set(states[1].selected)


def test_final_selection_empty_leftovers():
    ctx = _two_cell_frame(0, 0.95, 0.95)
    state = init_state(ctx, TCFG, CFG)
    finals = final_selection(state, ctx, 0.5)
    assert set(finals) == {frozenset({1}), frozenset({2}), frozenset({3}), frozenset({4})}


def test_final_selection_merges_low_scores():
    regions = _strip_regions({1: (0, 2), 2: (3, 5)})
    boundaries = {(1, 2): {(2, 0)}}
    ctx = _ctx(regions, boundaries, {(1, 2): 0.3})
    state = init_state(ctx, TCFG, CFG)
    assert state.selected == ()
    finals = final_selection(state, ctx, 0.5)
    assert finals == [frozenset({1, 2})]


def test_final_selection_boundary_score_exactly_half_is_true():
    regions = _strip_regions({1: (0, 2), 2: (3, 5)})
    boundaries = {(1, 2): {(2, 0)}}
    ctx = _ctx(regions, boundaries, {(1, 2): 0.5})
    state = init_state(ctx, TCFG, CFG)
    finals = final_selection(state, ctx, 0.5)
    assert set(finals) == {frozenset({1}), frozenset({2})}


def test_middle_frame_corruption_healed_by_neighbors():
    # true label for both cells is "merge"; the middle frame's first boundary
    # score is corrupted into the uncertain band on the wrong side of 0.5
    ctxs = [_two_cell_frame(0, 0.05, 0.05),
            _two_cell_frame(1, 0.70, 0.05),
            _two_cell_frame(2, 0.05, 0.05)]
    finals = run_temporal(ctxs, CFG, TCFG)
    for frame_instances in finals:
        assert set(frame_instances) == {frozenset({1, 2}), frozenset({3, 4})}


def test_monotone_selection_and_conservation_trace():
    ctxs = [_two_cell_frame(0, 0.5, 0.5),
            _two_cell_frame(1, 0.5, 0.05),
            _two_cell_frame(2, 0.05, 0.05)]
    trace = []
    run_temporal(ctxs, CFG, TCFG, trace=trace)
    all_regions = {1, 2, 3, 4}
    for states in trace:
        for state in states:
            picked = set()
            for inst in state.selected:
                assert not (picked & inst)
                picked |= inst
            remaining = {r for m in state.supernodes.values() for r in m}
            assert picked | remaining == all_regions
    for earlier, later in zip(trace, trace[1:]):
        for a, b in zip(earlier, later):
            assert set(a.selected) <= set(b.selected)


def test_single_frame_video_equals_segment_frame():
    spec = SynthSpec(size=64, cells=4, seed=21, blur_sigma=0.9, noise=0.05)
    probs, gts = synth_video(spec)
    cfg = PipelineConfig(min_area=6)
    scorer = oracle_scorer(probs[0], gts[0], cfg)
    video_out = segment_video(probs, scorer, cfg, TemporalConfig())
    frame_out = segment_frame(probs[0], scorer, cfg)
    assert len(video_out) == 1
    assert np.array_equal(video_out[0].labels, frame_out.labels)


def test_oracle_scores_video_equals_per_frame():
    spec = SynthSpec(size=64, cells=4, seed=22, frames=3, drift=1,
                     blur_sigma=0.9, noise=0.05)
    probs, gts = synth_video(spec)
    cfg = PipelineConfig(min_area=6)
    labelings = []
    for w, (p, g) in enumerate(zip(probs, gts)):
        labeling, _arts, _skipped = training_labels(p, g, cfg, w)
        labelings.append(labeling)
    scorer = OracleScorer.for_frames(labelings)
    video_out = segment_video(probs, scorer, cfg, TemporalConfig())
    for w, p in enumerate(probs):
        frame_out = segment_frame(p, scorer, cfg, frame_index=w)
        assert np.array_equal(video_out[w].labels, frame_out.labels)


def test_sweep_schedule_reaches_same_fixpoint():
    ctxs = [_two_cell_frame(0, 0.5, 0.5),
            _two_cell_frame(1, 0.5, 0.5),
            _two_cell_frame(2, 0.05, 0.05)]
    sync = run_temporal(ctxs, CFG, TemporalConfig(schedule="synchronous"))
    sweep = run_temporal(ctxs, CFG, TemporalConfig(schedule="sweep"))
    assert [set(f) for f in sync] == [set(f) for f in sweep]


def test_segment_video_requires_frames():
    with pytest.raises(ValueError):
        segment_video([], None)


def test_video_with_blank_frame():
    from ceb.classifier import ConstantScorer
    from ceb.raster_io import ProbMap
    spec = SynthSpec(size=48, cells=2, seed=30, blur_sigma=0.9, noise=0.04)
    prob = synth_video(spec)[0][0]
    blank = ProbMap.from_array(np.full((48, 48), 0.1, dtype=np.float32))
    outs = segment_video([prob, blank], ConstantScorer(1.0),
                         PipelineConfig(delta=0.02, min_area=1), TemporalConfig())
    assert outs[0].labels.max() >= 1
    assert outs[1].labels.max() == 0


def test_config_validation():
    with pytest.raises(ValueError):
        TemporalConfig(sigma1=0.9, sigma2=0.1)
    with pytest.raises(ValueError):
        TemporalConfig(iterations=-1)
    with pytest.raises(ValueError):
        TemporalConfig(schedule="diagonal")
