import numpy as np
import pytest

from ceb.raster_io import ProbMap
from ceb.seeds import build_forest, build_threshold_list, extract_seeds

from oracles import quantized_component_sets


def test_thresholds_dedup():
    p = ProbMap.from_array([[0.6, 0.6, 0.8]])
    tl = build_threshold_list(p, 0.01)
    assert len(tl.values) == 2
    assert tl.values[0] == pytest.approx(0.6, abs=1e-9)
    assert tl.values[1] == pytest.approx(0.8, abs=1e-9)


def test_thresholds_merge_within_bin():
    p = ProbMap.from_array([[0.601, 0.604]])
    tl = build_threshold_list(p, 0.01)
    assert len(tl.values) == 1


def test_thresholds_empty_when_no_foreground():
    p = ProbMap.from_array([[0.1, 0.5, 0.3]])
    assert build_threshold_list(p, 0.01).values == ()


def test_thresholds_all_above_half():
    rng = np.random.default_rng(3)
    p = ProbMap.from_array(rng.random((9, 9), dtype=np.float32))
    tl = build_threshold_list(p)
    assert all(v > 0.5 for v in tl.values)
    diffs = np.diff(tl.values)
    assert np.all(diffs >= tl.step - 1e-12)


def _two_peak_map():
    # one blob, two local peaks above a saddle
    row = [0.55, 0.9, 0.7, 0.6, 0.7, 0.9, 0.55]
    base = [0.52] * 7
    return ProbMap.from_array([base, row, base])


def test_forest_two_peaks_matches_component_oracle():
    p = _two_peak_map()
    tl = build_threshold_list(p, 0.05)
    forest = build_forest(p, tl)
    expected = quantized_component_sets(p.values, 0.05)
    assert len(tl.values) == len(expected)
    for level, (value, comps) in enumerate(expected):
        got = sorted(
            (forest.pixels(n.node_id) for n in forest.nodes if n.level == level),
            key=lambda s: min(s))
        want = sorted((frozenset(c) for c in comps), key=lambda s: min(s))
        assert got == want
    # one root splitting into two leaves
    roots = [n.node_id for n in forest.nodes if n.level == 0]
    assert len(roots) == 1
    assert len(forest.leaves()) == 2


def test_forest_two_separate_blobs():
    vals = np.full((5, 9), 0.1, dtype=np.float32)
    vals[1:4, 1:3] = 0.8
    vals[1:4, 6:8] = 0.9
    p = ProbMap(vals)
    forest = build_forest(p, build_threshold_list(p, 0.01))
    roots = [n for n in forest.nodes if n.level == 0]
    assert len(roots) == 2
    # no shared ancestor: parents only exist within each blob's chain
    for node_id, parent_id in forest.parent.items():
        assert forest.pixels(node_id) <= forest.pixels(parent_id)


def test_forest_uniform_blob_single_chain():
    vals = np.full((4, 4), 0.1, dtype=np.float32)
    vals[1:3, 1:3] = 0.75
    p = ProbMap(vals)
    forest = build_forest(p, build_threshold_list(p, 0.01))
    assert len(forest.nodes) == 1
    assert forest.leaves() == [0]
    seeds = extract_seeds(forest, min_area=1)
    assert seeds.seeds[1] == forest.pixels(0)


def test_forest_nesting_property():
    rng = np.random.default_rng(11)
    from scipy import ndimage
    raw = ndimage.gaussian_filter(rng.random((16, 16)), 1.2)
    raw = (raw - raw.min()) / (raw.max() - raw.min())
    p = ProbMap.from_array(raw.astype(np.float32))
    tl = build_threshold_list(p)
    if not tl.values:
        pytest.skip("no foreground in random draw")
    forest = build_forest(p, tl)
    for child, parent in forest.parent.items():
        assert forest.pixels(child) <= forest.pixels(parent)
    # same-level nodes are disjoint
    by_level = {}
    for n in forest.nodes:
        by_level.setdefault(n.level, []).append(forest.pixels(n.node_id))
    for nodes in by_level.values():
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                assert not (nodes[i] & nodes[j])


def test_extract_seeds_min_area():
    # three blobs with areas 5, 9, 1 at a single threshold
    vals = np.full((7, 17), 0.1, dtype=np.float32)
    vals[1, 1:6] = 0.8          # area 5
    vals[3:6, 8:11] = 0.8       # area 9
    vals[1, 15] = 0.8           # area 1
    p = ProbMap(vals)
    forest = build_forest(p, build_threshold_list(p, 0.01))
    assert len(forest.leaves()) == 3
    seeds = extract_seeds(forest, min_area=2)
    assert len(seeds) == 2
    assert extract_seeds(forest, min_area=100).seeds == {}


def test_seed_ids_scan_order_and_disjoint():
    p = _two_peak_map()
    forest = build_forest(p, build_threshold_list(p, 0.05))
    seeds = extract_seeds(forest, min_area=1)
    assert sorted(seeds.seeds) == [1, 2]
    assert (1, 1) in seeds.seeds[1]  # left peak first in scan order
    assert (5, 1) in seeds.seeds[2]
    assert not (seeds.seeds[1] & seeds.seeds[2])


def test_seed_count_monotone_in_min_area():
    rng = np.random.default_rng(5)
    from scipy import ndimage
    for trial in range(10):
        raw = ndimage.gaussian_filter(rng.random((20, 20)), 1.0)
        raw = (raw - raw.min()) / (raw.max() - raw.min())
        p = ProbMap.from_array(raw.astype(np.float32))
        tl = build_threshold_list(p)
        if not tl.values:
            continue
        forest = build_forest(p, tl)
        counts = [len(extract_seeds(forest, min_area=a)) for a in (1, 2, 4, 8)]
        assert counts == sorted(counts, reverse=True)


def test_forest_connectivity_knob():
    # two plateaus touching only diagonally: one component under 8-connectivity,
    # two under 4-connectivity
    vals = np.full((4, 4), 0.1, dtype=np.float32)
    vals[0:2, 0:2] = 0.8
    vals[2:4, 2:4] = 0.8
    p = ProbMap(vals)
    tl = build_threshold_list(p, 0.01)
    assert len(build_forest(p, tl, connectivity=8).nodes) == 1
    assert len(build_forest(p, tl, connectivity=4).nodes) == 2
    with pytest.raises(ValueError):
        build_forest(p, tl, connectivity=6)


def test_build_forest_rejects_empty_thresholds():
    p = ProbMap.from_array([[0.1]])
    with pytest.raises(ValueError):
        build_forest(p, build_threshold_list(p))


def test_step_validation():
    p = ProbMap.from_array([[0.6]])
    with pytest.raises(ValueError):
        build_threshold_list(p, 0.5)
