import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import canny_reference, congestion_all_pairs
from vizqm.edges import EdgeMap, canny, detect_edges, edge_congestion
from vizqm.imagecore import AnalysisConfig, ImageRGB

from conftest import uniform


def step_image(size=16, column=8, rgb=(255, 255, 255)):
    px = np.zeros((size, size, 3), np.uint8)
    px[:, column:] = rgb
    return ImageRGB(px)


def test_uniform_image_has_no_edges():
    e = detect_edges(uniform(32, 32, (90, 140, 200)))
    assert e.edge_count == 0
    assert all(not m.any() for m in e.channel_masks)


def test_black_white_step_gives_thin_vertical_line_in_every_channel():
    img = step_image()
    e = detect_edges(img)
    for c, m in enumerate(e.channel_masks):
        assert np.array_equal(m, canny_reference(img.pixels[..., c]))
        assert m.sum(axis=1).tolist() == [1] * 16
        assert len(set(np.nonzero(m)[1])) == 1
        assert abs(int(np.nonzero(m)[1][0]) - 7.5) <= 1
    assert np.array_equal(e.mask, e.channel_masks[0])


def test_red_only_step_is_seen_by_red_channel_only():
    px = np.full((16, 16, 3), 40, np.uint8)
    px[:, 8:, 0] = 230
    img = ImageRGB(px)
    e = detect_edges(img)
    assert e.mask.any()
    assert e.channel_masks[0].any()
    assert not e.channel_masks[1].any() and not e.channel_masks[2].any()
    assert np.array_equal(e.channel_masks[0], canny_reference(px[..., 0]))


@pytest.mark.parametrize("seed", range(6))
def test_canny_matches_loop_reference_on_shapes(seed):
    rng = np.random.default_rng(seed)
    a = np.full((24, 24), int(rng.integers(0, 80)), np.uint8)
    for _ in range(3):
        y, x = rng.integers(0, 20, 2)
        hh, ww = rng.integers(3, 10, 2)
        a[y:y + hh, x:x + ww] = rng.integers(100, 256)
    assert np.array_equal(canny(a), canny_reference(a))


def test_mask_is_union_of_channels(chart):
    e = detect_edges(chart.image)
    assert np.array_equal(e.mask, e.channel_masks[0] | e.channel_masks[1] | e.channel_masks[2])


def test_congestion_empty_map():
    r = edge_congestion(EdgeMap.from_mask(np.zeros((10, 10), bool)))
    assert r.score == 0.0
    assert not r.overlay.pixels.any()


def test_isolated_line_scores_zero():
    m = np.zeros((20, 40), bool)
    m[10, 3:37] = True
    assert edge_congestion(EdgeMap.from_mask(m)).score == 0.0


def test_parallel_lines_three_apart_fully_congested():
    m = np.zeros((20, 40), bool)
    m[6, :] = True
    m[9, :] = True
    r = edge_congestion(EdgeMap.from_mask(m))
    assert r.score == 1.0
    assert np.array_equal(r.congested, congestion_all_pairs(m, 4))
    assert set(np.unique(r.overlay.pixels)) == {0, 255}


def test_parallel_lines_beyond_distance_not_congested():
    m = np.zeros((20, 40), bool)
    m[4, :] = True
    m[9, :] = True
    assert edge_congestion(EdgeMap.from_mask(m)).score == 0.0
    assert edge_congestion(EdgeMap.from_mask(m), AnalysisConfig(congestion_distance=5)).score == 1.0


def random_mask(rng, max_side=64):
    h, w = rng.integers(1, max_side + 1, 2)
    density = rng.uniform(0.01, 0.25)
    return rng.random((h, w)) < density


@pytest.mark.parametrize("seed", range(20))
def test_congestion_matches_all_pairs_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    m = random_mask(rng, 40)
    d = int(rng.integers(1, 7))
    r = edge_congestion(EdgeMap.from_mask(m), AnalysisConfig(congestion_distance=d))
    assert np.array_equal(r.congested, congestion_all_pairs(m, d))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_congestion_properties(seed):
    rng = np.random.default_rng(seed)
    m = random_mask(rng, 32)
    edges = EdgeMap.from_mask(m)
    r4 = edge_congestion(edges, AnalysisConfig(congestion_distance=4))
    r8 = edge_congestion(edges, AnalysisConfig(congestion_distance=8))
    assert not (r4.congested & ~m).any()
    assert 0.0 <= r4.score <= 1.0
    assert r4.score <= r8.score
    expected = r4.congested.sum() / m.sum() if m.any() else 0.0
    assert r4.score == expected


def test_translation_invariance():
    rng = np.random.default_rng(5)
    px = np.full((96, 96, 3), 255, np.uint8)
    for _ in range(6):
        y, x = rng.integers(30, 55, 2)
        px[y:y + 8, x:x + 3] = rng.integers(0, 200, 3)
    shifted = np.full_like(px, 255)
    shifted[5:, 7:] = px[:-5, :-7]
    a = edge_congestion(detect_edges(ImageRGB(px)))
    b = edge_congestion(detect_edges(ImageRGB(shifted)))
    assert a.score == b.score
    assert np.array_equal(a.congested[:-5, :-7], b.congested[5:, 7:])


def test_chart_congestion_concentrates_in_clutter(chart):
    r = edge_congestion(detect_edges(chart.image))
    share = r.congested[chart.clutter_mask].sum() / r.congested.sum()
    assert share > 0.5
