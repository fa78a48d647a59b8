import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vizqm.color import (
    CVD_FILE,
    WAVE_FILE,
    CvdKind,
    colorfulness,
    data_path,
    default_cvd_table,
    default_wave_table,
    load_cvd_table,
    load_wave_table,
    monochrome_view,
    simulate_cvd,
    table_versions,
    wave_score,
)
from vizqm.errors import MissingMatrixData, MissingWaveData
from vizqm.imagecore import AnalysisConfig, ImageRGB, to_grayscale

from conftest import uniform

SEVERITIES = [i / 10 for i in range(11)]
GREYS = ImageRGB(np.repeat(np.arange(256, dtype=np.uint8)[None, :, None], 3, axis=2))

images = st.integers(0, 2**32 - 1).map(
    lambda seed: ImageRGB(np.random.default_rng(seed).integers(0, 256, (12, 17, 3), dtype=np.uint8))
)


# -- CVD ------------------------------------------------------------------------

@pytest.mark.parametrize("kind", list(CvdKind))
def test_severity_zero_is_bit_exact(kind, chart):
    out = simulate_cvd(chart.image, kind, AnalysisConfig(cvd_severity=0.0))
    assert np.array_equal(out.pixels, chart.image.pixels)


@pytest.mark.parametrize("kind", list(CvdKind))
@pytest.mark.parametrize("severity", SEVERITIES)
def test_grey_axis_preserved(kind, severity):
    out = simulate_cvd(GREYS, kind, AnalysisConfig(cvd_severity=severity))
    assert np.abs(out.pixels.astype(int) - GREYS.pixels.astype(int)).max() <= 2


def test_mid_grey_example():
    for kind in CvdKind:
        out = simulate_cvd(uniform(4, 4, (128, 128, 128)), kind)
        assert np.abs(out.pixels.astype(int) - 128).max() <= 2


def test_protanomaly_pure_red():
    # Row-by-row product of the severity-1.0 protanomaly matrix with linear (1, 0, 0), then encoded.
    out = simulate_cvd(uniform(2, 2, (255, 0, 0)), CvdKind.PROTANOMALY)
    assert tuple(out.pixels[0, 0]) == (109, 95, 0)


def test_protanomaly_matches_hand_product():
    m = default_cvd_table().matrix(CvdKind.PROTANOMALY, 1.0)
    lin = np.clip(m @ np.array([1.0, 0.0, 0.0]), 0, 1)
    enc = np.where(lin <= 0.0031308, 12.92 * lin, 1.055 * lin ** (1 / 2.4) - 0.055)
    assert tuple(np.floor(enc * 255 + 0.5).astype(int)) == (109, 95, 0)


def test_nearest_severity_step_used():
    img = uniform(2, 2, (200, 40, 90))
    a = simulate_cvd(img, CvdKind.DEUTERANOMALY, AnalysisConfig(cvd_severity=0.62))
    b = simulate_cvd(img, CvdKind.DEUTERANOMALY, AnalysisConfig(cvd_severity=0.6))
    assert a == b


def test_table_invariants():
    table = default_cvd_table()
    for kind in CvdKind:
        assert np.array_equal(table.matrix(kind, 0.0), np.eye(3))
        for s in SEVERITIES:
            assert np.abs(table.matrix(kind, s).sum(axis=1) - 1).max() <= 1e-3
    assert table.version
    assert set(table_versions()) == {"cvd", "wave"}


@settings(max_examples=30, deadline=None)
@given(images, st.sampled_from(list(CvdKind)))
def test_cvd_preserves_shape(img, kind):
    out = simulate_cvd(img, kind)
    assert out.pixels.shape == img.pixels.shape


def test_monochrome_is_grayscale(chart):
    assert np.array_equal(monochrome_view(chart.image).pixels, to_grayscale(chart.image).pixels)


# -- WAVE -----------------------------------------------------------------------

def test_wave_endpoints():
    t = default_wave_table()
    best, worst = tuple(t.colors[t.best]), tuple(t.colors[t.worst])
    assert wave_score(uniform(8, 8, best)) == pytest.approx(1.0, abs=1e-9)
    assert wave_score(uniform(8, 8, worst)) == pytest.approx(0.0, abs=1e-9)
    half = np.empty((8, 8, 3), np.uint8)
    half[:, :4] = best
    half[:, 4:] = worst
    assert wave_score(ImageRGB(half)) == pytest.approx(0.5, abs=1e-9)


def test_wave_table_shape():
    t = default_wave_table()
    assert len(t.codes) == 32 and t.colors.shape == (32, 3)
    assert np.ptp(t.ratings) > 0


def test_wave_tie_breaks_to_lowest_index():
    t = default_wave_table()
    # The midpoint of two palette colours with an integer midpoint is equidistant from both.
    for i in range(32):
        for j in range(i + 1, 32):
            mid = (t.colors[i] + t.colors[j])
            if (mid % 2).any():
                continue
            mid //= 2
            d = ((t.colors - mid) ** 2).sum(axis=1)
            if d.min() == d[i] == d[j]:
                lo, hi = t.ratings.min(), t.ratings.max()
                expect = (t.ratings[i] - lo) / (hi - lo)
                assert wave_score(uniform(2, 2, tuple(mid))) == pytest.approx(expect, abs=1e-12)
                return
    pytest.skip("palette has no exact equidistant midpoint")


@settings(max_examples=40, deadline=None)
@given(images, st.integers(0, 2**32 - 1))
def test_wave_permutation_invariant_and_bounded(img, seed):
    flat = img.pixels.reshape(-1, 3)
    perm = np.random.default_rng(seed).permutation(len(flat))
    shuffled = ImageRGB(flat[perm].reshape(img.pixels.shape))
    s = wave_score(img)
    assert 0.0 <= s <= 1.0
    assert wave_score(shuffled) == pytest.approx(s, abs=1e-12)


def test_wave_matches_brute_force(chart):
    t = default_wave_table()
    px = chart.image.pixels[::7, ::7].reshape(-1, 3).astype(int)
    ratings = []
    for p in px:
        d = [int(((p - c) ** 2).sum()) for c in t.colors]
        ratings.append(t.ratings[d.index(min(d))])
    expect = (np.mean(ratings) - t.ratings.min()) / np.ptp(t.ratings)
    sub = ImageRGB(np.ascontiguousarray(chart.image.pixels[::7, ::7]))
    assert wave_score(sub) == pytest.approx(expect, abs=1e-12)


# -- colourfulness ----------------------------------------------------------------

def test_colorfulness_pure_red():
    assert colorfulness(uniform(10, 10, (255, 0, 0))) == pytest.approx(85.5296, abs=0.01)


def test_colorfulness_checkerboard():
    px = np.zeros((2, 2, 3), np.uint8)
    px[0, 0] = px[1, 1] = (255, 0, 0)
    px[0, 1] = px[1, 0] = (0, 255, 0)
    assert colorfulness(ImageRGB(px)) == pytest.approx(293.25, abs=0.01)


@settings(max_examples=40, deadline=None)
@given(images)
def test_colorfulness_of_greyscale_is_zero(img):
    g = to_grayscale(img).pixels
    assert colorfulness(ImageRGB(np.stack([g, g, g], axis=2))) == 0.0


@settings(max_examples=40, deadline=None)
@given(images, st.integers(0, 2**32 - 1))
def test_colorfulness_statistics_only(img, seed):
    s = colorfulness(img)
    assert np.isfinite(s) and s >= 0
    flat = img.pixels.reshape(-1, 3)
    shuffled = flat[np.random.default_rng(seed).permutation(len(flat))]
    assert colorfulness(ImageRGB(shuffled.reshape(img.pixels.shape))) == pytest.approx(s, rel=1e-9, abs=1e-9)
    doubled = ImageRGB(np.concatenate([img.pixels, img.pixels], axis=0))
    assert colorfulness(doubled) == pytest.approx(s, rel=1e-9, abs=1e-9)


# -- data files -----------------------------------------------------------------

def test_missing_matrix_file(tmp_path, monkeypatch):
    monkeypatch.setenv("VIZQM_DATA_DIR", str(tmp_path))
    with pytest.raises(MissingMatrixData):
        simulate_cvd(uniform(2, 2, (1, 2, 3)), CvdKind.TRITANOMALY)


def test_missing_wave_file(tmp_path, monkeypatch):
    monkeypatch.setenv("VIZQM_DATA_DIR", str(tmp_path))
    with pytest.raises(MissingWaveData):
        wave_score(uniform(2, 2, (1, 2, 3)))


def test_corrupt_tables(tmp_path):
    src = data_path(CVD_FILE).read_text().splitlines()
    bad = tmp_path / "cvd.csv"
    bad.write_text("\n".join(src[:-1]) + "\n")  # drop one severity step
    with pytest.raises(MissingMatrixData):
        load_cvd_table(bad)
    rows = data_path(WAVE_FILE).read_text().splitlines()
    short = tmp_path / "wave.csv"
    short.write_text("\n".join(rows[:-1]) + "\n")
    with pytest.raises(MissingWaveData):
        load_wave_table(short)


def test_data_dir_override_is_used(tmp_path, monkeypatch):
    text = data_path(WAVE_FILE).read_text().replace("bcp32-approx-v1", "bcp32-local")
    (tmp_path / WAVE_FILE).write_text(text)
    (tmp_path / CVD_FILE).write_text(data_path(CVD_FILE).read_text())
    monkeypatch.setenv("VIZQM_DATA_DIR", str(tmp_path))
    assert table_versions()["wave"] == "bcp32-local"
