"""Colour metrics: CVD simulation, monochrome view, WAVE preference, colourfulness."""

from __future__ import annotations

import csv
import enum
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import MissingMatrixData, MissingWaveData
from .imagecore import (
    AnalysisConfig,
    ImageGray,
    ImageRGB,
    round_half_away,
    srgb_decode,
    srgb_encode,
    to_grayscale,
)

CVD_FILE = "cvd_machado2009.csv"
WAVE_FILE = "wave_bcp32.csv"
DATA_DIR_ENV = "VIZQM_DATA_DIR"


class CvdKind(enum.Enum):
    DEUTERANOMALY = "deuteranomaly"
    PROTANOMALY = "protanomaly"
    TRITANOMALY = "tritanomaly"

    @property
    def code(self) -> str:
        """Single-letter panel label (d / p / t)."""
        return self.value[0]


def data_path(name: str) -> Path:
    override = os.environ.get(DATA_DIR_ENV)
    if override:
        return Path(override) / name
    return Path(str(resources.files("vizqm") / "data" / name))


def _read_table(path: Path) -> tuple[str, list[dict[str, str]]]:
    text = path.read_text(encoding="utf-8")
    version = ""
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            tag = line[1:].strip()
            if tag.startswith("version:"):
                version = tag.split(":", 1)[1].strip()
        elif line.strip():
            body.append(line)
    return version, list(csv.DictReader(body))


@dataclass(frozen=True, eq=False)
class CvdMatrixTable:
    version: str
    # kind -> (11, 3, 3) array indexed by severity step 0..10
    matrices: dict

    def matrix(self, kind: CvdKind, severity: float) -> np.ndarray:
        step = int(round_half_away(float(severity) * 10.0))
        step = min(max(step, 0), 10)
        return self.matrices[kind][step]


@dataclass(frozen=True, eq=False)
class WaveTable:
    version: str
    codes: tuple[str, ...]
    colors: np.ndarray  # (32, 3) int
    ratings: np.ndarray  # (32,) float

    @property
    def best(self) -> int:
        return int(np.argmax(self.ratings))

    @property
    def worst(self) -> int:
        return int(np.argmin(self.ratings))


def load_cvd_table(path: str | Path | None = None) -> CvdMatrixTable:
    path = Path(path) if path is not None else data_path(CVD_FILE)
    try:
        version, rows = _read_table(path)
        mats = {k: np.full((11, 3, 3), np.nan) for k in CvdKind}
        for row in rows:
            kind = CvdKind(row["kind"])
            step = int(round_half_away(float(row["severity"]) * 10.0))
            vals = [float(row[f"m{i}{j}"]) for i in range(3) for j in range(3)]
            mats[kind][step] = np.array(vals).reshape(3, 3)
    except (OSError, KeyError, ValueError, TypeError, IndexError) as exc:
        raise MissingMatrixData(f"cannot load CVD matrices from {path}: {exc}") from exc
    for kind, m in mats.items():
        if np.isnan(m).any():
            raise MissingMatrixData(f"{path}: incomplete severity steps for {kind.value}")
        if not np.allclose(m[0], np.eye(3)):
            raise MissingMatrixData(f"{path}: severity 0.0 matrix for {kind.value} is not identity")
        if np.abs(m.sum(axis=2) - 1.0).max() > 1e-3:
            raise MissingMatrixData(f"{path}: {kind.value} matrix rows do not sum to 1")
    for m in mats.values():
        m.flags.writeable = False
    return CvdMatrixTable(version or "unversioned", mats)


def load_wave_table(path: str | Path | None = None) -> WaveTable:
    path = Path(path) if path is not None else data_path(WAVE_FILE)
    try:
        version, rows = _read_table(path)
        rows.sort(key=lambda r: int(r["index"]))
        codes = tuple(r["code"] for r in rows)
        colors = np.array([[int(r["r"]), int(r["g"]), int(r["b"])] for r in rows], dtype=np.int64)
        ratings = np.array([float(r["rating"]) for r in rows], dtype=np.float64)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise MissingWaveData(f"cannot load WAVE table from {path}: {exc}") from exc
    if len(rows) != 32:
        raise MissingWaveData(f"{path}: expected 32 palette entries, found {len(rows)}")
    if not np.isfinite(ratings).all() or np.ptp(ratings) <= 0:
        raise MissingWaveData(f"{path}: ratings must be finite and span a nonzero range")
    if colors.min() < 0 or colors.max() > 255:
        raise MissingWaveData(f"{path}: colour coordinates outside 0..255")
    return WaveTable(version or "unversioned", codes, colors, ratings)


@lru_cache(maxsize=8)
def _cached_cvd(path: str, mtime: float) -> CvdMatrixTable:
    return load_cvd_table(path)


@lru_cache(maxsize=8)
def _cached_wave(path: str, mtime: float) -> WaveTable:
    return load_wave_table(path)


def default_cvd_table() -> CvdMatrixTable:
    path = data_path(CVD_FILE)
    try:
        mtime = path.stat().st_mtime
    except OSError as exc:
        raise MissingMatrixData(f"CVD matrix file not found: {path}") from exc
    return _cached_cvd(str(path), mtime)


def default_wave_table() -> WaveTable:
    path = data_path(WAVE_FILE)
    try:
        mtime = path.stat().st_mtime
    except OSError as exc:
        raise MissingWaveData(f"WAVE table not found: {path}") from exc
    return _cached_wave(str(path), mtime)


_DECODE_LUT = srgb_decode(np.arange(256))


def _unique_colors(img: ImageRGB) -> tuple[np.ndarray, np.ndarray]:
    """Distinct colours of an image and their pixel counts."""
    p = img.pixels.reshape(-1, 3).astype(np.uint32)
    keys, counts = np.unique((p[:, 0] << 16) | (p[:, 1] << 8) | p[:, 2], return_counts=True)
    colors = np.stack([(keys >> 16) & 255, (keys >> 8) & 255, keys & 255], axis=1)
    return colors, counts


def simulate_cvd(
    img: ImageRGB,
    kind: CvdKind,
    cfg: AnalysisConfig | None = None,
    table: CvdMatrixTable | None = None,
) -> ImageRGB:
    """Simulate a colour vision deficiency in linear light."""
    cfg = cfg or AnalysisConfig()
    table = table or default_cvd_table()
    m = table.matrix(kind, cfg.cvd_severity)
    if np.array_equal(m, np.eye(3)):
        return img
    linear = _DECODE_LUT[img.pixels]
    return ImageRGB(srgb_encode(linear @ m.T))


def monochrome_view(img: ImageRGB) -> ImageGray:
    return to_grayscale(img)


def _nearest_palette_index(colors: np.ndarray, palette: np.ndarray) -> np.ndarray:
    pal = palette.astype(np.float64)
    pal_sq = (pal ** 2).sum(axis=1)
    out = np.empty(len(colors), dtype=np.intp)
    step = 1 << 16
    for start in range(0, len(colors), step):
        chunk = colors[start:start + step].astype(np.float64)
        # |c - p|^2 minus the per-row constant |c|^2; integer-valued, so exact in float64.
        d2 = pal_sq[None, :] - 2.0 * (chunk @ pal.T)
        # argmin returns the first minimum, i.e. lowest palette index on ties
        out[start:start + step] = np.argmin(d2, axis=1)
    return out


def wave_score(img: ImageRGB, table: WaveTable | None = None) -> float:
    """Mean palette preference over pixels, min-max scaled by the table's rating range."""
    table = table or default_wave_table()
    uniq, counts = _unique_colors(img)
    idx = _nearest_palette_index(uniq, table.colors)
    mean = float(np.dot(table.ratings[idx], counts)) / (img.width * img.height)
    lo, hi = float(table.ratings.min()), float(table.ratings.max())
    return min(1.0, max(0.0, (mean - lo) / (hi - lo)))


def colorfulness(img: ImageRGB) -> float:
    """Hasler-Süsstrunk colourfulness on gamma-encoded 8-bit values."""
    p = img.pixels.astype(np.float64)
    rg = p[..., 0] - p[..., 1]
    yb = 0.5 * (p[..., 0] + p[..., 1]) - p[..., 2]
    std_root = np.sqrt(rg.var() + yb.var())
    mean_root = np.sqrt(rg.mean() ** 2 + yb.mean() ** 2)
    return float(std_root + 0.3 * mean_root)


@dataclass(frozen=True)
class ColorScores:
    wave: float
    colorfulness: float


def color_scores(img: ImageRGB, table: WaveTable | None = None) -> ColorScores:
    return ColorScores(wave_score(img, table), colorfulness(img))


def table_versions() -> dict[str, str]:
    return {"cvd": default_cvd_table().version, "wave": default_wave_table().version}
