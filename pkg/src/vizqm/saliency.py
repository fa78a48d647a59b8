"""Itti-Koch fine-detail saliency and the thresholded salient-pixel score.

The pipeline follows the classic model: dyadic Gaussian pyramids over intensity,
colour-opponent and orientation features, centre-surround differences, the
(1 - mean local max)^2 map normalization, across-scale addition at level 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import cv2
import numpy as np

from .imagecore import AnalysisConfig, ImageGray, ImageRGB, mask_to_gray, round_half_away

PYRAMID_LEVELS = 9
CENTER_LEVELS = (2, 3, 4)
SURROUND_DELTAS = (3, 4)
SUM_LEVEL = 4
ORIENTATIONS = (0.0, 45.0, 90.0, 135.0)
LOCAL_MAX_BLOCK = 8
MIN_SHORT_SIDE = 128

GABOR_WAVELENGTH = 7.0
GABOR_SIGMA = 2.8
GABOR_ASPECT = 1.0
GABOR_SIZE = 9


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    values: np.ndarray  # uint8 (H, W)
    intensity: np.ndarray  # conspicuity maps at the summation level, float
    color: np.ndarray
    orientation: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        for name in ("values", "intensity", "color", "orientation"):
            a = np.array(getattr(self, name), copy=True)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def image(self) -> ImageGray:
        return ImageGray(self.values)


@dataclass(frozen=True, eq=False)
class SaliencyScore:
    score: float
    threshold: int
    mask: np.ndarray = field(repr=False)

    def mask_image(self) -> ImageGray:
        return mask_to_gray(self.mask)


def gabor_kernels(theta_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Even (zero-mean cosine) and odd (sine) Gabor kernels at one orientation."""
    half = GABOR_SIZE // 2
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    t = math.radians(theta_deg)
    xr = x * math.cos(t) + y * math.sin(t)
    yr = -x * math.sin(t) + y * math.cos(t)
    env = np.exp(-(xr ** 2 + (GABOR_ASPECT * yr) ** 2) / (2.0 * GABOR_SIGMA ** 2))
    phase = 2.0 * math.pi * xr / GABOR_WAVELENGTH
    even = env * np.cos(phase)
    even -= env * (even.sum() / env.sum())
    odd = env * np.sin(phase)
    norm = np.abs(even).sum()
    return even / norm, odd / norm


def _pyramid(channel: np.ndarray) -> list[np.ndarray]:
    levels = [channel]
    for _ in range(1, PYRAMID_LEVELS):
        levels.append(cv2.pyrDown(levels[-1], borderType=cv2.BORDER_REFLECT_101))
    return levels


def _resize(a: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if a.shape == shape:
        return a
    return cv2.resize(a, (shape[1], shape[0]), interpolation=cv2.INTER_LINEAR)


def _center_surround(center_pyr, surround_pyr=None):
    surround_pyr = center_pyr if surround_pyr is None else surround_pyr
    maps = []
    for c in CENTER_LEVELS:
        for delta in SURROUND_DELTAS:
            s = c + delta
            maps.append(np.abs(center_pyr[c] - _resize(surround_pyr[s], center_pyr[c].shape)))
    return maps


def normalize_map(m: np.ndarray) -> np.ndarray:
    """N(.): scale to [0, 1], then weight by (1 - mean of the other local maxima)^2.

    Local maxima are block maxima over non-overlapping 8x8 tiles; the tile holding
    the global maximum is left out of the mean.
    """
    lo, hi = float(m.min()), float(m.max())
    if not hi - lo > 1e-12 * max(1.0, abs(hi)):
        return np.zeros_like(m)
    scaled = (m - lo) / (hi - lo)
    h, w = scaled.shape
    b = LOCAL_MAX_BLOCK
    ph, pw = -(-h // b) * b, -(-w // b) * b
    padded = np.full((ph, pw), -np.inf)
    padded[:h, :w] = scaled
    block_max = padded.reshape(ph // b, b, pw // b, b).max(axis=(1, 3)).ravel()
    gy, gx = np.unravel_index(int(np.argmax(scaled)), scaled.shape)
    others = np.delete(block_max, (gy // b) * (pw // b) + gx // b)
    mean_local = float(others.mean()) if others.size else 0.0
    return scaled * (1.0 - mean_local) ** 2


def _across_scale_sum(maps: list[np.ndarray], shape: tuple[int, int]) -> np.ndarray:
    total = np.zeros(shape)
    for m in maps:
        total += _resize(m, shape)
    return total


def _analysis_raster(rgb: np.ndarray) -> np.ndarray:
    while min(rgb.shape[:2]) < MIN_SHORT_SIDE:
        h, w = rgb.shape[:2]
        rgb = cv2.resize(rgb, (2 * w, 2 * h), interpolation=cv2.INTER_LINEAR)
    return rgb


def _opponent_channels(rgb: np.ndarray):
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    intensity = (r + g + b) / 3.0
    # Hue is meaningless at low luminance; decouple colour from intensity elsewhere.
    valid = intensity > 0.1 * intensity.max()
    denom = np.where(valid, intensity, 1.0)
    rn, gn, bn = (np.where(valid, ch / denom, 0.0) for ch in (r, g, b))
    red = np.maximum(rn - (gn + bn) / 2.0, 0.0)
    green = np.maximum(gn - (rn + bn) / 2.0, 0.0)
    blue = np.maximum(bn - (rn + gn) / 2.0, 0.0)
    yellow = np.maximum((rn + gn) / 2.0 - np.abs(rn - gn) / 2.0 - bn, 0.0)
    return intensity, red, green, blue, yellow


def _intensity_conspicuity(intensity_pyr, shape):
    return _across_scale_sum([normalize_map(m) for m in _center_surround(intensity_pyr)], shape)


def _color_conspicuity(rgb_levels, shape):
    red, green, blue, yellow = rgb_levels
    rg = _pyramid(red - green)
    by = _pyramid(blue - yellow)
    maps = [normalize_map(a) + normalize_map(b) for a, b in zip(_center_surround(rg), _center_surround(by))]
    return _across_scale_sum(maps, shape)


def _orientation_conspicuity(intensity_pyr, shape):
    total = np.zeros(shape)
    for theta in ORIENTATIONS:
        even, odd = gabor_kernels(theta)
        responses = [
            np.hypot(
                cv2.filter2D(level, cv2.CV_64F, even, borderType=cv2.BORDER_REFLECT_101),
                cv2.filter2D(level, cv2.CV_64F, odd, borderType=cv2.BORDER_REFLECT_101),
            )
            for level in intensity_pyr
        ]
        maps = [normalize_map(m) for m in _center_surround(responses)]
        total += normalize_map(_across_scale_sum(maps, shape))
    return total


def compute_saliency(img: ImageRGB) -> SaliencyMap:
    height, width = img.height, img.width
    px = img.pixels
    if (px == px[0, 0]).all():
        zeros = np.zeros((1, 1))
        return SaliencyMap(np.zeros((height, width), np.uint8), zeros, zeros, zeros, degenerate=True)

    rgb = _analysis_raster(px.astype(np.float64) / 255.0)
    intensity, red, green, blue, yellow = _opponent_channels(rgb)
    intensity_pyr = _pyramid(intensity)
    shape = intensity_pyr[SUM_LEVEL].shape

    i_bar = _intensity_conspicuity(intensity_pyr, shape)
    c_bar = _color_conspicuity((red, green, blue, yellow), shape)
    o_bar = _orientation_conspicuity(intensity_pyr, shape)
    combined = (normalize_map(i_bar) + normalize_map(c_bar) + normalize_map(o_bar)) / 3.0

    full = cv2.resize(combined, (width, height), interpolation=cv2.INTER_LINEAR)
    lo, hi = float(full.min()), float(full.max())
    if not hi - lo > 1e-12:
        return SaliencyMap(np.zeros((height, width), np.uint8), i_bar, c_bar, o_bar, degenerate=True)
    values = round_half_away((full - lo) / (hi - lo) * 255.0).astype(np.uint8)
    return SaliencyMap(values, i_bar, c_bar, o_bar)


def saliency_score(smap: SaliencyMap, cfg: AnalysisConfig | None = None) -> SaliencyScore:
    cfg = cfg or AnalysisConfig()
    threshold = int(cfg.saliency_threshold)
    mask = smap.values >= threshold
    mask.flags.writeable = False
    return SaliencyScore(float(mask.sum()) / mask.size, threshold, mask)


def spectral_residual_saliency(img: ImageRGB, working_width: int = 64) -> ImageGray:
    """Low-resolution spectral-residual saliency (Hou & Zhang), as a coarse companion map.

    Not part of the scored metrics.
    """
    gray = img.pixels.astype(np.float64).mean(axis=2) / 255.0
    h, w = gray.shape
    ww = min(working_width, w)
    wh = max(1, int(round_half_away(h * ww / w)))
    small = cv2.resize(gray, (ww, wh), interpolation=cv2.INTER_AREA)
    spectrum = np.fft.fft2(small)
    log_amp = np.log(np.abs(spectrum) + 1e-12)
    phase = np.angle(spectrum)
    residual = log_amp - cv2.blur(log_amp, (3, 3), borderType=cv2.BORDER_REFLECT_101)
    sal = np.abs(np.fft.ifft2(np.exp(residual + 1j * phase))) ** 2
    sal = cv2.GaussianBlur(sal, (0, 0), 2.5)
    full = cv2.resize(sal, (w, h), interpolation=cv2.INTER_LINEAR)
    lo, hi = float(full.min()), float(full.max())
    if not hi - lo > 1e-12 or (img.pixels == img.pixels[0, 0]).all():
        return ImageGray(np.zeros((h, w), np.uint8))
    return ImageGray(round_half_away((full - lo) / (hi - lo) * 255.0).astype(np.uint8))
