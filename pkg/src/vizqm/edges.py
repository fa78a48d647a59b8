"""Colour-aware edge detection and the edge-congestion clutter score."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imagecore import AnalysisConfig, ImageGray, ImageRGB, mask_to_gray

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

GRADIENT_DECIMALS = 6

_TAN_22_5 = math.tan(math.radians(22.5))
_TAN_67_5 = math.tan(math.radians(67.5))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=bool, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class EdgeMap:
    mask: np.ndarray
    channel_masks: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        chans = tuple(_readonly(m) for m in self.channel_masks)
        if len(chans) != 3 or any(c.shape != chans[0].shape for c in chans):
            raise ValueError("need three channel masks of identical shape")
        mask = _readonly(self.mask)
        if mask.shape != chans[0].shape:
            raise ValueError("mask shape does not match channel masks")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "channel_masks", chans)

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "EdgeMap":
        """Wrap a bare boolean mask (all three channels set to it)."""
        mask = np.asarray(mask, dtype=bool)
        return cls(mask, (mask, mask, mask))

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def edge_count(self) -> int:
        return int(self.mask.sum())

    def overlay(self) -> ImageGray:
        return mask_to_gray(self.mask)


@dataclass(frozen=True, eq=False)
class CongestionResult:
    congested: np.ndarray
    score: float
    overlay: ImageGray
    edge_count: int
    congested_count: int


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _gradients(channel: np.ndarray, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    k = gaussian_kernel(sigma)
    blurred = ndimage.correlate1d(channel, k, axis=0, mode="mirror")
    blurred = ndimage.correlate1d(blurred, k, axis=1, mode="mirror")
    diff = np.array([-1.0, 0.0, 1.0])
    smooth = np.array([1.0, 2.0, 1.0])
    gx = ndimage.correlate1d(ndimage.correlate1d(blurred, diff, axis=1, mode="mirror"), smooth, axis=0, mode="mirror")
    gy = ndimage.correlate1d(ndimage.correlate1d(blurred, diff, axis=0, mode="mirror"), smooth, axis=1, mode="mirror")
    return gx, gy


def _non_max_suppression(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    # Quantize so exact plateau ties stay ties regardless of summation order.
    gx = np.round(gx, GRADIENT_DECIMALS)
    gy = np.round(gy, GRADIENT_DECIMALS)
    mag = np.round(np.hypot(gx, gy), GRADIENT_DECIMALS)
    ax, ay = np.abs(gx), np.abs(gy)
    horiz = ay <= _TAN_22_5 * ax
    vert = ay >= _TAN_67_5 * ax
    # Step towards the neighbour the gradient points at; which axes move depends on the sector.
    dx = np.where(vert, 0, np.sign(gx)).astype(np.intp)
    dy = np.where(horiz, 0, np.sign(gy)).astype(np.intp)

    h, w = mag.shape
    padded = np.pad(mag, 1)
    yy, xx = np.indices((h, w))
    forward = padded[yy + 1 + dy, xx + 1 + dx]
    backward = padded[yy + 1 - dy, xx + 1 - dx]
    # Strict on one side only, so a symmetric two-pixel ridge thins to one pixel.
    keep = (mag > 0) & (mag >= forward) & (mag > backward)
    return np.where(keep, mag, 0.0)


def _hysteresis(nms: np.ndarray, low: float, high: float) -> np.ndarray:
    candidates = nms >= low
    candidates &= nms > 0
    labels, n = ndimage.label(candidates, structure=EIGHT_CONNECTED)
    if n == 0:
        return np.zeros_like(candidates)
    strong = np.zeros(n + 1, dtype=bool)
    strong[np.unique(labels[candidates & (nms >= high)])] = True
    strong[0] = False
    return strong[labels]


def canny(channel: np.ndarray, sigma: float = 1.0, low: float = 50.0, high: float = 150.0) -> np.ndarray:
    """Canny edges of one 8-bit channel.

    Thresholds apply to the L2 Sobel gradient magnitude of the blurred channel,
    with samples on their native 0-255 scale.
    """
    gx, gy = _gradients(np.asarray(channel, dtype=np.float64), sigma)
    return _hysteresis(_non_max_suppression(gx, gy), low, high)


def detect_edges(img: ImageRGB, cfg: AnalysisConfig | None = None) -> EdgeMap:
    cfg = cfg or AnalysisConfig()
    chans = tuple(
        canny(img.pixels[..., c], cfg.canny_sigma, cfg.canny_low, cfg.canny_high) for c in range(3)
    )
    return EdgeMap(chans[0] | chans[1] | chans[2], chans)


def congested_mask(mask: np.ndarray, distance: int) -> np.ndarray:
    """Edge pixels with a pixel of a different 8-connected component within Chebyshev `distance`."""
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=EIGHT_CONNECTED)
    if n < 2:
        return np.zeros_like(mask)
    size = 2 * distance + 1
    sentinel = n + 1
    lo = ndimage.minimum_filter(np.where(mask, labels, sentinel), size=size, mode="constant", cval=sentinel)
    hi = ndimage.maximum_filter(labels, size=size, mode="constant", cval=0)
    # Any label in the window other than our own shows up as a smaller min or a larger max.
    return mask & ((lo < labels) | (hi > labels))


def edge_congestion(edges: EdgeMap, cfg: AnalysisConfig | None = None) -> CongestionResult:
    cfg = cfg or AnalysisConfig()
    congested = congested_mask(edges.mask, int(cfg.congestion_distance))
    n_edges = edges.edge_count
    n_cong = int(congested.sum())
    score = n_cong / n_edges if n_edges else 0.0
    return CongestionResult(
        congested=_readonly(congested),
        score=float(score),
        overlay=mask_to_gray(congested),
        edge_count=n_edges,
        congested_count=n_cong,
    )
