"""Raster types, PNG I/O, resizing and colour-space primitives."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .errors import DecodeError, InputError, SchemaError


class ImageNotFound(InputError, FileNotFoundError):
    pass


def round_half_away(x):
    """Round to nearest integer, ties away from zero (np.round ties to even)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.uint8, copy=True, order="C")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ImageRGB:
    """8-bit RGB raster, shape (height, width, 3), read-only."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got shape {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if p.dtype != np.uint8:
            raise ValueError(f"expected uint8 samples, got {p.dtype}")
        object.__setattr__(self, "pixels", _frozen(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        return isinstance(other, ImageRGB) and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ImageGray:
    """8-bit single-channel raster, shape (height, width), read-only."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 2:
            raise ValueError(f"expected (H, W) array, got shape {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if p.dtype != np.uint8:
            raise ValueError(f"expected uint8 samples, got {p.dtype}")
        object.__setattr__(self, "pixels", _frozen(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        return isinstance(other, ImageGray) and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True)
class AnalysisConfig:
    congestion_distance: int = 4
    saliency_threshold: int = 64
    max_dimension: int = 1280
    cvd_severity: float = 1.0
    # Edge detector parameters; the defaults are what corpus scores assume.
    canny_sigma: float = 1.0
    canny_low: float = 50.0
    canny_high: float = 150.0

    def __post_init__(self):
        if int(self.congestion_distance) != self.congestion_distance or self.congestion_distance < 1:
            raise SchemaError("congestion_distance", "must be an integer >= 1")
        if not 0 <= self.saliency_threshold <= 255:
            raise SchemaError("saliency_threshold", "must be in [0, 255]")
        if self.max_dimension < 64:
            raise SchemaError("max_dimension", "must be >= 64")
        if not 0.0 <= self.cvd_severity <= 1.0:
            raise SchemaError("cvd_severity", "must be in [0, 1]")
        if self.canny_sigma <= 0:
            raise SchemaError("canny_sigma", "must be > 0")
        if not 0 <= self.canny_low <= self.canny_high:
            raise SchemaError("canny_low", "must satisfy 0 <= canny_low <= canny_high")

    @classmethod
    def from_mapping(cls, values: dict) -> "AnalysisConfig":
        known = {f for f in cls.__dataclass_fields__}
        for key in values:
            if key not in known:
                raise SchemaError(key, "unknown configuration key")
        return cls(**values)

    @classmethod
    def from_file(cls, path: str | Path) -> "AnalysisConfig":
        try:
            values = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InputError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise SchemaError(str(path), f"invalid JSON ({exc.msg})") from None
        if not isinstance(values, dict):
            raise SchemaError(str(path), "expected a JSON object")
        return cls.from_mapping(values)

    def fingerprint(self, table_versions: dict[str, str] | None = None) -> str:
        payload = {"config": asdict(self), "tables": dict(sorted((table_versions or {}).items()))}
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def load_image(path: str | Path) -> ImageRGB:
    """Decode a PNG into an RGB raster, compositing any alpha over white."""
    path = Path(path)
    if not path.is_file():
        raise ImageNotFound(f"image not found: {path}")
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise DecodeError(f"{path}: unsupported format {im.format!r} (PNG required)")
            im.load()
            rgba = np.asarray(im.convert("RGBA"), dtype=np.uint16)
    except DecodeError:
        raise
    except Exception as exc:  # Pillow raises a zoo of exception types on bad data
        raise DecodeError(f"{path}: cannot decode image ({exc})") from exc
    rgb, alpha = rgba[..., :3], rgba[..., 3:4]
    out = (rgb * alpha + 255 * (255 - alpha) + 127) // 255
    return ImageRGB(out.astype(np.uint8))


PNG_COMPRESS_LEVEL = 3


def save_png(img: ImageRGB | ImageGray, path: str | Path) -> Path:
    path = Path(path)
    Image.fromarray(np.ascontiguousarray(img.pixels)).save(path, format="PNG", compress_level=PNG_COMPRESS_LEVEL)
    return path


def analysis_size(width: int, height: int, max_dimension: int) -> tuple[int, int]:
    longest = max(width, height)
    if longest <= max_dimension:
        return width, height
    scale = max_dimension / longest
    new_w = max(1, int(round_half_away(width * scale)))
    new_h = max(1, int(round_half_away(height * scale)))
    return new_w, new_h


def resize_bilinear(pixels: np.ndarray, width: int, height: int) -> np.ndarray:
    return cv2.resize(pixels, (width, height), interpolation=cv2.INTER_LINEAR)


def resize_to_analysis(img: ImageRGB, cfg: AnalysisConfig) -> ImageRGB:
    w, h = analysis_size(img.width, img.height, cfg.max_dimension)
    if (w, h) == (img.width, img.height):
        return img
    return ImageRGB(resize_bilinear(img.pixels, w, h))


def to_grayscale(img: ImageRGB) -> ImageGray:
    # Integer form of 0.299R + 0.587G + 0.114B with ties rounded up (= away from zero here).
    p = img.pixels.astype(np.uint32)
    y = (299 * p[..., 0] + 587 * p[..., 1] + 114 * p[..., 2] + 500) // 1000
    return ImageGray(y.astype(np.uint8))


def srgb_decode(values) -> np.ndarray:
    """8-bit sRGB samples (any shape) to linear light in [0, 1]."""
    c = np.asarray(values, dtype=np.float64) / 255.0
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def srgb_encode(linear) -> np.ndarray:
    """Linear light to 8-bit sRGB; values are clamped to [0, 1] first."""
    x = np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0)
    c = np.where(x <= 0.0031308, 12.92 * x, 1.055 * np.power(x, 1.0 / 2.4) - 0.055)
    return round_half_away(c * 255.0).clip(0, 255).astype(np.uint8)


def gray_to_rgb(img: ImageGray) -> ImageRGB:
    return ImageRGB(np.repeat(img.pixels[..., None], 3, axis=2))


def mask_to_gray(mask: np.ndarray) -> ImageGray:
    return ImageGray(np.where(mask, 255, 0).astype(np.uint8))
