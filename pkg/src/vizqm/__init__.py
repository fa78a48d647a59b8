"""Visualization quality metrics with corpus ranking and feedback reports."""

__version__ = "0.1.0"

from .imagecore import AnalysisConfig, ImageGray, ImageRGB, load_image, to_grayscale  # noqa: E402

__all__ = ["AnalysisConfig", "ImageGray", "ImageRGB", "__version__", "load_image", "to_grayscale"]
