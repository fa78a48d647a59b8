"""Procedural characterization image: coloured discs, black text and thin clutter lines on white."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .imagecore import ImageRGB

WIDTH, HEIGHT = 800, 600

DISCS = {
    "red": ((230, 30, 30), (130, 130)),
    "green": ((20, 170, 50), (330, 130)),
    "blue": ((30, 60, 220), (530, 130)),
    "yellow": ((250, 230, 20), (700, 260)),
}
DISC_RADIUS = 45

TEXT_LINES = ("Quarterly rainfall", "by region, 2019-2021", "mm per month")
TEXT_ORIGIN = (60, 300)
TEXT_SIZE = 26
TEXT_LINE_STEP = 38

CLUTTER_BOX = (400, 380, 760, 570)
CLUTTER_SPACING = 5
CLUTTER_GREY = 140


@dataclass(frozen=True, eq=False)
class TestImage:
    image: ImageRGB
    disc_masks: dict[str, np.ndarray]
    text_mask: np.ndarray
    clutter_mask: np.ndarray

    @property
    def disc_mask(self) -> np.ndarray:
        return np.logical_or.reduce(list(self.disc_masks.values()))


def _font(size: int):
    try:
        return ImageFont.load_default(size=size)
    except TypeError:  # Pillow without FreeType-backed default font
        return ImageFont.load_default()


def _region(draw_fn) -> np.ndarray:
    layer = Image.new("L", (WIDTH, HEIGHT), 0)
    draw_fn(ImageDraw.Draw(layer))
    return np.asarray(layer) > 0


def generate() -> TestImage:
    canvas = Image.new("RGB", (WIDTH, HEIGHT), (255, 255, 255))
    draw = ImageDraw.Draw(canvas)

    x0, y0, x1, y1 = CLUTTER_BOX
    # Thin light hatching: closely spaced but disjoint lines standing in for gridline clutter.
    for y in range(y0, y1 + 1, CLUTTER_SPACING):
        draw.line([(x0, y), (x1, y)], fill=(CLUTTER_GREY,) * 3, width=1)

    disc_masks = {}
    for name, (colour, (cx, cy)) in DISCS.items():
        bbox = [cx - DISC_RADIUS, cy - DISC_RADIUS, cx + DISC_RADIUS, cy + DISC_RADIUS]
        draw.ellipse(bbox, fill=colour)
        disc_masks[name] = _region(lambda d, b=bbox: d.ellipse(b, fill=255))

    font = _font(TEXT_SIZE)
    text_boxes = []
    for i, line in enumerate(TEXT_LINES):
        pos = (TEXT_ORIGIN[0], TEXT_ORIGIN[1] + i * TEXT_LINE_STEP)
        draw.text(pos, line, fill=(0, 0, 0), font=font)
        text_boxes.append(draw.textbbox(pos, line, font=font))

    text_mask = _region(lambda d: [d.rectangle(b, fill=255) for b in text_boxes])
    clutter_mask = _region(lambda d: d.rectangle(CLUTTER_BOX, fill=255))
    return TestImage(ImageRGB(np.asarray(canvas)), disc_masks, text_mask, clutter_mask)
