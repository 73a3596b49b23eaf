"""Calibration frame detection, background removal and fruit cropping."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from . import imgcore
from .errors import DegenerateHistogram, FrameNotFound, NoForeground

FRUIT_MARGIN_PX = 4
MIN_FOREGROUND_FRACTION = 0.001
CLEANUP_ELEMENT = imgcore.StructuringElement("disk", 3)


@dataclass(frozen=True)
class CalibrationResult:
    """Pixel scale plus, when a frame was found, its inner corners.

    ``frame_quad`` lists the inner corners clockwise from top-left in pixel-edge
    coordinates ``(x, y)``; ``None`` when the scale was supplied directly.
    """

    mm_per_pixel: float
    frame_quad: Optional[tuple[tuple[int, int], ...]] = None

    def __post_init__(self):
        if not self.mm_per_pixel > 0:
            raise ValueError("mm_per_pixel must be positive")

    @classmethod
    def from_scale(cls, mm_per_pixel: float) -> "CalibrationResult":
        return cls(mm_per_pixel=float(mm_per_pixel))

    @property
    def inner_box(self) -> Optional[tuple[int, int, int, int]]:
        """``(x0, y0, x1, y1)`` with exclusive upper bounds."""
        if self.frame_quad is None:
            return None
        xs = [p[0] for p in self.frame_quad]
        ys = [p[1] for p in self.frame_quad]
        return min(xs), min(ys), max(xs), max(ys)


@dataclass(frozen=True)
class BackgroundPolicy:
    sat_max: float = 0.15
    val_min: float = 0.70

    def __post_init__(self):
        for name in ("sat_max", "val_min"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class FruitView:
    crop: np.ndarray
    mask: np.ndarray
    gray: np.ndarray
    mm_per_pixel: float
    # (x0, y0) of the crop inside the segmented image
    offset: tuple[int, int] = (0, 0)


def detect_calibration_frame(img, frame_side_mm: float = 150.0) -> CalibrationResult:
    """Find the dark square calibration frame and derive millimeters per pixel.

    Dark pixels come from Otsu's threshold on the luma image. Every dark
    component enclosing a hole is a candidate; its hole's bounding box is the
    inner quad. The candidate with the largest enclosed area whose aspect
    ratio lies in [0.9, 1.1] wins.

    Raises
    ------
    FrameNotFound
        If no square dark ring is present.
    """
    gray = imgcore.to_grayscale(img)
    try:
        level = imgcore.otsu_threshold(gray)
    except DegenerateHistogram:
        raise FrameNotFound("image has a single gray level") from None
    dark = gray <= level
    labels, count = imgcore.connected_components(dark, connectivity=8)

    best = None
    best_area = 0
    for lab, slc in enumerate(ndimage.find_objects(labels), start=1):
        if slc is None:
            continue
        ring = labels[slc] == lab
        inside = ndimage.binary_fill_holes(ring) & ~ring
        area = int(inside.sum())
        if area == 0 or area <= best_area:
            continue
        rows = np.flatnonzero(inside.any(axis=1))
        cols = np.flatnonzero(inside.any(axis=0))
        h = rows[-1] - rows[0] + 1
        w = cols[-1] - cols[0] + 1
        if not 0.9 <= w / h <= 1.1:
            continue
        # reject ragged holes: a frame interior nearly fills its bounding box
        if area < 0.9 * w * h:
            continue
        y0 = slc[0].start + int(rows[0])
        x0 = slc[1].start + int(cols[0])
        best = (x0, y0, x0 + int(w), y0 + int(h))
        best_area = area

    if best is None:
        raise FrameNotFound("no square dark frame with aspect ratio in [0.9, 1.1]")
    x0, y0, x1, y1 = best
    side_px = ((x1 - x0) + (y1 - y0)) / 2.0
    quad = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    return CalibrationResult(mm_per_pixel=frame_side_mm / side_px, frame_quad=quad)


def crop_to_frame(img, cal: CalibrationResult) -> np.ndarray:
    rgb = imgcore.as_rgb(img)
    box = cal.inner_box
    if box is None:
        return rgb.copy()
    height, width = rgb.shape[:2]
    x0, y0, x1, y1 = box
    x0, y0 = max(0, x0), max(0, y0)
    x1, y1 = min(width, x1), min(height, y1)
    if x1 <= x0 or y1 <= y0:
        raise FrameNotFound("frame interior lies outside the image")
    return rgb[y0:y1, x0:x1].copy()


def background_mask(img, policy: BackgroundPolicy) -> np.ndarray:
    hsv = imgcore.rgb_to_hsv(img)
    return (hsv[..., 1] < policy.sat_max) & (hsv[..., 2] > policy.val_min)


def segment_fruit(
    img, policy: BackgroundPolicy = BackgroundPolicy(), cal: Optional[CalibrationResult] = None
) -> FruitView:
    """Separate the single fruit from the white background.

    Foreground is everything not matching the background policy. The largest
    8-connected component is kept, hole-filled, opened and closed with a
    radius-3 disk, then cropped to its bounding box plus a 4 px margin.

    Raises
    ------
    NoForeground
        If no component covers at least 0.1% of the image.
    """
    rgb = imgcore.as_rgb(img)
    mm_per_pixel = cal.mm_per_pixel if cal is not None else 1.0
    foreground = ~background_mask(rgb, policy)

    blob = imgcore.largest_component(foreground)
    min_px = MIN_FOREGROUND_FRACTION * foreground.size
    if blob.sum() < max(min_px, 1):
        raise NoForeground("no foreground component covers 0.1% of the image")

    mask = imgcore.fill_holes(blob)
    mask = imgcore.morph(mask, "open", CLEANUP_ELEMENT)
    mask = imgcore.morph(mask, "close", CLEANUP_ELEMENT)
    # opening can split a thin neck; keep the single largest piece
    mask = imgcore.fill_holes(imgcore.largest_component(mask))
    if not mask.any():
        raise NoForeground("foreground vanished under morphological cleanup")

    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    y0 = max(0, int(rows[0]) - FRUIT_MARGIN_PX)
    y1 = min(mask.shape[0], int(rows[-1]) + 1 + FRUIT_MARGIN_PX)
    x0 = max(0, int(cols[0]) - FRUIT_MARGIN_PX)
    x1 = min(mask.shape[1], int(cols[-1]) + 1 + FRUIT_MARGIN_PX)

    crop = rgb[y0:y1, x0:x1].copy()
    return FruitView(
        crop=crop,
        mask=mask[y0:y1, x0:x1].copy(),
        gray=imgcore.to_grayscale(crop),
        mm_per_pixel=float(mm_per_pixel),
        offset=(x0, y0),
    )


def fruit_view_from_image(
    img,
    policy: BackgroundPolicy = BackgroundPolicy(),
    frame_side_mm: float = 150.0,
    mm_per_pixel: Optional[float] = None,
) -> FruitView:
    """Full preprocessing chain: calibrate (or use the given scale), crop, segment."""
    if mm_per_pixel is not None:
        cal = CalibrationResult.from_scale(mm_per_pixel)
        inner = imgcore.as_rgb(img)
    else:
        cal = detect_calibration_frame(img, frame_side_mm)
        inner = crop_to_frame(img, cal)
    return segment_fruit(inner, policy, cal)
