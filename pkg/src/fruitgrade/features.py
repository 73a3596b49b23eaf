"""The 59-slot feature vector: shape, color statistics, GLCM texture, defects, wrinkles."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from . import imgcore
from .errors import (
    DegenerateHistogram,
    DegenerateRegion,
    EmptyMask,
    EmptySamples,
    FruitGradeError,
    NoPairs,
)
from .segment import FruitView

SHAPE_NAMES = (
    "area_mm2",
    "perimeter_mm",
    "major_axis_mm",
    "minor_axis_mm",
    "equiv_diameter_mm",
    "solidity",
    "eccentricity",
)
RGB_CHANNELS = ("R", "G", "B", "r_norm", "g_norm", "b_norm", "r_minus_g", "g_minus_b", "r_minus_b")
MOMENT_NAMES = ("mean", "variance", "skewness", "kurtosis")
COLOR_NAMES = tuple(f"{stat}_{ch}" for stat in MOMENT_NAMES for ch in RGB_CHANNELS) + (
    "lab_L_mean",
    "lab_a_mean",
    "lab_b_mean",
    "hsv_H_mean",
    "hsv_S_mean",
    "hsv_V_mean",
    "ycbcr_Y_mean",
    "ycbcr_Cb_mean",
    "ycbcr_Cr_mean",
)
TEXTURE_NAMES = ("glcm_contrast", "glcm_correlation", "glcm_energy", "glcm_homogeneity")
DEFECT_NAMES = ("defect_ratio",)
WRINKLE_NAMES = ("wrinkle_count", "wrinkle_ratio")
FEATURE_NAMES: tuple[str, ...] = (
    SHAPE_NAMES + COLOR_NAMES + TEXTURE_NAMES + DEFECT_NAMES + WRINKLE_NAMES
)
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 59

# distance-1 neighbors at 0, 45, 90 and 135 degrees as (dx, dy), y pointing down
DEFAULT_OFFSETS = ((1, 0), (1, -1), (0, -1), (-1, -1))

_STEPS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))
_STEP_INDEX = {step: i for i, step in enumerate(_STEPS)}


@dataclass(frozen=True)
class RegionGeometry:
    area_px: int
    perimeter_px: float
    centroid: tuple[float, float]
    mu20: float
    mu02: float
    mu11: float
    convex_area_px: int


@dataclass(frozen=True)
class GlcmMatrix:
    levels: int
    probabilities: np.ndarray


@dataclass(frozen=True)
class ExtractionConfig:
    glcm_levels: int = 8
    glcm_offsets: tuple[tuple[int, int], ...] = DEFAULT_OFFSETS
    wrinkle_h: int = 10
    min_basin_px: int = 25
    v_defect: float = 0.25


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple[str, ...] = field(default=FEATURE_NAMES)

    def __post_init__(self):
        if self.values.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must hold {N_FEATURES} values")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


# --- shape ------------------------------------------------------------------


def boundary_length(mask) -> float:
    """Length of the outer boundary chain: straight steps 1, diagonal steps sqrt(2).

    Moore-neighbor tracing over pixel centers, stopped by Jacob's criterion.
    """
    m = imgcore.as_mask(mask)
    pts = np.argwhere(m)
    if len(pts) == 0:
        raise EmptyMask("mask has no foreground pixels")
    height, width = m.shape

    def inside(y, x):
        return 0 <= y < height and 0 <= x < width and m[y, x]

    start = (int(pts[0][0]), int(pts[0][1]))
    # the pixel west of the first raster pixel is background
    backtrack = 4
    current = start
    first_move = None
    length = 0.0
    for _ in range(8 * m.size + 8):
        y, x = current
        for i in range(8):
            d = (backtrack + i) % 8
            dy, dx = _STEPS[d]
            if inside(y + dy, x + dx):
                break
        else:
            return 0.0  # isolated pixel
        nxt = (y + dy, x + dx)
        prev_dir = (d - 1) % 8
        py, px = y + _STEPS[prev_dir][0], x + _STEPS[prev_dir][1]
        if current == start and first_move is not None and nxt == first_move:
            return length
        if first_move is None:
            first_move = nxt
        length += math.sqrt(2.0) if d % 2 else 1.0
        backtrack = _STEP_INDEX[(py - nxt[0], px - nxt[1])]
        current = nxt
    raise RuntimeError("boundary trace did not close")


def _cross(o, a, b) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Andrew's monotone chain on integer points; collinear points dropped."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower: list[tuple[int, int]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[int, int]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def hull_lattice_count(hull: Sequence[tuple[int, int]]) -> int:
    """Number of integer points inside or on a lattice polygon (Pick's theorem)."""
    n = len(hull)
    if n == 1:
        return 1
    if n == 2:
        (x0, y0), (x1, y1) = hull
        return math.gcd(abs(x1 - x0), abs(y1 - y0)) + 1
    twice_area = 0
    boundary = 0
    for i in range(n):
        x0, y0 = hull[i]
        x1, y1 = hull[(i + 1) % n]
        twice_area += x0 * y1 - x1 * y0
        boundary += math.gcd(abs(x1 - x0), abs(y1 - y0))
    # A = I + B/2 - 1  =>  I + B = A + B/2 + 1
    return (abs(twice_area) + boundary) // 2 + 1


def region_geometry(mask) -> RegionGeometry:
    m = imgcore.as_mask(mask)
    ys, xs = np.nonzero(m)
    area = len(ys)
    if area == 0:
        raise EmptyMask("mask has no foreground pixels")
    cx = xs.mean()
    cy = ys.mean()
    dx = xs - cx
    dy = ys - cy

    # hull candidates: first and last pixel of each occupied row
    candidates = []
    for y in np.unique(ys):
        row = xs[ys == y]
        candidates.append((int(row.min()), int(y)))
        candidates.append((int(row.max()), int(y)))
    convex_area = hull_lattice_count(convex_hull(candidates))

    return RegionGeometry(
        area_px=area,
        perimeter_px=boundary_length(m),
        centroid=(float(cx), float(cy)),
        mu20=float(np.sum(dx * dx)),
        mu02=float(np.sum(dy * dy)),
        mu11=float(np.sum(dx * dy)),
        convex_area_px=convex_area,
    )


def shape_features(geom: RegionGeometry, mm_per_pixel: float) -> np.ndarray:
    """Slots 1-7, millimeter-valued where the quantity has a length unit."""
    a = geom.area_px
    m20, m02, m11 = geom.mu20 / a, geom.mu02 / a, geom.mu11 / a
    common = math.sqrt((m20 - m02) ** 2 + 4 * m11 * m11)
    minor_sq = m20 + m02 - common
    if minor_sq <= 1e-12 * (m20 + m02 + common):
        raise DegenerateRegion("pixels are collinear; minor axis is zero")
    s = mm_per_pixel
    major = 2 * math.sqrt(2) * math.sqrt(m20 + m02 + common)
    minor = 2 * math.sqrt(2) * math.sqrt(minor_sq)
    return np.array(
        [
            a * s * s,
            geom.perimeter_px * s,
            major * s,
            minor * s,
            math.sqrt(4 * a / math.pi) * s,
            a / geom.convex_area_px,
            math.sqrt(max(0.0, 1 - (minor / major) ** 2)),
        ]
    )


# --- color ------------------------------------------------------------------


def channel_stats(samples) -> tuple[float, float, float, float]:
    """Population mean, variance, skewness and excess kurtosis.

    Zero-variance samples report skewness and kurtosis of 0.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptySamples("channel_stats needs at least one sample")
    if np.all(x == x[0]):
        return float(x[0]), 0.0, 0.0, 0.0
    mean = x.mean()
    d = x - mean
    d2 = d * d
    var = d2.mean()
    if var <= (1e-14 * max(1.0, abs(mean))) ** 2:
        return float(mean), float(var), 0.0, 0.0
    skew = (d2 * d).mean() / var**1.5
    kurt = (d2 * d2).mean() / (var * var) - 3.0
    return float(mean), float(var), float(skew), float(kurt)


def rgb_channels(pixels: np.ndarray) -> np.ndarray:
    """The 9 RGB-derived channels for ``(N, 3)`` pixels, returned as ``(9, N)``."""
    p = pixels.astype(np.float64)
    r, g, b = p[:, 0], p[:, 1], p[:, 2]
    total = r + g + b
    safe = np.where(total > 0, total, 1.0)
    norm = [np.where(total > 0, c / safe, 0.0) for c in (r, g, b)]
    return np.stack([r, g, b, *norm, r - g, g - b, r - b])


def circular_mean_deg(angles_deg) -> float:
    rad = np.deg2rad(np.asarray(angles_deg, dtype=np.float64))
    s, c = np.sin(rad).mean(), np.cos(rad).mean()
    if abs(s) < 1e-15 and abs(c) < 1e-15:
        return 0.0
    return float(np.rad2deg(math.atan2(s, c)) % 360.0)


def color_features(view: FruitView) -> np.ndarray:
    """Slots 8-52 over masked pixels only."""
    mask = imgcore.as_mask(view.mask)
    if not mask.any():
        raise EmptyMask("fruit mask is empty")
    pixels = view.crop[mask]
    stats = np.array([channel_stats(ch) for ch in rgb_channels(pixels)])  # (9, 4)
    # stat-major: all means, then all variances, ...
    rgb_part = stats.T.ravel()

    sample = pixels[np.newaxis]
    lab = imgcore.rgb_to_lab(sample)[0].mean(axis=0)
    hsv = imgcore.rgb_to_hsv(sample)[0]
    hsv_means = [circular_mean_deg(hsv[:, 0]), hsv[:, 1].mean(), hsv[:, 2].mean()]
    ycc = imgcore.rgb_to_ycbcr(sample)[0].mean(axis=0)
    return np.concatenate([rgb_part, lab, hsv_means, ycc])


# --- texture ----------------------------------------------------------------


def quantize(gray, levels: int) -> np.ndarray:
    return (imgcore.as_gray(gray).astype(np.int64) * levels) // 256


def compute_glcm(gray, mask, levels: int = 8, offsets=DEFAULT_OFFSETS) -> GlcmMatrix:
    """Symmetric, normalized co-occurrence matrix over in-mask pixel pairs.

    Raises
    ------
    NoPairs
        If no pair of in-mask pixels matches any offset.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    q = quantize(gray, levels)
    m = imgcore.as_mask(mask)
    if m.shape != q.shape:
        raise ValueError("gray image and mask shapes differ")
    height, width = q.shape
    counts = np.zeros((levels, levels), dtype=np.int64)
    for dx, dy in offsets:
        if dx == 0 and dy == 0:
            raise ValueError("GLCM offsets must be nonzero")
        if abs(dx) >= width or abs(dy) >= height:
            continue
        ys = slice(max(0, -dy), height - max(0, dy))
        xs = slice(max(0, -dx), width - max(0, dx))
        ys2 = slice(max(0, dy), height + min(0, dy))
        xs2 = slice(max(0, dx), width + min(0, dx))
        both = m[ys, xs] & m[ys2, xs2]
        a = q[ys, xs][both]
        b = q[ys2, xs2][both]
        np.add.at(counts, (a, b), 1)
    counts = counts + counts.T
    total = counts.sum()
    if total == 0:
        raise NoPairs("no in-mask pixel pairs for the given offsets")
    return GlcmMatrix(levels=levels, probabilities=counts / total)


def texture_features(glcm: GlcmMatrix) -> np.ndarray:
    """Contrast, correlation, energy, homogeneity (slots 53-56)."""
    p = glcm.probabilities
    i, j = np.indices(p.shape)
    contrast = float(np.sum((i - j) ** 2 * p))
    energy = float(np.sum(p * p))
    homogeneity = float(np.sum(p / (1.0 + np.abs(i - j))))
    mu_i = np.sum(i * p)
    mu_j = np.sum(j * p)
    sd_i = math.sqrt(np.sum((i - mu_i) ** 2 * p))
    sd_j = math.sqrt(np.sum((j - mu_j) ** 2 * p))
    if sd_i * sd_j < 1e-12:
        correlation = 0.0
    else:
        correlation = float(np.sum((i - mu_i) * (j - mu_j) * p) / (sd_i * sd_j))
        correlation = min(1.0, max(-1.0, correlation))
    return np.array([contrast, correlation, energy, homogeneity])


# --- defects and wrinkles ---------------------------------------------------


def defect_feature(view: FruitView, v_defect: float = 0.25) -> float:
    mask = imgcore.as_mask(view.mask)
    area = int(mask.sum())
    if area == 0:
        raise EmptyMask("fruit mask is empty")
    value = imgcore.rgb_to_hsv(view.crop)[..., 2]
    return float(np.count_nonzero(mask & (value < v_defect)) / area)


def wrinkle_regions(gray, mask, h: int = 10, min_basin_px: int = 25) -> list[np.ndarray]:
    """Segment wrinkle grooves with h-minima markers and watershed flooding.

    1. Gray opening with a radius-2 disk removes specular specks.
    2. Pixels outside the fruit are set to the median fruit intensity and the
       relief is passed through h-minima, leaving only minima at least ``h``
       deep. Minima touching the fruit outline are discarded.
    3. The surviving minima plus the whole outside region seed a watershed.
    4. Within each inner basin, pixels darker than the masked Otsu level form
       the wrinkle; it counts if its marker is darker than that level and the
       wrinkle covers at least ``min_basin_px`` pixels.
    """
    m = imgcore.as_mask(mask)
    if not m.any():
        raise EmptyMask("fruit mask is empty")
    opened = ndimage.grey_opening(
        imgcore.as_gray(gray), footprint=imgcore.StructuringElement("disk", 2).footprint()
    )
    try:
        level = imgcore.otsu_threshold(opened, m)
    except DegenerateHistogram:
        return []

    relief = opened.copy()
    relief[~m] = np.uint8(np.median(opened[m]))
    minima = imgcore.regional_minima(imgcore.h_minima(relief, h)) & m
    touching = ndimage.binary_dilation(~m, structure=np.ones((3, 3), bool))
    labels, count = imgcore.connected_components(minima, connectivity=8)
    if count == 0:
        return []
    bad = np.unique(labels[touching & (labels > 0)])
    markers = np.zeros_like(labels)
    inner = 0
    marker_min = {}
    for lab in range(1, count + 1):
        if lab in bad:
            continue
        region = labels == lab
        inner += 1
        markers[region] = inner
        marker_min[inner] = int(opened[region].min())
    if inner == 0:
        return []
    outside = inner + 1
    markers[~m] = outside

    basins = imgcore.watershed(relief, markers)
    dark = m & (opened <= level)
    regions = []
    for lab in range(1, inner + 1):
        if marker_min[lab] >= level:
            continue
        wrinkle = (basins == lab) & dark
        if wrinkle.sum() >= min_basin_px:
            regions.append(wrinkle)
    return regions


def wrinkle_features(view: FruitView, h: int = 10, min_basin_px: int = 25) -> tuple[float, float]:
    """(wrinkle_count, wrinkle_ratio) for slots 58-59."""
    area = int(imgcore.as_mask(view.mask).sum())
    if area == 0:
        raise EmptyMask("fruit mask is empty")
    regions = wrinkle_regions(view.gray, view.mask, h, min_basin_px)
    total = sum(int(r.sum()) for r in regions)
    return float(len(regions)), min(1.0, total / area)


def extract_all(view: FruitView, cfg: ExtractionConfig = ExtractionConfig()) -> FeatureVector:
    geom = region_geometry(view.mask)
    shape = shape_features(geom, view.mm_per_pixel)
    color = color_features(view)
    glcm = compute_glcm(view.gray, view.mask, cfg.glcm_levels, cfg.glcm_offsets)
    texture = texture_features(glcm)
    defect = defect_feature(view, cfg.v_defect)
    wrinkles = wrinkle_features(view, cfg.wrinkle_h, cfg.min_basin_px)
    values = np.concatenate([shape, color, texture, [defect], wrinkles])
    if not np.all(np.isfinite(values)):
        bad = [n for n, v in zip(FEATURE_NAMES, values) if not math.isfinite(v)]
        raise FruitGradeError(f"non-finite features: {', '.join(bad)}")
    return FeatureVector(values=values)


# --- feature CSV ------------------------------------------------------------


def write_feature_csv(path, rows: Sequence[tuple[np.ndarray, str]]) -> None:
    """Write the interchange CSV: 59 named columns plus ``label``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(FEATURE_NAMES) + ["label"])
        for values, label in rows:
            writer.writerow([repr(float(v)) for v in values] + [label])


def read_feature_csv(path) -> tuple[np.ndarray, list[str], list[str]]:
    """Return ``(features, labels, names)`` from a feature CSV."""
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FruitGradeError(f"{path}: empty feature file") from None
        if not header or header[-1] != "label":
            raise FruitGradeError(f"{path}: last column must be 'label'")
        names = header[:-1]
        features, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FruitGradeError(f"{path}:{lineno}: expected {len(header)} columns")
            try:
                features.append([float(v) for v in row[:-1]])
            except ValueError as exc:
                raise FruitGradeError(f"{path}:{lineno}: {exc}") from None
            labels.append(row[-1])
    if not features:
        raise FruitGradeError(f"{path}: no data rows")
    x = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise FruitGradeError(f"{path}: non-finite feature values")
    return x, labels, names
