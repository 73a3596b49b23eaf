"""Pixel-level kernels: rasters, color spaces, thresholding, morphology, watershed.

Rasters are plain numpy arrays:

* RGB image   -- ``(H, W, 3)`` uint8
* gray image  -- ``(H, W)`` uint8
* binary mask -- ``(H, W)`` bool, True = foreground
* label map   -- ``(H, W)`` int32, 0 = background / watershed ridge

Every function is pure and returns fresh arrays.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from PIL import Image
from scipy import ndimage
from skimage.morphology import reconstruction

from .errors import DegenerateHistogram, NoMarkers

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# sRGB primaries, D65 white
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65_WHITE = _RGB_TO_XYZ.sum(axis=1)


def as_rgb(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected (H, W, 3) RGB raster, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("RGB channel values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def as_gray(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected (H, W) gray raster, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("gray values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def as_mask(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"expected (H, W) mask, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def to_grayscale(img) -> np.ndarray:
    """BT.601 luma, rounded half-up to the nearest integer."""
    rgb = as_rgb(img).astype(np.float64)
    luma = rgb @ np.array(LUMA_WEIGHTS)
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def otsu_threshold(img, mask=None) -> int:
    """Otsu's threshold of a gray raster, optionally restricted to ``mask``.

    Foreground convention is ``pixel > t``. The between-class variance is
    compared in exact integer arithmetic so ties resolve to the smallest
    maximizing ``t`` regardless of floating-point rounding.

    Raises
    ------
    DegenerateHistogram
        If the considered pixels hold fewer than two distinct values.
    """
    gray = as_gray(img)
    values = gray[as_mask(mask)] if mask is not None else gray.ravel()
    hist = np.bincount(values, minlength=256).astype(np.int64)
    if np.count_nonzero(hist) < 2:
        raise DegenerateHistogram("need at least two distinct gray levels")

    counts = [int(c) for c in np.cumsum(hist)]
    sums = [int(s) for s in np.cumsum(hist * np.arange(256))]
    n_total, s_total = counts[-1], sums[-1]

    best_t, best_num, best_den = 0, 0, 1
    for t in range(255):
        n0, s0 = counts[t], sums[t]
        n1, s1 = n_total - n0, s_total - s0
        if n0 == 0 or n1 == 0:
            continue
        # sigma_b^2 * n_total^2 = (n1*s0 - n0*s1)^2 / (n0*n1)
        num = (n1 * s0 - n0 * s1) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def binarize(img, level: int) -> np.ndarray:
    if not 0 <= level <= 255:
        raise ValueError("level must lie in [0, 255]")
    return as_gray(img) > level


@dataclass(frozen=True)
class StructuringElement:
    shape: Literal["disk", "square"] = "disk"
    radius: int = 3

    def __post_init__(self):
        if self.shape not in ("disk", "square"):
            raise ValueError(f"unknown structuring element shape {self.shape!r}")
        if self.radius < 1:
            raise ValueError("structuring element radius must be >= 1")

    def footprint(self) -> np.ndarray:
        r = self.radius
        if self.shape == "square":
            return np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
        yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
        return xx * xx + yy * yy <= r * r


def morph(mask, op: str, se: StructuringElement = StructuringElement()) -> np.ndarray:
    """Binary erode / dilate / open / close.

    Out-of-image neighbors count as background. Opening and closing run on a
    background-padded copy so that closing stays extensive and opening
    anti-extensive right up to the image border.
    """
    m = as_mask(mask)
    fp = se.footprint()
    if op == "erode":
        return ndimage.binary_erosion(m, structure=fp, border_value=0)
    if op == "dilate":
        return ndimage.binary_dilation(m, structure=fp, border_value=0)
    if op not in ("open", "close"):
        raise ValueError(f"unknown morphology op {op!r}")

    r = se.radius
    padded = np.pad(m, r, constant_values=False)
    if op == "open":
        out = ndimage.binary_dilation(
            ndimage.binary_erosion(padded, structure=fp, border_value=0), structure=fp, border_value=0
        )
    else:
        out = ndimage.binary_erosion(
            ndimage.binary_dilation(padded, structure=fp, border_value=0), structure=fp, border_value=0
        )
    return out[r:-r, r:-r]


def fill_holes(mask) -> np.ndarray:
    return ndimage.binary_fill_holes(as_mask(mask))


def _connectivity_structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    if connectivity == 8:
        return ndimage.generate_binary_structure(2, 2)
    raise ValueError("connectivity must be 4 or 8")


def connected_components(mask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label maximal connected foreground regions 1..count in raster order."""
    labels, count = ndimage.label(as_mask(mask), structure=_connectivity_structure(connectivity))
    return labels.astype(np.int32), int(count)


def largest_component(mask, connectivity: int = 8) -> np.ndarray:
    labels, count = connected_components(mask, connectivity)
    if count == 0:
        return np.zeros_like(labels, dtype=bool)
    sizes = np.bincount(labels.ravel())[1:]
    # argmax picks the lowest label among equal sizes
    return labels == int(np.argmax(sizes)) + 1


# --- color spaces -----------------------------------------------------------


def rgb_to_hsv(img) -> np.ndarray:
    """H in degrees [0, 360), S and V in [0, 1]; achromatic pixels get H = 0."""
    rgb = as_rgb(img).astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    vmax = rgb.max(axis=-1)
    vmin = rgb.min(axis=-1)
    delta = vmax - vmin

    sat = np.divide(delta, vmax, out=np.zeros_like(vmax), where=vmax > 0)
    hue = np.zeros_like(vmax)
    chromatic = delta > 0
    safe = np.where(chromatic, delta, 1.0)
    hr = ((g - b) / safe) % 6.0
    hg = (b - r) / safe + 2.0
    hb = (r - g) / safe + 4.0
    hue = np.where(vmax == r, hr, np.where(vmax == g, hg, hb)) * 60.0
    hue = np.where(chromatic, hue, 0.0) % 360.0
    return np.stack([hue, sat, vmax], axis=-1)


def hsv_to_rgb(hsv) -> np.ndarray:
    """Inverse of :func:`rgb_to_hsv`, returning rounded uint8 RGB."""
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[..., 0] % 360.0, hsv[..., 1], hsv[..., 2]
    c = v * s
    hp = h / 60.0
    x = c * (1 - np.abs(hp % 2 - 1))
    zero = np.zeros_like(h)
    sector = np.floor(hp).astype(int) % 6
    r1 = np.choose(sector, [c, x, zero, zero, x, c])
    g1 = np.choose(sector, [x, c, c, x, zero, zero])
    b1 = np.choose(sector, [zero, zero, x, c, c, x])
    m = v - c
    rgb = np.stack([r1 + m, g1 + m, b1 + m], axis=-1) * 255.0
    return np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)


def rgb_to_lab(img) -> np.ndarray:
    """CIE L*a*b* under sRGB / D65; L* in [0, 100]."""
    rgb = as_rgb(img).astype(np.float64) / 255.0
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T / _D65_WHITE
    eps = (6.0 / 29.0) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lightness = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([lightness, a, b], axis=-1)


def rgb_to_ycbcr(img) -> np.ndarray:
    """Full-range BT.601 YCbCr, all channels in [0, 255]."""
    rgb = as_rgb(img).astype(np.float64)
    m = np.array(
        [
            [0.299, 0.587, 0.114],
            [-0.168736, -0.331264, 0.5],
            [0.5, -0.418688, -0.081312],
        ]
    )
    out = rgb @ m.T
    out[..., 1:] += 128.0
    return out


def convert_color(img, space: str) -> np.ndarray:
    """Convert to ``"HSV"``, ``"Lab"`` or ``"YCbCr"``; returns ``(H, W, 3)`` float64."""
    converters = {"HSV": rgb_to_hsv, "Lab": rgb_to_lab, "YCbCr": rgb_to_ycbcr}
    try:
        return converters[space](img)
    except KeyError:
        raise ValueError(f"unknown color space {space!r}") from None


# --- minima and watershed ---------------------------------------------------


def h_minima(img, h: int) -> np.ndarray:
    """Suppress regional minima shallower than ``h``.

    Reconstruction by erosion of ``img + h`` over ``img``. Surviving minima are
    raised by ``h``; the result is clipped at the image maximum, so a constant
    image passes through unchanged and the transform is idempotent.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    f = as_gray(img).astype(np.float64)
    filled = reconstruction(f + h, f, method="erosion")
    return np.minimum(filled, f.max()).astype(np.uint8)


def regional_minima(img) -> np.ndarray:
    """Mask of all pixels in 8-connected plateaus with no lower neighbor."""
    f = as_gray(img).astype(np.float64)
    raised = reconstruction(f + 1, f, method="erosion")
    return raised > f


_NEIGHBORS_4 = ((-1, 0), (0, -1), (0, 1), (1, 0))


def watershed(img, markers) -> np.ndarray:
    """Marker-controlled watershed by priority flooding.

    Pixels are flooded from the markers in increasing intensity, ties broken
    by raster index. A pixel whose already-labeled 4-neighbors carry two
    different labels becomes a ridge (label 0) and does not propagate.
    Pixels cut off from every marker by ridges also stay 0.

    Raises
    ------
    NoMarkers
        If ``markers`` has no nonzero label.
    """
    gray = as_gray(img)
    seeds = np.asarray(markers)
    if seeds.shape != gray.shape:
        raise ValueError("image and markers must have the same shape")
    if not np.any(seeds):
        raise NoMarkers("watershed needs at least one nonzero marker")

    height, width = gray.shape
    values = gray.ravel().tolist()
    labels = seeds.astype(np.int32).ravel().tolist()
    queued = [lab != 0 for lab in labels]
    heap: list[tuple[int, int]] = []

    def push_neighbors(idx: int) -> None:
        y, x = divmod(idx, width)
        for dy, dx in _NEIGHBORS_4:
            ny, nx = y + dy, x + dx
            if 0 <= ny < height and 0 <= nx < width:
                n = ny * width + nx
                if not queued[n]:
                    queued[n] = True
                    heapq.heappush(heap, (values[n], n))

    for idx, lab in enumerate(labels):
        if lab:
            push_neighbors(idx)

    while heap:
        _, idx = heapq.heappop(heap)
        y, x = divmod(idx, width)
        found = 0
        ridge = False
        for dy, dx in _NEIGHBORS_4:
            ny, nx = y + dy, x + dx
            if 0 <= ny < height and 0 <= nx < width:
                lab = labels[ny * width + nx]
                if lab:
                    if found and lab != found:
                        ridge = True
                        break
                    found = lab
        if ridge or not found:
            continue
        labels[idx] = found
        push_neighbors(idx)

    return np.asarray(labels, dtype=np.int32).reshape(height, width)


# --- file I/O ---------------------------------------------------------------


def read_image(path) -> np.ndarray:
    """Decode a PNG/JPEG file into an 8-bit RGB raster."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path, img) -> None:
    Image.fromarray(as_rgb(img), mode="RGB").save(Path(path))


def write_pgm(path, img) -> None:
    """Binary PGM (P5) dump of a gray raster."""
    gray = as_gray(img)
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def write_pbm(path, mask) -> None:
    """Binary PBM (P4) dump of a mask; foreground is written as black (1)."""
    m = as_mask(mask)
    h, w = m.shape
    with open(path, "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode("ascii"))
        fh.write(np.packbits(m, axis=1).tobytes())
