"""Synthetic fruit corpus: white studio background, calibration frame, one fruit per image.

Geometry is drawn in millimeters and rasterized at a chosen scale, so the same
sample can be re-rendered at several resolutions.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .imgcore import write_image

FRAME_RGB = (15, 15, 15)
BACKGROUND_RGB = (248, 248, 246)
DEFECT_RGB = (34, 24, 20)


class GradeSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    length_mm: tuple[float, float] = (30.0, 1.5)  # mean, sd of the major axis
    aspect: tuple[float, float] = (1.45, 0.05)
    grooves: tuple[int, int] = (0, 0)  # inclusive range
    groove_depth: float = Field(45.0, ge=0, le=120)  # gray levels
    groove_width_mm: float = Field(2.2, gt=0)
    groove_length_mm: tuple[float, float] = (7.0, 10.0)
    defect_fraction: tuple[float, float] = (0.0, 0.0)
    base_color: tuple[int, int, int] = (190, 82, 56)
    color_jitter: float = Field(6.0, ge=0)

    @model_validator(mode="after")
    def _check(self):
        lo, hi = self.defect_fraction
        if not (0 <= lo <= hi <= 1):
            raise ValueError("defect_fraction must be an ordered pair in [0, 1]")
        if not (0 <= self.grooves[0] <= self.grooves[1]):
            raise ValueError("grooves must be an ordered non-negative pair")
        if any(not 0 <= c <= 255 for c in self.base_color):
            raise ValueError("base_color channels must lie in [0, 255]")
        return self


class SynthSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grades: list[GradeSpec]
    samples_per_grade: int = Field(50, ge=1)
    seed: int = 0
    frame_side_mm: float = Field(150.0, gt=0)
    frame_inner_px: int = Field(500, ge=50)
    frame_thickness_px: int = Field(12, ge=2)
    outer_margin_px: int = Field(30, ge=0)
    noise_sigma: float = Field(2.0, ge=0)
    image_format: str = Field("png", pattern="^(png|jpg)$")

    @model_validator(mode="after")
    def _check(self):
        if len(self.grades) < 2:
            raise ValueError("need at least two grades")
        names = [g.name for g in self.grades]
        if len(set(names)) != len(names):
            raise ValueError("grade names must be unique")
        return self


def default_spec(samples_per_grade: int = 50, seed: int = 0) -> SynthSpec:
    """Three grades: large smooth clean, medium lightly wrinkled, small wrinkled and blemished."""
    return SynthSpec(
        grades=[
            GradeSpec(name="A", length_mm=(34.0, 1.5), grooves=(0, 0), base_color=(196, 86, 58)),
            GradeSpec(
                name="B",
                length_mm=(29.0, 1.5),
                grooves=(2, 3),
                defect_fraction=(0.0, 0.02),
                base_color=(182, 80, 55),
            ),
            GradeSpec(
                name="C",
                length_mm=(24.0, 1.5),
                grooves=(4, 5),
                groove_width_mm=1.5,
                defect_fraction=(0.04, 0.10),
                base_color=(166, 74, 52),
            ),
        ],
        samples_per_grade=samples_per_grade,
        seed=seed,
    )


@dataclass(frozen=True)
class Groove:
    # along-axis position and lateral offset of the center, in units of the semi-axes
    u0: float
    v0: float
    angle: float  # radians relative to the fruit's major axis
    length_mm: float
    width_mm: float
    wave_amp_mm: float
    wave_phase: float


@dataclass(frozen=True)
class Blob:
    u0: float
    v0: float
    radius_mm: float


@dataclass(frozen=True)
class SampleParams:
    """Everything needed to rasterize one fruit, independent of resolution."""

    grade: str
    length_mm: float
    width_mm: float
    rotation: float
    center_mm: tuple[float, float]  # offset from the frame center
    color: tuple[float, float, float]
    grooves: tuple[Groove, ...]
    groove_depth: float
    blobs: tuple[Blob, ...]
    noise_seed: int


def draw_sample(grade: GradeSpec, rng: np.random.Generator) -> SampleParams:
    length = max(8.0, rng.normal(*grade.length_mm))
    aspect = max(1.0, rng.normal(*grade.aspect))
    width = length / aspect
    rotation = rng.uniform(0, math.pi)
    center = tuple(rng.uniform(-25.0, 25.0, size=2))
    color = tuple(np.clip(np.asarray(grade.base_color) + rng.normal(0, grade.color_jitter, 3), 40, 250))

    n_grooves = int(rng.integers(grade.grooves[0], grade.grooves[1] + 1))
    grooves = []
    # spread grooves along the major axis so they stay disjoint
    slots = np.linspace(-0.6, 0.6, n_grooves) if n_grooves > 1 else np.zeros(n_grooves)
    for u in slots:
        grooves.append(
            Groove(
                u0=float(u + rng.uniform(-0.04, 0.04)),
                v0=float(rng.uniform(-0.15, 0.15)),
                angle=float(math.pi / 2 + rng.uniform(-0.25, 0.25)),
                length_mm=float(rng.uniform(*grade.groove_length_mm) * width / 20.0),
                width_mm=grade.groove_width_mm,
                wave_amp_mm=float(rng.uniform(0.2, 0.6)),
                wave_phase=float(rng.uniform(0, 2 * math.pi)),
            )
        )

    blobs = []
    fraction = rng.uniform(*grade.defect_fraction)
    if fraction > 0:
        n_blobs = int(rng.integers(1, 3))
        area_mm2 = math.pi * (length / 2) * (width / 2) * fraction
        for _ in range(n_blobs):
            r = math.sqrt(area_mm2 / n_blobs / math.pi)
            blobs.append(Blob(u0=float(rng.uniform(-0.45, 0.45)), v0=float(rng.uniform(-0.35, 0.35)), radius_mm=r))

    return SampleParams(
        grade=grade.name,
        length_mm=float(length),
        width_mm=float(width),
        rotation=float(rotation),
        center_mm=(float(center[0]), float(center[1])),
        color=tuple(float(c) for c in color),
        grooves=tuple(grooves),
        groove_depth=grade.groove_depth,
        blobs=tuple(blobs),
        noise_seed=int(rng.integers(0, 2**31 - 1)),
    )


def fruit_layers(params: SampleParams, mm_per_pixel: float, shape: tuple[int, int], center_px: tuple[float, float]):
    """Return boolean fruit, groove and blob masks for an ``(H, W)`` canvas."""
    height, width = shape
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    cx = center_px[0] + params.center_mm[0] / mm_per_pixel
    cy = center_px[1] + params.center_mm[1] / mm_per_pixel
    # fruit-aligned coordinates in millimeters, measured at pixel centers
    x_mm = (xx + 0.5 - cx) * mm_per_pixel
    y_mm = (yy + 0.5 - cy) * mm_per_pixel
    c, s = math.cos(params.rotation), math.sin(params.rotation)
    u = c * x_mm + s * y_mm
    v = -s * x_mm + c * y_mm
    a, b = params.length_mm / 2, params.width_mm / 2
    fruit = (u / a) ** 2 + (v / b) ** 2 <= 1.0

    grooves = np.zeros(shape, dtype=bool)
    for g in params.grooves:
        gu, gv = g.u0 * a, g.v0 * b
        ca, sa = math.cos(g.angle), math.sin(g.angle)
        along = ca * (u - gu) + sa * (v - gv)
        across = -sa * (u - gu) + ca * (v - gv)
        wave = g.wave_amp_mm * np.sin(2 * math.pi * along / max(g.length_mm, 1e-6) + g.wave_phase)
        grooves |= (np.abs(along) <= g.length_mm / 2) & (np.abs(across - wave) <= g.width_mm / 2)
    grooves &= fruit

    blobs = np.zeros(shape, dtype=bool)
    for bl in params.blobs:
        blobs |= (u - bl.u0 * a) ** 2 + (v - bl.v0 * b) ** 2 <= bl.radius_mm**2
    blobs &= fruit
    return fruit, grooves & ~blobs, blobs


def render_sample(params: SampleParams, spec: SynthSpec, scale: float = 1.0) -> np.ndarray:
    """Rasterize one sample; ``scale`` multiplies every pixel dimension."""
    inner = int(round(spec.frame_inner_px * scale))
    thick = int(round(spec.frame_thickness_px * scale))
    margin = int(round(spec.outer_margin_px * scale))
    side = inner + 2 * (thick + margin)
    mm_per_pixel = spec.frame_side_mm / inner
    rng = np.random.default_rng(params.noise_seed)

    img = np.empty((side, side, 3), dtype=np.float64)
    img[:] = BACKGROUND_RGB
    img += rng.normal(0, 1.0, size=(side, side, 1))
    o = margin
    img[o : side - o, o : side - o] = FRAME_RGB
    o = margin + thick
    img[o : side - o, o : side - o] = BACKGROUND_RGB

    center = (side / 2.0, side / 2.0)
    fruit, grooves, blobs = fruit_layers(params, mm_per_pixel, (side, side), center)
    color = np.asarray(params.color)
    luma = float(color @ np.array([0.299, 0.587, 0.114]))
    img[fruit] = color
    if grooves.any():
        factor = max(0.0, 1.0 - params.groove_depth / luma)
        img[grooves] = color * factor
    img[blobs] = DEFECT_RGB
    noise = rng.normal(0, spec.noise_sigma, size=(side, side, 1))
    img[fruit] += noise[fruit]
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _render_to_file(job):
    params, spec, path = job
    write_image(path, render_sample(params, spec))
    return path.name


def draw_corpus(spec: SynthSpec) -> list[tuple[str, SampleParams]]:
    """Deterministic (filename, params) list for the whole corpus."""
    root = np.random.SeedSequence(spec.seed)
    children = root.spawn(len(spec.grades))
    out = []
    width = len(str(spec.samples_per_grade * len(spec.grades)))
    idx = 0
    for grade, child in zip(spec.grades, children):
        rng = np.random.default_rng(child)
        for _ in range(spec.samples_per_grade):
            name = f"sample_{idx:0{width}d}.{spec.image_format}"
            out.append((name, draw_sample(grade, rng)))
            idx += 1
    return out


def generate_synthetic_corpus(spec: SynthSpec, out_dir, jobs: int = 1) -> Path:
    """Render every sample into ``out_dir`` and write ``labels.csv``.

    Returns the labels file path. Output is byte-identical for a fixed spec.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = draw_corpus(spec)
    work = [(params, spec, out / name) for name, params in corpus]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_render_to_file, work, chunksize=8))
    else:
        for job in work:
            _render_to_file(job)

    labels_path = out / "labels.csv"
    with open(labels_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "grade"])
        for name, params in corpus:
            writer.writerow([name, params.grade])
    return labels_path


def load_spec(path) -> SynthSpec:
    return SynthSpec.model_validate_json(Path(path).read_text(encoding="utf-8"))


def truth_fractions(params: SampleParams, spec: SynthSpec, scale: float = 1.0) -> dict[str, float]:
    """Ground-truth groove and blob area fractions of the fruit at a scale."""
    inner = int(round(spec.frame_inner_px * scale))
    thick = int(round(spec.frame_thickness_px * scale))
    margin = int(round(spec.outer_margin_px * scale))
    side = inner + 2 * (thick + margin)
    fruit, grooves, blobs = fruit_layers(params, spec.frame_side_mm / inner, (side, side), (side / 2, side / 2))
    area = fruit.sum()
    return {"groove": grooves.sum() / area, "defect": blobs.sum() / area, "area_px": float(area)}


def sample_params(spec: SynthSpec, index: int) -> Optional[SampleParams]:
    corpus = draw_corpus(spec)
    return corpus[index][1] if 0 <= index < len(corpus) else None
