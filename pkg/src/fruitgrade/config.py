"""Pipeline configuration loaded from a single JSON document."""
from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import FruitGradeError
from .features import DEFAULT_OFFSETS, ExtractionConfig
from .learn.models import PRESETS, SelectionConfig
from .segment import BackgroundPolicy


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sat_max: float = Field(0.15, ge=0, le=1)
    val_min: float = Field(0.70, ge=0, le=1)
    mm_per_pixel: Optional[float] = Field(None, gt=0)
    frame_side_mm: float = Field(150.0, gt=0)
    glcm_levels: int = Field(8, ge=2, le=256)
    glcm_offsets: list[tuple[int, int]] = Field(default_factory=lambda: list(DEFAULT_OFFSETS))
    wrinkle_h: int = Field(10, ge=1, le=255)
    min_basin_px: int = Field(25, ge=1)
    v_defect: float = Field(0.25, ge=0, le=1)
    selection: Literal["none", "pca", "cfs"] = "none"
    pca_target: float = Field(0.95, gt=0, le=1)
    cfs_stall: int = Field(5, ge=0)
    preset: str = "tree-medium"
    hidden: int = Field(10, ge=1, le=1000)  # network presets only
    seed: int = Field(0, ge=0)

    @field_validator("glcm_offsets")
    @classmethod
    def _offsets(cls, v):
        if not v or any(dx == 0 and dy == 0 for dx, dy in v):
            raise ValueError("offsets must be nonempty and nonzero")
        return v

    @field_validator("preset")
    @classmethod
    def _preset(cls, v):
        if v not in PRESETS:
            raise ValueError(f"unknown preset {v!r}")
        return v

    def policy(self) -> BackgroundPolicy:
        return BackgroundPolicy(self.sat_max, self.val_min)

    def extraction(self) -> ExtractionConfig:
        return ExtractionConfig(
            glcm_levels=self.glcm_levels,
            glcm_offsets=tuple(tuple(o) for o in self.glcm_offsets),
            wrinkle_h=self.wrinkle_h,
            min_basin_px=self.min_basin_px,
            v_defect=self.v_defect,
        )

    def selection_config(self) -> SelectionConfig:
        return SelectionConfig(self.selection, self.pca_target, self.cfs_stall)

    def override(self, **flags) -> "PipelineConfig":
        """Return a copy with every non-None flag applied, revalidated."""
        data = self.model_dump()
        data.update({k: v for k, v in flags.items() if v is not None})
        return PipelineConfig.model_validate(data)


def load_config(path=None, **flags) -> PipelineConfig:
    try:
        base = PipelineConfig()
        if path is not None:
            base = PipelineConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))
        return base.override(**flags)
    except ValidationError as exc:
        where = f"{path}: " if path is not None else ""
        raise FruitGradeError(f"{where}invalid configuration\n{exc}") from None
