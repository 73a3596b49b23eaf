"""Image-based grading of dried fruit from a single calibrated photograph."""
from .errors import FruitGradeError
from .features import FEATURE_NAMES, ExtractionConfig, extract_all
from .segment import BackgroundPolicy, FruitView, fruit_view_from_image

__version__ = "0.1.0"

__all__ = [
    "FEATURE_NAMES",
    "BackgroundPolicy",
    "ExtractionConfig",
    "FruitGradeError",
    "FruitView",
    "extract_all",
    "fruit_view_from_image",
]
