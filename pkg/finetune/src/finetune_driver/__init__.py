"""Adapter fine-tuning driver for flat instruction-response training files."""

from .errors import (
    FinetuneError,
    MissingMarkers,
    ModelLoadError,
    OutOfMemory,
    PortInUse,
    TokenizerSlotUnavailable,
)
from .spec import TrainSpec

__all__ = [
    "FinetuneError",
    "MissingMarkers",
    "ModelLoadError",
    "OutOfMemory",
    "PortInUse",
    "TokenizerSlotUnavailable",
    "TrainSpec",
]
