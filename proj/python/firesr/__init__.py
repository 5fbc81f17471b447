"""FireSRnet super-resolution of monthly fire-exposure rasters."""

from ._firesr import (
    DEFAULT_FIRE_THRESHOLD,
    DataError,
    Error,
    IoError,
    Network,
    NumericError,
    UsageError,
    bicubic,
    bilinear,
    binarize,
    block_average,
    degrade,
    evaluate,
    metrics,
    read_raster,
    synth,
    train,
    write_raster,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_FIRE_THRESHOLD",
    "DataError",
    "Error",
    "IoError",
    "Network",
    "NumericError",
    "UsageError",
    "bicubic",
    "bilinear",
    "binarize",
    "block_average",
    "degrade",
    "evaluate",
    "metrics",
    "read_raster",
    "synth",
    "train",
    "write_raster",
]
