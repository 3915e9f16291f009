"""Dynamic chain-of-thought pruning with a desk-scale benchmark harness."""

from .config import DCoTConfig, load_config, validate_config
from .errors import (
    CapacityError,
    ConfigError,
    IntegrityError,
    NoAnswerError,
    NumericError,
    ShapeError,
    SuiteError,
    TraceFormatError,
)
from .rng import SplitMix64
from .types import CoTSegment, Level, Mode, SessionTrace, ThresholdState, Verdict

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfigError",
    "CoTSegment",
    "DCoTConfig",
    "IntegrityError",
    "Level",
    "Mode",
    "NoAnswerError",
    "NumericError",
    "SessionTrace",
    "ShapeError",
    "SplitMix64",
    "SuiteError",
    "ThresholdState",
    "TraceFormatError",
    "Verdict",
    "load_config",
    "validate_config",
]
