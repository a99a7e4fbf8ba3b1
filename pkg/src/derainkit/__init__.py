"""Rain and snow removal for video, with an evaluation harness.

The package splits into algorithm modules (frames, physics, derain,
decompose, segment, track, metrics) and a harness subpackage that runs
them over datasets and writes comparison reports.
"""

from .errors import ConfigurationError, DataFormatError
from .frames import (
    BG,
    DC,
    FG,
    BinaryMask,
    Frame,
    FrameSequence,
    TriStateMask,
    load_sequence,
    save_sequence,
    to_luma,
)

__version__ = "0.1.0"

__all__ = [
    "BG",
    "DC",
    "FG",
    "BinaryMask",
    "ConfigurationError",
    "DataFormatError",
    "Frame",
    "FrameSequence",
    "TriStateMask",
    "__version__",
    "load_sequence",
    "save_sequence",
    "to_luma",
]
