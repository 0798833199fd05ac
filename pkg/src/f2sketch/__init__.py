"""Partition-based F2 sketching with compact encoding and hard-instance stream generators."""

from .codec import EncodedSketch, bit_budget, decode, encode
from .hashing import HashFamily, new_family
from .oracle import exact_moment, exhaustive_sketch_moments, histogram
from .sketch import MomentReport, PartitionSketch, SketchMismatchError, TugOfWarSketch

__version__ = "0.1.0"

__all__ = [
    "EncodedSketch",
    "HashFamily",
    "MomentReport",
    "PartitionSketch",
    "SketchMismatchError",
    "TugOfWarSketch",
    "bit_budget",
    "decode",
    "encode",
    "exact_moment",
    "exhaustive_sketch_moments",
    "histogram",
    "new_family",
]
