"""Baseband combiner and its 16-bit fixed-point output word.

The four channel samples are summed into BF_out; the loop consumes the
magnitude of that sum digitized into a 16-bit word with 1 sign flag,
5 integer bits and 10 fractional bits.  The numeric range runs from
-31.999 to +32.0 in steps of 2^-10 (exactly 2^16 states); out-of-range
inputs saturate at those extremes and never wrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

QWORD_FRAC_BITS = 10
QWORD_SCALE = 1 << QWORD_FRAC_BITS            # 1024, LSB = 2^-10
QWORD_MAX_INT = 32768                         # +32.0
QWORD_MIN_INT = -32767                        # -31.9990234375
QWORD_OFFSET = -QWORD_MIN_INT                 # raw = scaled value + offset
QWORD_MAX_VALUE = QWORD_MAX_INT / QWORD_SCALE
QWORD_MIN_VALUE = QWORD_MIN_INT / QWORD_SCALE


@dataclass(frozen=True)
class QWord:
    """Digitized beamformer output.

    raw is the 16-bit transport word (offset binary: the MSB acts as the
    sign flag, set for non-negative values).
    """

    raw: int

    def __post_init__(self):
        if not 0 <= self.raw <= 0xFFFF:
            raise ValueError(f"raw word out of 16-bit range: {self.raw}")

    @property
    def value(self) -> float:
        return (self.raw - QWORD_OFFSET) / QWORD_SCALE

    @classmethod
    def from_value(cls, x: float) -> "QWord":
        return quantize(x)


def quantize(x: float) -> QWord:
    """Round-to-nearest into the sign/5/10 format, saturating at the extremes."""
    if math.isnan(x):
        raise ValueError("cannot quantize NaN")
    scaled = int(np.round(x * QWORD_SCALE))
    scaled = min(max(scaled, QWORD_MIN_INT), QWORD_MAX_INT)
    return QWord(scaled + QWORD_OFFSET)


def would_saturate(x: float) -> bool:
    return x > QWORD_MAX_VALUE or x < QWORD_MIN_VALUE


@dataclass
class BfSample:
    """One complex beamformed output sample."""

    i_component: float
    q_component: float
    t: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.i_component) and math.isfinite(self.q_component)):
            raise ValueError("beamformer sample components must be finite")

    @property
    def magnitude(self) -> float:
        return math.hypot(self.i_component, self.q_component)


def bf_out(samples) -> complex:
    """Sum of the per-channel complex baseband samples."""
    samples = list(samples)
    if not samples:
        raise ValueError("beamformer needs at least one channel sample")
    return complex(sum(samples))


def objective(bf: BfSample | Iterable[BfSample]) -> float:
    """Loop objective: beamformed magnitude, averaged over the dwell window."""
    if isinstance(bf, BfSample):
        return bf.magnitude
    mags = [s.magnitude for s in bf]
    if not mags:
        raise ValueError("empty dwell window")
    return float(np.mean(mags))
