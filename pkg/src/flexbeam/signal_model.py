"""Behavioral receive-channel model.

Each channel applies three quantized control words to the incident plane
wave: an 8-bit phase-shifter code, a 6-bit sampling-delay code (76 ps per
step) and a 3-bit gain code spanning 7..10 dB.  The complex baseband
sample of element n is

    A_n * g * exp(j*2*pi*(f_RF - f_LO)*t) * exp(j*phi_ant_n) * exp(j*phi_n)

with phi_ant_n = k*delta_n the geometric phase, phi_n the phase-shifter
setting, and the delay code shifting the sampling instant t.  Optional
complex white Gaussian noise models a finite per-element SNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry, PlaneWaveSource, wavenumber

PHASE_CODE_MAX = 255
DELAY_CODE_MAX = 63
GAIN_CODE_MAX = 7

# Uniform 256-state mapping, LSB = 1.40625 deg.  The coarse alternative
# treats the vector modulator as 64 effective states (LSB = 5.625 deg).
PHASE_LSB_RAD = 2.0 * math.pi / 256.0
PHASE_LSB_COARSE_RAD = 2.0 * math.pi / 64.0

DELAY_STEP_S = 76e-12
GAIN_MIN_DB = 7.0
GAIN_SPAN_DB = 3.0


@dataclass
class ChannelSettings:
    """Quantized control words of one receive channel."""

    phase_code: int = 0
    delay_code: int = 0
    gain_code: int = 0

    def __post_init__(self):
        if not 0 <= self.phase_code <= PHASE_CODE_MAX:
            raise ValueError(f"phase code out of range: {self.phase_code}")
        if not 0 <= self.delay_code <= DELAY_CODE_MAX:
            raise ValueError(f"delay code out of range: {self.delay_code}")
        if not 0 <= self.gain_code <= GAIN_CODE_MAX:
            raise ValueError(f"gain code out of range: {self.gain_code}")


@dataclass
class NoiseConfig:
    """Additive complex white Gaussian noise at the channel output."""

    enabled: bool = False
    snr_db: float = 30.0  # per element, per baseband sample
    seed: int = 0

    def __post_init__(self):
        if self.enabled and not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite when noise is enabled")


def phase_from_code(phase_code: int, lsb_rad: float = PHASE_LSB_RAD) -> float:
    """Phase-shifter setting in radians, wrapped to [0, 2*pi)."""
    if not 0 <= phase_code <= PHASE_CODE_MAX:
        raise ValueError(f"phase code out of range: {phase_code}")
    return (phase_code * lsb_rad) % (2.0 * math.pi)


def phases_from_codes(codes, lsb_rad: float = PHASE_LSB_RAD) -> np.ndarray:
    """Vectorized phase_from_code over an integer code array."""
    codes = np.asarray(codes)
    if np.any(codes < 0) or np.any(codes > PHASE_CODE_MAX):
        raise ValueError("phase code out of range")
    return (codes * lsb_rad) % (2.0 * math.pi)


def delay_from_code(delay_code: int) -> float:
    """Sampling-clock interpolator delay in seconds (76 ps per LSB)."""
    if not 0 <= delay_code <= DELAY_CODE_MAX:
        raise ValueError(f"delay code out of range: {delay_code}")
    return delay_code * DELAY_STEP_S


def gain_from_code(gain_code: int) -> float:
    """Channel gain in dB, linear-in-dB over the 8 codes spanning 7..10 dB."""
    if not 0 <= gain_code <= GAIN_CODE_MAX:
        raise ValueError(f"gain code out of range: {gain_code}")
    return GAIN_MIN_DB + gain_code * (GAIN_SPAN_DB / GAIN_CODE_MAX)


def gain_linear(gain_code: int) -> float:
    return 10.0 ** (gain_from_code(gain_code) / 20.0)


def channel_sample(geom: ArrayGeometry, src: PlaneWaveSource, element_index: int,
                   settings: ChannelSettings, noise: NoiseConfig, t: float,
                   f_lo: float | None = None, rng=None,
                   phase_lsb_rad: float = PHASE_LSB_RAD) -> complex:
    """Complex baseband sample of one element at time t.

    f_lo defaults to the carrier (homodyne), making the sample a DC level.
    When noise is enabled, draws come from `rng`; callers sampling a
    sequence must hold one generator so the stream is reproducible.
    """
    if not 0 <= element_index < geom.n_elements:
        raise ValueError("element index out of range")
    if f_lo is None:
        f_lo = src.freq_rf
    k = wavenumber(src.freq_rf)
    delta = geom.path_deltas(src.aoa_theta)[element_index]
    amp = src.amplitudes(geom.n_elements)[element_index]
    gain = gain_linear(settings.gain_code)
    t_eff = t - delay_from_code(settings.delay_code)
    phase = (2.0 * math.pi * (src.freq_rf - f_lo) * t_eff
             + k * delta
             + phase_from_code(settings.phase_code, phase_lsb_rad))
    sample = amp * gain * complex(math.cos(phase), math.sin(phase))
    if noise.enabled:
        if rng is None:
            rng = np.random.default_rng(noise.seed)
        sigma = amp * gain / math.sqrt(2.0 * 10.0 ** (noise.snr_db / 10.0))
        sample += complex(rng.normal(0.0, sigma), rng.normal(0.0, sigma))
    return sample
