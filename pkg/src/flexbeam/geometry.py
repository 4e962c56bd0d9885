"""Curved-array geometry: path-length deltas and the conformal array factor.

A uniform linear array bent over a cylinder of radius R keeps its arc
spacing d (the printed sheet is inextensible), so element n sits at the
arc angle phi_n = n*d/R measured from the reference element.  For a plane
wave arriving at angle theta the extra free-space path of element n is

    delta_n = R*cos(theta - phi_n) - R*cos(theta)

which reduces to the familiar flat-array n*d*sin(theta) as R -> inf.
All angles are radians, all lengths meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299792458.0


def wavenumber(freq_hz: float) -> float:
    """Free-space wavenumber 2*pi*f/c in rad/m."""
    return 2.0 * math.pi * freq_hz / SPEED_OF_LIGHT


def chord_length(radius_r: float, phi: float) -> float:
    """Chord between two points separated by arc angle phi on a circle of radius R.

    C = 2*R*sin(phi/2), valid for 0 <= phi < pi.
    """
    if radius_r <= 0.0:
        raise ValueError(f"radius must be positive, got {radius_r}")
    if not 0.0 <= phi < math.pi:
        raise ValueError(f"arc angle must be in [0, pi), got {phi}")
    return 2.0 * radius_r * math.sin(0.5 * phi)


def path_delta(radius_r, theta, phi_n):
    """Extra path length of an element at arc angle phi_n, cylinder radius R.

    Closed form R*(cos(theta - phi_n) - cos(theta)); equivalently the chord
    2*R*sin(phi/2) projected onto the arrival direction.  Vectorized over
    phi_n.  Zero for the reference element (phi_n = 0) at any R, theta.
    """
    if radius_r <= 0.0:
        raise ValueError(f"radius must be positive, got {radius_r}")
    phi_n = np.asarray(phi_n, dtype=float)
    out = radius_r * (np.cos(theta - phi_n) - np.cos(theta))
    return out if out.ndim else float(out)


def element_path_deltas(radius_r, theta, arc_positions):
    """Per-element path deltas for elements at arc-length positions s_n.

    Finite R maps s_n to phi_n = s_n/R on the cylinder; infinite R is the
    flat array, delta_n = s_n*sin(theta).
    """
    s = np.asarray(arc_positions, dtype=float)
    if math.isinf(radius_r):
        return s * math.sin(theta)
    return path_delta(radius_r, theta, s / radius_r)


@dataclass
class ArrayGeometry:
    """Uniform array bent over a cylindrical curvature.

    element_angles holds phi_n for each element; the reference element is
    at phi_0 = 0 and, for finite R, phi_n = n*d/R (arc length preserved
    under bending).  radius_r = inf flags the flat (undeformed) array.
    """

    n_elements: int
    spacing_d: float
    radius_r: float
    element_angles: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("need at least one element")
        if self.spacing_d <= 0.0:
            raise ValueError("element spacing must be positive")
        if not (self.radius_r > 0.0):  # also rejects NaN
            raise ValueError("curvature radius must be positive (inf = flat)")
        if self.element_angles is None:
            n = np.arange(self.n_elements)
            if math.isinf(self.radius_r):
                self.element_angles = np.zeros(self.n_elements)
            else:
                self.element_angles = n * self.spacing_d / self.radius_r
        else:
            self.element_angles = np.asarray(self.element_angles, dtype=float)
            if len(self.element_angles) != self.n_elements:
                raise ValueError("element_angles length mismatch")
            if self.element_angles[0] != 0.0:
                raise ValueError("reference element must sit at phi = 0")
            if not math.isinf(self.radius_r) and np.any(np.diff(self.element_angles) <= 0):
                raise ValueError("element_angles must be strictly increasing")

    @property
    def is_flat(self) -> bool:
        return math.isinf(self.radius_r)

    def arc_positions(self) -> np.ndarray:
        """Arc-length coordinate of each element along the sheet."""
        return np.arange(self.n_elements) * self.spacing_d

    def path_deltas(self, theta: float) -> np.ndarray:
        if self.is_flat:
            return self.arc_positions() * math.sin(theta)
        return path_delta(self.radius_r, theta, self.element_angles)


@dataclass
class PlaneWaveSource:
    """Far-field transmitter at angle-of-arrival theta.

    amplitude is the per-element received amplitude A_n: a scalar applies
    uniformly, a sequence gives one value per element.
    """

    aoa_theta: float
    freq_rf: float = 2.1e9
    amplitude: float | list = 1.0

    def __post_init__(self):
        if not -math.pi / 2 <= self.aoa_theta <= math.pi / 2:
            raise ValueError("angle of arrival must be within +-pi/2")
        if self.freq_rf <= 0.0:
            raise ValueError("carrier frequency must be positive")
        if np.any(np.asarray(self.amplitude) < 0.0):
            raise ValueError("amplitude must be non-negative")

    def amplitudes(self, n_elements: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.amplitude, dtype=float), (n_elements,)).copy()


def array_factor_from_deltas(deltas, k: float, weights, amplitudes=1.0) -> complex:
    """Complex array factor sum_n w_n * A_n * exp(j*k*delta_n)."""
    deltas = np.asarray(deltas, dtype=float)
    weights = np.asarray(weights)
    if weights.shape != deltas.shape:
        raise ValueError("one weight per element required")
    return complex(np.sum(weights * amplitudes * np.exp(1j * k * deltas)))


def array_factor(geom: ArrayGeometry, src: PlaneWaveSource, weights) -> complex:
    """Array factor of the conformal array for the given complex weights.

    The common factor exp(-j*k*R*cos(theta)) is a global phase and is
    dropped; it cannot affect the magnitude.
    """
    weights = np.asarray(weights)
    if len(weights) != geom.n_elements:
        raise ValueError(
            f"expected {geom.n_elements} weights, got {len(weights)}")
    k = wavenumber(src.freq_rf)
    return array_factor_from_deltas(
        geom.path_deltas(src.aoa_theta), k, weights, src.amplitudes(geom.n_elements))


def beam_pointing_error(angles, magnitude, target_theta: float) -> float:
    """Pointing error in degrees: |argmax of the pattern - target_theta|.

    angles are the (uniform, radians) sample grid of the pattern, which
    must cover target_theta.  Exact ties in the magnitude are broken
    toward the angle closest to the target.
    """
    angles = np.asarray(angles, dtype=float)
    magnitude = np.asarray(magnitude, dtype=float)
    if angles.size == 0 or magnitude.size == 0:
        raise ValueError("empty pattern")
    if angles.shape != magnitude.shape:
        raise ValueError("angle grid and magnitude must have equal length")
    if not angles.min() <= target_theta <= angles.max():
        raise ValueError("pattern grid does not cover the target angle")
    peak_idx = np.flatnonzero(magnitude == magnitude.max())
    best = peak_idx[np.argmin(np.abs(angles[peak_idx] - target_theta))]
    return math.degrees(abs(angles[best] - target_theta))
