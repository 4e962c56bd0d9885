"""Deformation scenarios: a bendable tile, a source, and the loops, tick by tick.

A Scenario freezes everything needed to reproduce a run: the tile
geometry, the deformation trajectory R(t), the source, the per-channel
control words, the loop parameters, and the seed.  simulate() evolves the
radius each tick, rebuilds the element arc angles (the sheet keeps its
arc length), measures the quantized beamformed objective under the
currently applied codes, and feeds every calibration loop in lockstep.

Scenario files are YAML with the exact field layout of Scenario; traces
export to CSV, summaries to JSON (see write_trace_csv / write_summary).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .beamformer import QWord, quantize, would_saturate
from .escal import (CONV_PERIODS, CONV_THRESHOLD, CalibrationTrace, LoopConfig,
                    LoopState, coarse_code_search, run_calibration)
from .geometry import beam_pointing_error, element_path_deltas, wavenumber, PlaneWaveSource
from .signal_model import (ChannelSettings, NoiseConfig, PHASE_LSB_RAD,
                           delay_from_code, gain_linear, phases_from_codes)

DEFAULT_TICK_PERIOD = 2.0 * math.pi / (30.0 * 128)  # seconds per loop tick

LAYOUTS = ("linear", "grid2x2")
TRAJECTORY_KINDS = ("static", "step", "sinusoidal")
OBJECTIVE_KINDS = ("magnitude", "power", "i_component")
INIT_MODES = ("coarse", "given")


class ScenarioError(ValueError):
    """Raised when a scenario fails validation before tick 0."""


@dataclass
class DeformationTrajectory:
    """Curvature radius versus tick: static, step change, or vibration."""

    kind: str = "static"
    r0_m: float = math.inf
    r1_m: float = math.inf
    step_tick: int = 0
    vib_amplitude_m: float = 0.0
    vib_freq_hz: float = 0.0


def radius_at(traj: DeformationTrajectory, tick: int,
              tick_period_s: float = DEFAULT_TICK_PERIOD) -> float:
    """Curvature radius in effect at the given tick."""
    if traj.kind == "static":
        return traj.r0_m
    if traj.kind == "step":
        return traj.r0_m if tick < traj.step_tick else traj.r1_m
    if traj.kind == "sinusoidal":
        return traj.r0_m + traj.vib_amplitude_m * math.sin(
            2.0 * math.pi * traj.vib_freq_hz * tick * tick_period_s)
    raise ScenarioError(f"unknown trajectory kind: {traj.kind!r}")


@dataclass
class GeometrySpec:
    """Tile layout template.

    "linear": N elements along one bendable arc, spacing d.
    "grid2x2": the four-element tile; the two columns bend over the
    cylinder, the row pair stays coplanar, all sharing element 0 as the
    reference corner.  Element order: (row0,col0), (row0,col1),
    (row1,col0), (row1,col1).
    """

    layout: str = "grid2x2"
    n_elements: int = 4
    spacing_d_m: float = 0.0714

    def arc_positions(self) -> np.ndarray:
        """Arc-length coordinate of each element along the bent axis."""
        if self.layout == "linear":
            return np.arange(self.n_elements) * self.spacing_d_m
        if self.layout == "grid2x2":
            d = self.spacing_d_m
            return np.array([0.0, d, 0.0, d])
        raise ScenarioError(f"unknown layout: {self.layout!r}")


@dataclass
class LoopSetup:
    """Per-scenario calibration-loop parameters (one entry per loop)."""

    elements: list = field(default_factory=lambda: [1, 2, 3])
    a_phi: list = field(default_factory=lambda: [15.0, 20.0, 25.0])
    freq_multipliers: list = field(default_factory=lambda: [1, 3, 5])
    omega_p_rad_s: float = 30.0
    lut_len: int = 128
    hpf_cutoff_rad_s: float = 5.0
    a_v: float = 2.0 ** -8
    psi_rad: float = 0.0
    wrap_codes: bool = True
    conv_threshold: float = CONV_THRESHOLD
    conv_periods: int = CONV_PERIODS
    init_mode: str = "coarse"

    @property
    def count(self) -> int:
        return len(self.elements)

    @property
    def tick_period(self) -> float:
        return 2.0 * math.pi / (self.omega_p_rad_s * self.lut_len)

    def build(self, init_codes) -> list[tuple[LoopConfig, LoopState]]:
        loops = []
        for i in range(self.count):
            cfg = LoopConfig(
                omega_p=self.omega_p_rad_s,
                lut_len=self.lut_len,
                hpf_cutoff=self.hpf_cutoff_rad_s,
                a_phi=float(self.a_phi[i]),
                a_v=self.a_v,
                psi=self.psi_rad,
                freq_multiplier=int(self.freq_multipliers[i]),
                wrap_codes=self.wrap_codes,
            )
            loops.append((cfg, LoopState.at_code(int(init_codes[i]))))
        return loops


@dataclass
class BeamformerSetup:
    """Objective formation: dwell averaging and full-scale mapping.

    The analog magnitude is scaled so the coherent (all-aligned) maximum
    lands at target_fullscale, leaving headroom below the +32 end of the
    16-bit word so saturation cannot flatten the gradient near optimum.
    """

    dwell_samples: int = 16
    target_fullscale: float = 28.0
    objective_kind: str = "magnitude"


@dataclass
class Scenario:
    """Complete, serializable description of one simulation run."""

    name: str = "scenario"
    seed: int = 0
    tick_budget: int = 8192
    geometry: GeometrySpec = field(default_factory=GeometrySpec)
    source: PlaneWaveSource = field(default_factory=lambda: PlaneWaveSource(0.0))
    trajectory: DeformationTrajectory = field(default_factory=DeformationTrajectory)
    channels: list = field(default_factory=lambda: [ChannelSettings() for _ in range(4)])
    loops: LoopSetup = field(default_factory=LoopSetup)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    beamformer: BeamformerSetup = field(default_factory=BeamformerSetup)
    grid_step_deg: float = 0.1
    phase_lsb_rad: float = PHASE_LSB_RAD
    f_lo_hz: float | None = None  # None = homodyne (f_LO = f_RF)


def validate_scenario(scn: Scenario) -> None:
    """Reject a malformed scenario with a diagnostic before tick 0."""
    g = scn.geometry
    if g.layout not in LAYOUTS:
        raise ScenarioError(f"unknown layout {g.layout!r}")
    if g.layout == "grid2x2" and g.n_elements != 4:
        raise ScenarioError("grid2x2 layout requires exactly 4 elements")
    if g.n_elements < 2:
        raise ScenarioError("need at least two elements")
    if g.spacing_d_m <= 0:
        raise ScenarioError("element spacing must be positive")
    if scn.tick_budget <= 0:
        raise ScenarioError("tick budget must be positive")
    if len(scn.channels) != g.n_elements:
        raise ScenarioError("one ChannelSettings per element required")
    t = scn.trajectory
    if t.kind not in TRAJECTORY_KINDS:
        raise ScenarioError(f"unknown trajectory kind {t.kind!r}")
    if not t.r0_m > 0:
        raise ScenarioError("r0_m must be positive (inf = flat)")
    if t.kind == "step" and not t.r1_m > 0:
        raise ScenarioError("r1_m must be positive (inf = flat)")
    if t.kind == "sinusoidal":
        if math.isinf(t.r0_m):
            raise ScenarioError("sinusoidal trajectory needs a finite r0_m")
        if not 0 <= t.vib_amplitude_m < t.r0_m:
            raise ScenarioError("vibration amplitude must keep the radius positive")
    lo = scn.loops
    if lo.count > g.n_elements - 1:
        raise ScenarioError("at most n_elements - 1 loops (element 0 is the reference)")
    if len(lo.a_phi) != lo.count or len(lo.freq_multipliers) != lo.count:
        raise ScenarioError("a_phi and freq_multipliers need one entry per loop")
    if len(set(lo.elements)) != lo.count:
        raise ScenarioError("loop elements must be distinct")
    for e in lo.elements:
        if not 1 <= e < g.n_elements:
            raise ScenarioError(f"loop element {e} out of range (0 is the reference)")
    if lo.init_mode not in INIT_MODES:
        raise ScenarioError(f"unknown init mode {lo.init_mode!r}")
    if scn.beamformer.objective_kind not in OBJECTIVE_KINDS:
        raise ScenarioError(f"unknown objective kind {scn.beamformer.objective_kind!r}")
    if scn.beamformer.dwell_samples < 1:
        raise ScenarioError("dwell window needs at least one sample")
    if not 0 < scn.grid_step_deg <= 1.0:
        raise ScenarioError("pattern grid step must be in (0, 1] degrees")


@dataclass
class Pattern:
    """Sampled magnitude pattern versus angle of arrival."""

    angles_deg: np.ndarray
    magnitude: np.ndarray

    @property
    def angles_rad(self) -> np.ndarray:
        return np.radians(self.angles_deg)

    def pointing_error_deg(self, target_theta_rad: float) -> float:
        return beam_pointing_error(self.angles_rad, self.magnitude, target_theta_rad)

    def half_power_width_deg(self) -> float:
        """-3 dB width of the main lobe around the pattern peak."""
        mag = self.magnitude
        peak = int(np.argmax(mag))
        level = mag[peak] / math.sqrt(2.0)
        lo = peak
        while lo > 0 and mag[lo] >= level:
            lo -= 1
        hi = peak
        while hi < len(mag) - 1 and mag[hi] >= level:
            hi += 1
        return float(self.angles_deg[hi] - self.angles_deg[lo])


@dataclass
class RunResult:
    """Trace plus summary of one simulate() call."""

    scenario: Scenario
    trace: CalibrationTrace
    radius_m: np.ndarray
    init_codes: list
    final_codes: list
    uncompensated_error_deg: float
    final_error_deg: float
    final_objective: float
    converged: bool
    ticks_to_converge: int | None
    episodes: list
    saturation_count: int

    def summary(self) -> dict:
        return {
            "final_error_deg": float(self.final_error_deg),
            "converged": bool(self.converged),
            "ticks_to_converge": (None if self.ticks_to_converge is None
                                  else int(self.ticks_to_converge)),
            "saturation_count": int(self.saturation_count),
            "uncompensated_error_deg": float(self.uncompensated_error_deg),
            "final_objective": float(self.final_objective),
            "final_codes": [int(c) for c in self.final_codes],
            "init_codes": [int(c) for c in self.init_codes],
            "convergence_episodes": [int(e) for e in self.episodes],
            "config": scenario_to_dict(self.scenario),
        }


class TilePlant:
    """Tick-driven signal path shared by the loops, the oracle, and patterns."""

    def __init__(self, scn: Scenario):
        validate_scenario(scn)
        self.scn = scn
        g = scn.geometry
        self.n = g.n_elements
        self.k = wavenumber(scn.source.freq_rf)
        self.s = g.arc_positions()
        self.theta = scn.source.aoa_theta
        self.amps = scn.source.amplitudes(self.n)
        self.gains = np.array([gain_linear(c.gain_code) for c in scn.channels])
        self.delays = np.array([delay_from_code(c.delay_code) for c in scn.channels])
        self.base_codes = np.array([c.phase_code for c in scn.channels], dtype=int)
        self.loop_elems = np.array(scn.loops.elements, dtype=int)
        self.tick_period = scn.loops.tick_period
        f_lo = scn.source.freq_rf if scn.f_lo_hz is None else scn.f_lo_hz
        self.df = scn.source.freq_rf - f_lo
        coherent = float(np.sum(self.amps * self.gains))
        kind = scn.beamformer.objective_kind
        if kind == "power":
            self.norm = scn.beamformer.target_fullscale / coherent ** 2
        else:
            self.norm = scn.beamformer.target_fullscale / coherent
        self.kind = kind
        self.rng = np.random.default_rng(scn.seed) if scn.noise.enabled else None
        self.sigma = self.amps * self.gains / math.sqrt(
            2.0 * 10.0 ** (scn.noise.snr_db / 10.0))
        n_grid = round(180.0 / scn.grid_step_deg) + 1
        self.grid_rad = np.radians(np.linspace(-90.0, 90.0, n_grid))
        self.saturations = 0
        self.radius_log: list[float] = []
        self._radius = None
        self._geom_phase = None
        self._pattern_mat = None

    def set_radius(self, radius_m: float) -> None:
        if radius_m == self._radius:
            return
        self._radius = radius_m
        deltas = element_path_deltas(radius_m, self.theta, self.s)
        self._geom_phase = self.k * deltas
        self._pattern_mat = None

    def full_codes(self, loop_codes) -> np.ndarray:
        codes = self.base_codes.copy()
        codes[self.loop_elems] = loop_codes
        return codes

    def _weights(self, codes) -> np.ndarray:
        ph = phases_from_codes(codes, self.scn.phase_lsb_rad)
        return self.amps * self.gains * np.exp(1j * ph)

    def raw_objective(self, loop_codes) -> float:
        """Noise-free, dither-free objective at the current radius."""
        w = self._weights(self.full_codes(loop_codes))
        bf = complex(np.sum(w * np.exp(1j * self._geom_phase)))
        return self._collapse(bf) * self.norm

    def _collapse(self, bf):
        if self.kind == "magnitude":
            return np.abs(bf)
        if self.kind == "power":
            return np.abs(bf) ** 2
        return np.real(bf)

    def measure(self, tick: int, loop_codes) -> QWord:
        """One dwell-averaged, normalized, quantized objective reading."""
        self.set_radius(radius_at(self.scn.trajectory, tick, self.tick_period))
        self.radius_log.append(self._radius)
        w = self._weights(self.full_codes(loop_codes))
        base = w * np.exp(1j * self._geom_phase)
        dwell = self.scn.beamformer.dwell_samples
        if self.df != 0.0:
            t_k = tick * self.tick_period + np.arange(dwell) * (self.tick_period / dwell)
            rot = np.exp(1j * 2.0 * math.pi * self.df
                         * (t_k[:, None] - self.delays[None, :]))
            samples = base[None, :] * rot
        else:
            # Homodyne: the dwell samples are identical, their mean exact.
            samples = base[None, :]
        if self.rng is not None:
            noise = (self.rng.normal(size=(dwell, self.n))
                     + 1j * self.rng.normal(size=(dwell, self.n))) * self.sigma
            samples = samples + noise
        x = float(np.mean(self._collapse(samples.sum(axis=1)))) * self.norm
        if would_saturate(x):
            self.saturations += 1
        return quantize(x)

    def pattern_matrix(self) -> np.ndarray:
        if self._pattern_mat is None:
            thetas = self.grid_rad[:, None]
            if math.isinf(self._radius):
                deltas = self.s[None, :] * np.sin(thetas)
            else:
                phi = self.s / self._radius
                deltas = self._radius * (np.cos(thetas - phi[None, :]) - np.cos(thetas))
            self._pattern_mat = np.exp(1j * self.k * deltas)
        return self._pattern_mat

    def pointing_error(self, loop_codes) -> float:
        w = self._weights(self.full_codes(loop_codes))
        mag = np.abs(self.pattern_matrix() @ w)
        return beam_pointing_error(self.grid_rad, mag, self.theta)

    def pattern(self, codes) -> Pattern:
        w = self._weights(np.asarray(codes, dtype=int))
        mag = np.abs(self.pattern_matrix() @ w)
        return Pattern(np.degrees(self.grid_rad), mag)


def simulate(scn: Scenario) -> RunResult:
    """Run the scenario: evolve R(t), feed the loops, collect trace and summary.

    Static trajectories stop at the convergence criterion; step and
    sinusoidal trajectories run the full tick budget so re-convergence
    episodes stay visible in the trace.
    """
    plant = TilePlant(scn)
    plant.set_radius(radius_at(scn.trajectory, 0, plant.tick_period))
    base_loop_codes = plant.base_codes[plant.loop_elems]
    uncompensated = plant.pointing_error(base_loop_codes)

    if scn.loops.count == 0:
        return _simulate_no_loops(scn, plant, uncompensated)

    if scn.loops.init_mode == "coarse":
        init_loop = coarse_code_search(plant.raw_objective, scn.loops.count)
    else:
        init_loop = base_loop_codes.copy()
    loops = scn.loops.build(init_loop)

    trace = run_calibration(
        loops,
        plant.measure,
        tick_budget=scn.tick_budget,
        error_fn=lambda t, codes: plant.pointing_error(codes),
        conv_threshold=scn.loops.conv_threshold,
        conv_periods=scn.loops.conv_periods,
        stop_on_converge=(scn.trajectory.kind == "static"),
    )

    final_loop_codes = trace.final_codes()
    return RunResult(
        scenario=scn,
        trace=trace,
        radius_m=np.array(plant.radius_log),
        init_codes=[int(c) for c in plant.full_codes(init_loop)],
        final_codes=[int(c) for c in plant.full_codes(final_loop_codes)],
        uncompensated_error_deg=uncompensated,
        final_error_deg=float(trace.error_deg[-1]),
        final_objective=plant.raw_objective(final_loop_codes),
        converged=trace.converged,
        ticks_to_converge=trace.ticks_to_converge,
        episodes=trace.episodes,
        saturation_count=plant.saturations + trace.loop_saturations,
    )


def _simulate_no_loops(scn: Scenario, plant: TilePlant, uncompensated: float) -> RunResult:
    """Loop-free run: measure the fixed-code objective every tick."""
    n = scn.tick_budget
    obj = np.zeros(n)
    err = np.zeros(n)
    codes = np.zeros((n, 0), dtype=int)
    for t in range(n):
        obj[t] = plant.measure(t, np.zeros(0, dtype=int)).value
        err[t] = plant.pointing_error(np.zeros(0, dtype=int))
    trace = CalibrationTrace(
        tick=np.arange(n), objective_q=obj, codes=codes, perturbed_codes=codes,
        demod=np.zeros((n, 0)), accumulator=np.zeros((n, 0)), error_deg=err,
        episodes=[], converged=True, ticks_to_converge=0, loop_saturations=0)
    base = [int(c) for c in plant.base_codes]
    return RunResult(
        scenario=scn, trace=trace, radius_m=np.array(plant.radius_log),
        init_codes=base, final_codes=base,
        uncompensated_error_deg=uncompensated, final_error_deg=float(err[-1]),
        final_objective=plant.raw_objective(np.zeros(0, dtype=int)),
        converged=True, ticks_to_converge=0, episodes=[],
        saturation_count=plant.saturations)


def pattern_sweep(scn: Scenario, codes, grid_step_deg: float | None = None,
                  radius_m: float | None = None) -> Pattern:
    """Magnitude pattern over the AoA grid with the given frozen phase codes.

    codes is one phase code (or ChannelSettings) per element.  The radius
    defaults to the trajectory's end-of-run value.
    """
    if grid_step_deg is not None:
        scn = replace(scn, grid_step_deg=grid_step_deg)
    validate_scenario(scn)
    plant = TilePlant(scn)
    if radius_m is None:
        radius_m = radius_at(scn.trajectory, scn.tick_budget, plant.tick_period)
    plant.set_radius(radius_m)
    phase_codes = [c.phase_code if isinstance(c, ChannelSettings) else int(c)
                   for c in codes]
    if len(phase_codes) != scn.geometry.n_elements:
        raise ScenarioError("one phase code per element required")
    return plant.pattern(phase_codes)


# ---------------------------------------------------------------------------
# Serialization: YAML scenario files, CSV traces, JSON summaries.
# ---------------------------------------------------------------------------

def scenario_to_dict(scn: Scenario) -> dict:
    amp = scn.source.amplitude
    return {
        "name": scn.name,
        "seed": int(scn.seed),
        "tick_budget": int(scn.tick_budget),
        "geometry": {
            "layout": scn.geometry.layout,
            "n_elements": int(scn.geometry.n_elements),
            "spacing_d_m": float(scn.geometry.spacing_d_m),
        },
        "source": {
            "aoa_theta_rad": float(scn.source.aoa_theta),
            "freq_rf_hz": float(scn.source.freq_rf),
            "amplitude": ([float(a) for a in amp] if isinstance(amp, (list, tuple))
                          else float(amp)),
        },
        "trajectory": {
            "kind": scn.trajectory.kind,
            "r0_m": float(scn.trajectory.r0_m),
            "r1_m": float(scn.trajectory.r1_m),
            "step_tick": int(scn.trajectory.step_tick),
            "vib_amplitude_m": float(scn.trajectory.vib_amplitude_m),
            "vib_freq_hz": float(scn.trajectory.vib_freq_hz),
        },
        "channels": [
            {"phase_code": int(c.phase_code), "delay_code": int(c.delay_code),
             "gain_code": int(c.gain_code)}
            for c in scn.channels
        ],
        "loops": {
            "elements": [int(e) for e in scn.loops.elements],
            "a_phi": [float(a) for a in scn.loops.a_phi],
            "freq_multipliers": [int(m) for m in scn.loops.freq_multipliers],
            "omega_p_rad_s": float(scn.loops.omega_p_rad_s),
            "lut_len": int(scn.loops.lut_len),
            "hpf_cutoff_rad_s": float(scn.loops.hpf_cutoff_rad_s),
            "a_v": float(scn.loops.a_v),
            "psi_rad": float(scn.loops.psi_rad),
            "wrap_codes": bool(scn.loops.wrap_codes),
            "conv_threshold": float(scn.loops.conv_threshold),
            "conv_periods": int(scn.loops.conv_periods),
            "init_mode": scn.loops.init_mode,
        },
        "noise": {
            "enabled": bool(scn.noise.enabled),
            "snr_db": float(scn.noise.snr_db),
            "seed": int(scn.noise.seed),
        },
        "beamformer": {
            "dwell_samples": int(scn.beamformer.dwell_samples),
            "target_fullscale": float(scn.beamformer.target_fullscale),
            "objective_kind": scn.beamformer.objective_kind,
        },
        "pattern": {"grid_step_deg": float(scn.grid_step_deg)},
        "rf": {
            "phase_lsb_rad": float(scn.phase_lsb_rad),
            "f_lo_hz": None if scn.f_lo_hz is None else float(scn.f_lo_hz),
        },
    }


def _section(d: dict, name: str, keys) -> dict:
    if name not in d:
        raise ScenarioError(f"missing section {name!r}")
    sec = d[name]
    unknown = set(sec) - set(keys)
    if unknown:
        raise ScenarioError(f"unknown keys in {name!r}: {sorted(unknown)}")
    missing = set(keys) - set(sec)
    if missing:
        raise ScenarioError(f"missing keys in {name!r}: {sorted(missing)}")
    return sec


def scenario_from_dict(d: dict) -> Scenario:
    top = {"name", "seed", "tick_budget", "geometry", "source", "trajectory",
           "channels", "loops", "noise", "beamformer", "pattern", "rf"}
    unknown = set(d) - top
    if unknown:
        raise ScenarioError(f"unknown top-level keys: {sorted(unknown)}")
    missing = top - set(d)
    if missing:
        raise ScenarioError(f"missing top-level keys: {sorted(missing)}")
    g = _section(d, "geometry", ["layout", "n_elements", "spacing_d_m"])
    s = _section(d, "source", ["aoa_theta_rad", "freq_rf_hz", "amplitude"])
    t = _section(d, "trajectory", ["kind", "r0_m", "r1_m", "step_tick",
                                   "vib_amplitude_m", "vib_freq_hz"])
    lo = _section(d, "loops", ["elements", "a_phi", "freq_multipliers",
                               "omega_p_rad_s", "lut_len", "hpf_cutoff_rad_s",
                               "a_v", "psi_rad", "wrap_codes", "conv_threshold",
                               "conv_periods", "init_mode"])
    nz = _section(d, "noise", ["enabled", "snr_db", "seed"])
    bf = _section(d, "beamformer", ["dwell_samples", "target_fullscale",
                                    "objective_kind"])
    pat = _section(d, "pattern", ["grid_step_deg"])
    rf = _section(d, "rf", ["phase_lsb_rad", "f_lo_hz"])
    amp = s["amplitude"]
    return Scenario(
        name=str(d["name"]),
        seed=int(d["seed"]),
        tick_budget=int(d["tick_budget"]),
        geometry=GeometrySpec(layout=g["layout"], n_elements=int(g["n_elements"]),
                              spacing_d_m=float(g["spacing_d_m"])),
        source=PlaneWaveSource(
            aoa_theta=float(s["aoa_theta_rad"]), freq_rf=float(s["freq_rf_hz"]),
            amplitude=([float(a) for a in amp] if isinstance(amp, list) else float(amp))),
        trajectory=DeformationTrajectory(
            kind=t["kind"], r0_m=float(t["r0_m"]), r1_m=float(t["r1_m"]),
            step_tick=int(t["step_tick"]),
            vib_amplitude_m=float(t["vib_amplitude_m"]),
            vib_freq_hz=float(t["vib_freq_hz"])),
        channels=[ChannelSettings(phase_code=int(c["phase_code"]),
                                  delay_code=int(c["delay_code"]),
                                  gain_code=int(c["gain_code"]))
                  for c in d["channels"]],
        loops=LoopSetup(
            elements=[int(e) for e in lo["elements"]],
            a_phi=[float(a) for a in lo["a_phi"]],
            freq_multipliers=[int(m) for m in lo["freq_multipliers"]],
            omega_p_rad_s=float(lo["omega_p_rad_s"]), lut_len=int(lo["lut_len"]),
            hpf_cutoff_rad_s=float(lo["hpf_cutoff_rad_s"]), a_v=float(lo["a_v"]),
            psi_rad=float(lo["psi_rad"]), wrap_codes=bool(lo["wrap_codes"]),
            conv_threshold=float(lo["conv_threshold"]),
            conv_periods=int(lo["conv_periods"]), init_mode=lo["init_mode"]),
        noise=NoiseConfig(enabled=bool(nz["enabled"]), snr_db=float(nz["snr_db"]),
                          seed=int(nz["seed"])),
        beamformer=BeamformerSetup(
            dwell_samples=int(bf["dwell_samples"]),
            target_fullscale=float(bf["target_fullscale"]),
            objective_kind=bf["objective_kind"]),
        grid_step_deg=float(pat["grid_step_deg"]),
        phase_lsb_rad=float(rf["phase_lsb_rad"]),
        f_lo_hz=None if rf["f_lo_hz"] is None else float(rf["f_lo_hz"]),
    )


def save_scenario(scn: Scenario, path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(scn), sort_keys=False))


def load_scenario(path) -> Scenario:
    d = yaml.safe_load(Path(path).read_text())
    if not isinstance(d, dict):
        raise ScenarioError(f"scenario file {path} does not hold a mapping")
    return scenario_from_dict(d)


def _fmt(x) -> str:
    """Exact round-trip formatting for CSV cells."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_trace_csv(result: RunResult, path) -> None:
    """Per-tick trace: tick, R_m, code_1..L, perturbed_code_1..L, objective_q, error_deg."""
    tr = result.trace
    n_loops = tr.n_loops
    cols = (["tick", "R_m"]
            + [f"code_{i + 1}" for i in range(n_loops)]
            + [f"perturbed_code_{i + 1}" for i in range(n_loops)]
            + ["objective_q", "error_deg"])
    lines = [",".join(cols)]
    for row in range(len(tr.tick)):
        cells = [str(int(tr.tick[row])), _fmt(result.radius_m[row])]
        cells += [str(int(c)) for c in tr.codes[row]]
        cells += [str(int(c)) for c in tr.perturbed_codes[row]]
        cells += [_fmt(tr.objective_q[row]), _fmt(tr.error_deg[row])]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_pattern_csv(pattern: Pattern, path) -> None:
    lines = ["angle_deg,magnitude"]
    for a, m in zip(pattern.angles_deg, pattern.magnitude):
        lines.append(f"{_fmt(a)},{_fmt(m)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)  # "inf"/"nan" as strings: keep the JSON strict
    return obj


def write_summary(result: RunResult, path) -> None:
    Path(path).write_text(json.dumps(_json_safe(result.summary()), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Canned scenarios.
# ---------------------------------------------------------------------------

HEADLINE_RADIUS_M = 0.38
# Chosen so the zero-code tile bent to 0.38 m shows a 7.0 deg pointing
# error: the uncompensated peak sits at d/(2R) = 5.383 deg off broadside.
HEADLINE_AOA_RAD = math.radians(-1.62)


def headline_scenario() -> Scenario:
    """Static 38 cm bend of the 2x2 tile with all three loops engaged."""
    return Scenario(
        name="headline_r38cm",
        seed=20260811,
        tick_budget=12288,
        geometry=GeometrySpec(layout="grid2x2", n_elements=4, spacing_d_m=0.0714),
        source=PlaneWaveSource(aoa_theta=HEADLINE_AOA_RAD, freq_rf=2.1e9),
        trajectory=DeformationTrajectory(kind="static", r0_m=HEADLINE_RADIUS_M),
        channels=[ChannelSettings() for _ in range(4)],
        loops=LoopSetup(),
        noise=NoiseConfig(enabled=False),
    )


def step_scenario() -> Scenario:
    """Flat sheet snapped onto the 38 cm holder mid-run (dynamic tracking)."""
    scn = headline_scenario()
    scn.name = "step_flat_to_r38cm"
    scn.tick_budget = 18432
    scn.trajectory = DeformationTrajectory(
        kind="step", r0_m=math.inf, r1_m=HEADLINE_RADIUS_M, step_tick=6144)
    return scn


def vibration_scenario() -> Scenario:
    """Slow sinusoidal breathing of the curvature radius."""
    scn = headline_scenario()
    scn.name = "vibration_r50cm"
    scn.tick_budget = 24576
    scn.trajectory = DeformationTrajectory(
        kind="sinusoidal", r0_m=0.5, vib_amplitude_m=0.06, vib_freq_hz=0.05)
    return scn


def two_element_scenario(radius_m: float = math.inf, theta_rad: float = 0.0,
                         a_phi: float = 15.0) -> Scenario:
    """Minimal single-loop scenario on a 2-element arc (tests and demos)."""
    return Scenario(
        name="two_element",
        seed=7,
        tick_budget=8192,
        geometry=GeometrySpec(layout="linear", n_elements=2, spacing_d_m=0.0714),
        source=PlaneWaveSource(aoa_theta=theta_rad, freq_rf=2.1e9),
        trajectory=DeformationTrajectory(kind="static", r0_m=radius_m),
        channels=[ChannelSettings(), ChannelSettings()],
        loops=LoopSetup(elements=[1], a_phi=[a_phi], freq_multipliers=[1]),
        noise=NoiseConfig(enabled=False),
    )
