"""flexbeam: conformal phased-array tile simulator with self-calibrating loops.

The package models a 2.1 GHz receive tile printed on a bendable sheet:
bending shifts the beam, and per-element extremum-seeking loops dither
the 8-bit phase codes to steer it back without any model of the
deformation.  Everything is desk-scale and deterministic, checked against
brute-force code searches.
"""

from .geometry import (ArrayGeometry, PlaneWaveSource, array_factor,
                       beam_pointing_error, chord_length, element_path_deltas,
                       path_delta, wavenumber)
from .signal_model import (ChannelSettings, NoiseConfig, channel_sample,
                           delay_from_code, gain_from_code, gain_linear,
                           phase_from_code)
from .beamformer import BfSample, QWord, bf_out, objective, quantize
from .escal import (CalibrationTrace, LoopConfig, LoopState, accumulate,
                    coarse_code_search, demod_response, demodulate, hpf_step,
                    init_phase_codes, loop_step, lut_sine, run_calibration)
from .scenario import (DeformationTrajectory, Pattern, RunResult, Scenario,
                       ScenarioError, TilePlant, headline_scenario,
                       load_scenario, pattern_sweep, radius_at, save_scenario,
                       simulate, step_scenario, two_element_scenario,
                       vibration_scenario, write_summary, write_trace_csv)
from .harness import RunManifest, cli_run, oracle_exhaustive, oracle_joint

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry", "PlaneWaveSource", "array_factor", "beam_pointing_error",
    "chord_length", "element_path_deltas", "path_delta", "wavenumber",
    "ChannelSettings", "NoiseConfig", "channel_sample", "delay_from_code",
    "gain_from_code", "gain_linear", "phase_from_code",
    "BfSample", "QWord", "bf_out", "objective", "quantize",
    "CalibrationTrace", "LoopConfig", "LoopState", "accumulate",
    "coarse_code_search", "demod_response", "demodulate", "hpf_step",
    "init_phase_codes", "loop_step", "lut_sine", "run_calibration",
    "DeformationTrajectory", "Pattern", "RunResult", "Scenario", "ScenarioError",
    "TilePlant", "headline_scenario", "load_scenario", "pattern_sweep", "radius_at",
    "save_scenario", "simulate", "step_scenario", "two_element_scenario",
    "vibration_scenario", "write_summary", "write_trace_csv",
    "RunManifest", "cli_run", "oracle_exhaustive", "oracle_joint",
]
