"""Extremum-seeking self-calibration loops for the phase-shifter codes.

Each loop dithers one 8-bit phase code with a small LUT-generated sine,
watches the quantized beamformed magnitude respond, and integrates the
demodulated response to climb the objective:

    tick n:   P_applied = floor(P_hat + a_phi * sin_lut[i_n])
              y[n]     = hpf(BF_word[n])            # strip the DC term
              d[n]     = y[n] * sin_lut[i_n + psi]  # slope estimate
              acc     += d[n]
              P_hat    = P_init + a_phi * a_v * acc

The product y*sin is positive on average while the objective still rises
with the code, so the accumulator walks the estimate uphill and its step
shrinks to zero at the optimum.  One tick advances the LUT by the loop's
frequency multiplier; the base tick period is Ts = 2*pi/(omega_p*lut_len).

When several loops share the beamformed output their dithers must be
mutually orthogonal or the demodulators cannot separate the per-code
gradients (identical dithers give every loop the same demod stream and
confine the joint estimate to a line).  Loops therefore default to odd
integer multiples (1x, 3x, 5x, ...) of omega_p: exact orthogonality over
one 128-tick super-period, and quadratic mixing products, which land on
even multiples, never alias onto a dither frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .beamformer import QWord, quantize
from .geometry import ArrayGeometry, PlaneWaveSource, array_factor
from .signal_model import PHASE_CODE_MAX, PHASE_LSB_RAD

CONV_THRESHOLD = 2.0 ** -8  # |per-period mean demod| below this counts as settled
CONV_PERIODS = 5            # consecutive settled super-periods to declare convergence

_LUT_CACHE: dict[tuple[int, int], np.ndarray] = {}


@dataclass
class LoopConfig:
    """Static parameters of one calibration loop.

    a_phi scales both the injected dither and the accumulated correction
    (in 8-bit code LSBs); a_v is the demodulation/accumulator gain.  The
    dither must pass the high-pass filter: omega_p > hpf_cutoff.
    """

    omega_p: float = 30.0           # rad/s
    lut_len: int = 128
    lut_entry_bits: int = 17        # 1 sign + 1 integer + 15 fractional bits
    hpf_cutoff: float = 5.0         # rad/s
    a_phi: float = 15.0
    a_v: float = 2.0 ** -8
    psi: float = 0.0                # demodulation phase correction, radians
    code_bits_internal: int = 16
    code_bits_output: int = 8
    freq_multiplier: int = 1        # LUT entries advanced per tick
    wrap_codes: bool = True         # modular code estimate (phase is periodic)

    def __post_init__(self):
        if self.omega_p <= self.hpf_cutoff:
            raise ValueError("perturbation frequency must exceed the HPF cutoff")
        if self.lut_len < 4:
            raise ValueError("LUT too short to hold a sine period")
        if self.freq_multiplier < 1:
            raise ValueError("frequency multiplier must be a positive integer")

    @property
    def tick_period(self) -> float:
        """Seconds per tick: one base-rate LUT entry per tick."""
        return 2.0 * math.pi / (self.omega_p * self.lut_len)

    @property
    def hpf_alpha(self) -> float:
        return 1.0 / (1.0 + self.hpf_cutoff * self.tick_period)

    @property
    def code_span(self) -> int:
        return 1 << self.code_bits_output

    @property
    def internal_lsb(self) -> float:
        """Code-estimate resolution: sub-LSB bits of the internal word."""
        return 2.0 ** -(self.code_bits_internal - self.code_bits_output)

    @property
    def psi_entries(self) -> int:
        return int(round(self.psi / (2.0 * math.pi) * self.lut_len)) % self.lut_len


@dataclass
class LoopState:
    """Mutable state of one loop instance."""

    lut_index: int = 0
    hpf_y: float = 0.0
    hpf_x_prev: float = 0.0
    hpf_primed: bool = False
    accumulator: float = 0.0
    initial_code: float = 0.0
    code_estimate: float = 0.0
    iteration: int = 0
    saturation_count: int = 0
    last_demod: float = 0.0

    @classmethod
    def at_code(cls, code: float) -> "LoopState":
        return cls(initial_code=float(code), code_estimate=float(code))

    @property
    def phase_code(self) -> int:
        """Exported 8-bit code: top bits of the internal word."""
        return int(self.code_estimate)


def _lut_table(lut_len: int, entry_bits: int) -> np.ndarray:
    key = (lut_len, entry_bits)
    table = _LUT_CACHE.get(key)
    if table is None:
        unit = 1 << (entry_bits - 2)  # sign + integer bit + fractional bits
        v = np.sin(2.0 * np.pi * np.arange(lut_len) / lut_len)
        table = np.sign(v) * np.floor(np.abs(v) * unit + 0.5) / unit
        _LUT_CACHE[key] = table
    return table


def lut_sine(cfg: LoopConfig, index: int) -> float:
    """Quantized sine entry: sign-magnitude with +-1.0 exactly representable."""
    if not 0 <= index < cfg.lut_len:
        raise ValueError(f"LUT index out of range: {index}")
    return float(_lut_table(cfg.lut_len, cfg.lut_entry_bits)[index])


def hpf_step(cfg: LoopConfig, state: LoopState, x: float) -> float:
    """First-order discrete high-pass y[n] = alpha*(y[n-1] + x[n] - x[n-1]).

    alpha = 1/(1 + w_c*Ts) rejects the DC part of the objective while
    passing the dither nearly unattenuated (w_p/w_c = 6 by default).
    """
    y = cfg.hpf_alpha * (state.hpf_y + x - state.hpf_x_prev)
    state.hpf_y = y
    state.hpf_x_prev = x
    return y


def demodulate(cfg: LoopConfig, hpf_out: float, index: int) -> float:
    """Multiply the filtered objective by the (psi-shifted) dither sine.

    The sign of the product carries the gradient direction, its size the
    local slope, so the accumulated step shrinks near the optimum.
    """
    return hpf_out * lut_sine(cfg, (index + cfg.psi_entries) % cfg.lut_len)


def accumulate(cfg: LoopConfig, state: LoopState, demod: float) -> float:
    """Integrate the demodulated slope into the code estimate.

    code_estimate = initial_code + a_phi*a_v*accumulator, quantized to the
    internal sub-LSB grid.  With wrap_codes the arithmetic is modular (an
    8-bit phase code is exactly periodic); otherwise the estimate clamps
    at the ends of the code range and the accumulator is pulled back so it
    cannot wind up beyond the clamp.
    """
    state.accumulator += demod
    raw = state.initial_code + cfg.a_phi * cfg.a_v * state.accumulator
    span = float(cfg.code_span)
    if cfg.wrap_codes:
        est = raw % span
    else:
        est = min(max(raw, 0.0), span - cfg.internal_lsb)
        if est != raw:
            state.saturation_count += 1
            gain = cfg.a_phi * cfg.a_v
            if gain != 0.0:
                state.accumulator = (est - state.initial_code) / gain
    state.code_estimate = math.floor(est / cfg.internal_lsb) * cfg.internal_lsb
    return state.code_estimate


def applied_code(cfg: LoopConfig, state: LoopState) -> int:
    """Code actually driven into the phase shifter this tick (estimate + dither)."""
    p = state.code_estimate + cfg.a_phi * lut_sine(cfg, state.lut_index)
    code = math.floor(p)
    if cfg.wrap_codes:
        return code % cfg.code_span
    return min(max(code, 0), cfg.code_span - 1)


def loop_step(cfg: LoopConfig, state: LoopState, bf_word: QWord) -> tuple[LoopState, int]:
    """One calibration tick.

    bf_word is the quantized objective measured under the code this loop
    applied on the previous tick.  Advances the LUT, filters, demodulates,
    accumulates, and returns the next code to apply.
    """
    state.iteration += 1
    state.lut_index = (state.lut_index + cfg.freq_multiplier) % cfg.lut_len
    x = bf_word.value
    if not state.hpf_primed:
        # Pre-charge the filter so the power-up DC step does not slew the
        # accumulator before any dither response exists.
        state.hpf_x_prev = x
        state.hpf_primed = True
    y = hpf_step(cfg, state, x)
    d = demodulate(cfg, y, state.lut_index)
    state.last_demod = d
    accumulate(cfg, state, d)
    return state, applied_code(cfg, state)


@dataclass
class CalibrationTrace:
    """Per-tick record of a calibration run plus convergence bookkeeping."""

    tick: np.ndarray
    objective_q: np.ndarray
    codes: np.ndarray            # (n_ticks, n_loops) exported estimates
    perturbed_codes: np.ndarray  # (n_ticks, n_loops) applied (dithered) codes
    demod: np.ndarray            # (n_ticks, n_loops)
    accumulator: np.ndarray      # (n_ticks, n_loops)
    error_deg: np.ndarray
    episodes: list = field(default_factory=list)  # ticks where convergence was declared
    converged: bool = False
    ticks_to_converge: int | None = None
    loop_saturations: int = 0

    @property
    def n_loops(self) -> int:
        return self.codes.shape[1]

    def final_codes(self) -> list[int]:
        return [int(c) for c in self.codes[-1]]


def run_calibration(loops: Sequence[tuple[LoopConfig, LoopState]],
                    plant: Callable[[int, np.ndarray], QWord],
                    *,
                    tick_budget: int,
                    error_fn: Callable[[int, np.ndarray], float] | None = None,
                    conv_threshold: float = CONV_THRESHOLD,
                    conv_periods: int = CONV_PERIODS,
                    stop_on_converge: bool = True) -> CalibrationTrace:
    """Run all loops in tick-lockstep against a shared objective.

    plant(tick, applied_codes) returns the quantized objective for the
    codes currently driven into the phase shifters; error_fn(tick, codes)
    optionally reports the pointing error of the undithered estimates for
    the trace.  Convergence is declared when every loop's per-super-period
    mean demodulated output stays below conv_threshold for conv_periods
    consecutive periods; running out of budget yields a non-converged
    trace, not an error.

    Exhausting the budget is reported, not raised; with stop_on_converge
    False the loops keep running (and may re-converge) after the first
    episode, which is how dynamic-deformation runs are traced.
    """
    if tick_budget <= 0:
        raise ValueError("tick budget must be positive")
    n_loops = len(loops)
    period = max((cfg.lut_len for cfg, _ in loops), default=128)

    tick_arr = np.arange(tick_budget, dtype=int)
    obj_arr = np.zeros(tick_budget)
    codes_arr = np.zeros((tick_budget, n_loops), dtype=int)
    pert_arr = np.zeros((tick_budget, n_loops), dtype=int)
    demod_arr = np.zeros((tick_budget, n_loops))
    acc_arr = np.zeros((tick_budget, n_loops))
    err_arr = np.full(tick_budget, np.nan)

    applied = np.array([state.phase_code for _, state in loops], dtype=int)
    episodes: list[int] = []
    streak = 0
    in_converged = False
    n_ticks = tick_budget

    for t in range(tick_budget):
        qw = plant(t, applied)
        obj_arr[t] = qw.value
        for i, (cfg, state) in enumerate(loops):
            _, code = loop_step(cfg, state, qw)
            applied[i] = code
            codes_arr[t, i] = state.phase_code
            pert_arr[t, i] = code
            demod_arr[t, i] = state.last_demod
            acc_arr[t, i] = state.accumulator
        if error_fn is not None:
            err_arr[t] = error_fn(t, codes_arr[t])
        if t % period == period - 1:
            start = t - period + 1
            settled = bool(np.all(
                np.abs(demod_arr[start:t + 1].mean(axis=0)) < conv_threshold))
            streak = streak + 1 if settled else 0
            if streak >= conv_periods:
                if not in_converged:
                    episodes.append(t)
                    in_converged = True
                if stop_on_converge:
                    n_ticks = t + 1
                    break
            elif not settled:
                in_converged = False

    sl = slice(0, n_ticks)
    return CalibrationTrace(
        tick=tick_arr[sl],
        objective_q=obj_arr[sl],
        codes=codes_arr[sl],
        perturbed_codes=pert_arr[sl],
        demod=demod_arr[sl],
        accumulator=acc_arr[sl],
        error_deg=err_arr[sl],
        episodes=episodes,
        converged=in_converged,
        ticks_to_converge=episodes[0] if episodes else None,
        loop_saturations=sum(state.saturation_count for _, state in loops),
    )


def coarse_code_search(objective: Callable[[np.ndarray], float], n_loops: int,
                       stride: int = 16, start_codes=None) -> np.ndarray:
    """Stride-N sweep of each code with the others held, best value wins.

    The result sits inside the main-lobe basin (within stride/2 codes of
    the slice optimum per axis), which is all the loops need to avoid
    locking onto a side lobe.
    """
    codes = np.zeros(n_loops, dtype=int) if start_codes is None \
        else np.asarray(start_codes, dtype=int).copy()
    for i in range(n_loops):
        candidates = np.arange(0, PHASE_CODE_MAX + 1, stride)
        best_v, best_c = -np.inf, codes[i]
        for c in candidates:
            trial = codes.copy()
            trial[i] = c
            v = objective(trial)
            if v > best_v:
                best_v, best_c = v, c
        codes[i] = best_c
    return codes


def init_phase_codes(geom: ArrayGeometry, src: PlaneWaveSource,
                     stride: int = 16) -> list[int]:
    """Main-lobe-basin starting codes for a bare conformal array.

    Coarse per-code sweep of the array-factor magnitude with unit
    amplitudes; element 0 is the reference and keeps code 0.
    """
    def objective(loop_codes: np.ndarray) -> float:
        phases = np.concatenate(([0.0], loop_codes * PHASE_LSB_RAD))
        return abs(array_factor(geom, src, np.exp(1j * phases)))

    codes = coarse_code_search(objective, geom.n_elements - 1, stride=stride)
    return [0] + [int(c) for c in codes]


def demod_response(cfg: LoopConfig, objective: Callable[[int], float],
                   code_estimate: float, n_periods: int = 4,
                   warmup_periods: int = 3) -> float:
    """Mean demodulated output at a frozen code estimate.

    Dithers around code_estimate without accumulating (probe mode),
    quantizing the objective exactly as the loop would see it, and
    averages the demod over n_periods after discarding the filter
    transient.  The sign is the loop's estimate of the gradient sign.
    """
    state = LoopState.at_code(code_estimate)
    probe = replace(cfg, a_v=0.0)
    total = 0.0
    count = 0
    warmup = warmup_periods * probe.lut_len
    applied = state.phase_code
    for t in range((warmup_periods + n_periods) * probe.lut_len):
        qw = quantize(objective(applied))
        state.iteration += 1
        state.lut_index = (state.lut_index + probe.freq_multiplier) % probe.lut_len
        x = qw.value
        if not state.hpf_primed:
            state.hpf_x_prev = x
            state.hpf_primed = True
        y = hpf_step(probe, state, x)
        d = demodulate(probe, y, state.lut_index)
        if t >= warmup:
            total += d
            count += 1
        applied = applied_code(probe, state)
    return total / count


def estimate_psi(cfg: LoopConfig, objective: Callable[[int], float],
                 code_estimate: float, n_periods: int = 4) -> float:
    """Pilot routine: find the demodulation phase that maximizes response.

    Dithers at a frozen, deliberately off-optimum code and correlates the
    filtered response against every LUT shift; the argmax shift converts
    to a psi in radians.  Useful when the measurement path adds latency.
    """
    state = LoopState.at_code(code_estimate)
    probe = replace(cfg, a_v=0.0, psi=0.0)
    warmup = 2 * probe.lut_len
    n = n_periods * probe.lut_len
    ys = np.zeros(n)
    idxs = np.zeros(n, dtype=int)
    applied = state.phase_code
    for t in range(warmup + n):
        qw = quantize(objective(applied))
        state.iteration += 1
        state.lut_index = (state.lut_index + probe.freq_multiplier) % probe.lut_len
        x = qw.value
        if not state.hpf_primed:
            state.hpf_x_prev = x
            state.hpf_primed = True
        y = hpf_step(probe, state, x)
        if t >= warmup:
            ys[t - warmup] = y
            idxs[t - warmup] = state.lut_index
        applied = applied_code(probe, state)
    table = _lut_table(probe.lut_len, probe.lut_entry_bits)
    scores = [abs(float(np.mean(ys * table[(idxs + s) % probe.lut_len])))
              for s in range(probe.lut_len)]
    return (int(np.argmax(scores)) * 2.0 * math.pi / probe.lut_len) % (2.0 * math.pi)
