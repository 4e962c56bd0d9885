import cmath
import math

import numpy as np
import pytest

from flexbeam.beamformer import quantize
from flexbeam.escal import (LoopConfig, LoopState, accumulate, coarse_code_search,
                            demod_response, demodulate, estimate_psi, hpf_step,
                            init_phase_codes, loop_step, lut_sine, run_calibration)
from flexbeam.geometry import ArrayGeometry, PlaneWaveSource


def make_phasor_objective(opt_code: float, scale: float = 14.0):
    """Two-phasor magnitude with its maximum at opt_code (circularly unimodal)."""
    def f(code):
        return scale * abs(1 + cmath.exp(1j * ((code - opt_code) * 2 * math.pi / 256)))
    return f


def make_plant(objective):
    def plant(tick, applied):
        return quantize(objective(int(applied[0])))
    return plant


def sweep_oracle(objective):
    curve = [objective(c) for c in range(256)]
    return int(np.argmax(curve)), curve


def circ_dist(a, b, span=256):
    d = abs((a - b) % span)
    return min(d, span - d)


# --- LUT -------------------------------------------------------------------

def test_lut_sine_zero_entry():
    assert lut_sine(LoopConfig(), 0) == 0.0


def test_lut_sine_quarter_period_is_exactly_one():
    cfg = LoopConfig()
    assert lut_sine(cfg, 32) == 1.0
    assert lut_sine(cfg, 96) == -1.0


def test_lut_sine_eighth_period_quantization():
    # Nearest 17-bit sign-magnitude value to sin(pi/4).
    expected = math.floor(math.sin(math.pi / 4) * 32768 + 0.5) / 32768
    assert lut_sine(LoopConfig(), 16) == expected == 23170 / 32768


def test_lut_sine_index_range_checked():
    with pytest.raises(ValueError):
        lut_sine(LoopConfig(), 128)
    with pytest.raises(ValueError):
        lut_sine(LoopConfig(), -1)


def test_lut_sine_half_period_antisymmetry():
    # Exact in sign-magnitude quantization.
    cfg = LoopConfig()
    for i in range(64):
        assert lut_sine(cfg, i) == -lut_sine(cfg, i + 64)


# --- HPF -------------------------------------------------------------------

def test_hpf_rejects_dc():
    cfg = LoopConfig()
    state = LoopState()
    y = None
    for _ in range(3000):
        y = hpf_step(cfg, state, 5.0)
    assert abs(y) < 1e-6


def test_hpf_zero_in_zero_out():
    cfg = LoopConfig()
    state = LoopState()
    assert all(hpf_step(cfg, state, 0.0) == 0.0 for _ in range(100))


def test_hpf_gain_at_dither_frequency():
    cfg = LoopConfig()
    state = LoopState()
    w = cfg.omega_p * cfg.tick_period
    last_period = []
    for n in range(12 * cfg.lut_len):
        y = hpf_step(cfg, state, math.sin(w * n))
        if n >= 11 * cfg.lut_len:
            last_period.append(abs(y))
    ratio = cfg.omega_p / cfg.hpf_cutoff  # 6 by default
    analytic = ratio / math.sqrt(1 + ratio * ratio)  # 0.98639
    assert analytic == pytest.approx(6 / math.sqrt(37), abs=1e-12)
    assert abs(max(last_period) - analytic) / analytic < 0.03


# --- demodulation ----------------------------------------------------------

def test_demodulate_zero_input():
    assert demodulate(LoopConfig(), 0.0, 17) == 0.0


def test_demodulate_in_phase_has_positive_mean():
    cfg = LoopConfig()
    state = LoopState()
    w = 2 * math.pi / cfg.lut_len
    total = 0.0
    idx = 0
    for n in range(6 * cfg.lut_len):
        idx = (idx + 1) % cfg.lut_len
        y = hpf_step(cfg, state, math.sin(w * n))
        if n >= 2 * cfg.lut_len:
            total += demodulate(cfg, y, idx)
    assert total > 0.0


def test_demodulated_sign_matches_finite_difference():
    f = make_phasor_objective(opt_code=140.0)
    cfg = LoopConfig(a_phi=15.0)
    for code in (40, 90, 120, 170, 200, 250):
        mean_demod = demod_response(cfg, f, code)
        fd = f((code + 1) % 256) - f((code - 1) % 256)
        assert math.copysign(1, mean_demod) == math.copysign(1, fd), code


def test_demodulation_taylor_factor_on_quadratic():
    # Quadratic objective: the per-period demod mean equals the slope times
    # the known dither factor a*|H|*cos(angle(H) - w)/2, where w is the
    # per-tick dither phase step (the response is demodulated one tick late).
    cfg = LoopConfig(a_phi=15.0)
    curvature, center = 0.002, 150.0

    def f(code):
        return 25.0 - curvature * (code - center) ** 2

    w = 2 * math.pi * cfg.freq_multiplier / cfg.lut_len
    alpha = cfg.hpf_alpha
    z = cmath.exp(-1j * w)
    h = alpha * (1 - z) / (1 - alpha * z)
    for code in (110.0, 130.0, 170.0):
        slope = -2 * curvature * (code - center)
        expected = cfg.a_phi * abs(h) * math.cos(cmath.phase(h) - w) / 2 * slope
        measured = demod_response(cfg, f, code, n_periods=6)
        assert measured == pytest.approx(expected, rel=0.05)


# --- accumulation ----------------------------------------------------------

def test_accumulate_zero_demod_keeps_estimate():
    cfg = LoopConfig()
    state = LoopState.at_code(100)
    for _ in range(50):
        accumulate(cfg, state, 0.0)
    assert state.code_estimate == 100.0


def test_accumulate_constant_demod_ramps_linearly():
    cfg = LoopConfig(a_phi=16.0, a_v=2.0 ** -8)
    state = LoopState.at_code(10)
    step = 0.5
    estimates = []
    for _ in range(64):
        accumulate(cfg, state, step)
        estimates.append(state.code_estimate)
    gain = cfg.a_phi * cfg.a_v * step  # exact power-of-two increments
    expected = 10 + gain * np.arange(1, 65)
    assert np.allclose(estimates, expected, atol=cfg.internal_lsb)


def test_accumulate_saturates_when_wrap_disabled():
    cfg = LoopConfig(a_phi=16.0, a_v=1.0, wrap_codes=False)
    state = LoopState.at_code(250)
    for _ in range(100):
        accumulate(cfg, state, 1.0)
    assert state.code_estimate == 256.0 - cfg.internal_lsb
    assert state.saturation_count > 0
    down = LoopState.at_code(3)
    for _ in range(100):
        accumulate(cfg, down, -1.0)
    assert down.code_estimate == 0.0


def test_accumulate_wraps_when_enabled():
    cfg = LoopConfig(a_phi=16.0, a_v=1.0, wrap_codes=True)
    state = LoopState.at_code(250)
    for _ in range(2):
        accumulate(cfg, state, 1.0)
    assert state.code_estimate == pytest.approx((250 + 32) % 256)
    assert state.saturation_count == 0


# --- loop_step -------------------------------------------------------------

def test_first_tick_from_reset():
    cfg = LoopConfig(a_phi=15.0)
    state = LoopState.at_code(100)
    _, applied = loop_step(cfg, state, quantize(20.0))
    # Zero history: the filter is precharged, so no correction yet; the
    # applied code is the initial code plus the first dither entry, truncated.
    assert state.code_estimate == 100.0
    assert applied == math.floor(100 + 15.0 * lut_sine(cfg, 1))
    assert state.lut_index == 1


def test_loop_converges_upward_and_downward():
    for opt in (140.0, 60.0):  # above and below the initial code
        f = make_phasor_objective(opt)
        oracle, _ = sweep_oracle(f)
        cfg = LoopConfig(a_phi=15.0)
        state = LoopState.at_code(100)
        trace = run_calibration([(cfg, state)], make_plant(f), tick_budget=12800)
        assert trace.converged
        final = trace.codes[-1, 0]
        assert circ_dist(final, oracle) <= 2
        # Envelope of the approach: the distance at period ends shrinks.
        ends = trace.codes[cfg.lut_len - 1::cfg.lut_len, 0]
        dists = [circ_dist(c, oracle) for c in ends]
        assert dists[0] >= dists[len(dists) // 2] >= dists[-1] - 1


def test_loop_converges_from_any_in_basin_initialization():
    f = make_phasor_objective(170.0)
    oracle, _ = sweep_oracle(f)
    for start in (120, 150, 190, 220):
        cfg = LoopConfig(a_phi=15.0)
        state = LoopState.at_code(start)
        trace = run_calibration([(cfg, state)], make_plant(f), tick_budget=12800)
        assert trace.converged, start
        assert circ_dist(trace.codes[-1, 0], oracle) <= 2, start


def test_stationary_optimum_has_bounded_oscillation():
    f = make_phasor_objective(128.0)
    cfg = LoopConfig(a_phi=15.0)
    state = LoopState.at_code(128)
    trace = run_calibration([(cfg, state)], make_plant(f), tick_budget=10 * 128,
                            stop_on_converge=False)
    drift = abs(float(np.mean(trace.codes[:, 0])) - 128.0)
    assert drift < 1.0
    assert np.max(np.abs(trace.perturbed_codes[:, 0].astype(float) - 128.0)) \
        <= math.ceil(cfg.a_phi) + 1


def test_steady_state_holds_for_fifty_periods():
    f = make_phasor_objective(128.0)
    cfg = LoopConfig(a_phi=15.0)
    state = LoopState.at_code(128)
    trace = run_calibration([(cfg, state)], make_plant(f), tick_budget=50 * 128,
                            stop_on_converge=False)
    assert np.max(np.abs(trace.codes[:, 0].astype(float) - 128.0)) <= cfg.a_phi
    assert trace.loop_saturations == 0


def test_run_calibration_is_deterministic():
    f = make_phasor_objective(77.0)

    def run():
        cfg = LoopConfig(a_phi=15.0)
        return run_calibration([(cfg, LoopState.at_code(40))], make_plant(f),
                               tick_budget=2048)

    a, b = run(), run()
    assert np.array_equal(a.codes, b.codes)
    assert np.array_equal(a.objective_q, b.objective_q)
    assert np.array_equal(a.demod, b.demod)


def test_budget_exhaustion_reports_not_raises():
    f = make_phasor_objective(200.0)
    cfg = LoopConfig(a_phi=15.0)
    state = LoopState.at_code(40)
    trace = run_calibration([(cfg, state)], make_plant(f), tick_budget=64)
    assert not trace.converged
    assert trace.ticks_to_converge is None
    assert len(trace.tick) == 64


# --- initialization --------------------------------------------------------

def test_coarse_search_flat_broadside_picks_zero():
    geom = ArrayGeometry(4, 0.0714, math.inf)
    src = PlaneWaveSource(0.0)
    assert init_phase_codes(geom, src) == [0, 0, 0, 0]


def test_coarse_search_lands_in_basin_of_known_deformation():
    geom = ArrayGeometry(2, 0.0714, 0.38)
    src = PlaneWaveSource(0.3)
    from flexbeam.geometry import wavenumber
    k = wavenumber(src.freq_rf)

    def f(codes):
        return abs(1 + cmath.exp(1j * (k * geom.path_deltas(0.3)[1]
                                       + codes[0] * 2 * math.pi / 256)))

    oracle, _ = sweep_oracle(lambda c: f(np.array([c])))
    init = init_phase_codes(geom, src)
    assert init[0] == 0
    assert circ_dist(init[1], oracle) <= 16


def test_coarse_search_respects_stride_grid():
    f = make_phasor_objective(100.0)
    codes = coarse_code_search(lambda c: f(int(c[0])), 1, stride=16)
    assert codes[0] % 16 == 0
    assert circ_dist(codes[0], 100) <= 8 + 1


# --- pilot psi estimate ----------------------------------------------------

def test_estimate_psi_small_without_bench_delay():
    f = make_phasor_objective(170.0)
    cfg = LoopConfig(a_phi=15.0)
    psi = estimate_psi(cfg, f, code_estimate=120.0)
    entries = psi / (2 * math.pi / cfg.lut_len)
    assert min(entries, cfg.lut_len - entries) <= 4


def test_loop_config_validation():
    with pytest.raises(ValueError):
        LoopConfig(omega_p=4.0, hpf_cutoff=5.0)
    with pytest.raises(ValueError):
        LoopConfig(freq_multiplier=0)


def test_internal_word_export():
    state = LoopState.at_code(100)
    state.code_estimate = 100.99609375  # 100 + 255/256
    assert state.phase_code == 100
