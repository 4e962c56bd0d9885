"""Command-line front end and brute-force verification oracles.

Modes
-----
run       simulate a scenario, write trace.csv + summary.json
sweep     repeat the run over a list of curvature radii
oracle    exhaustive code search (per-loop curves + joint optimum)
pattern   magnitude patterns for initial, calibrated, and flat codes
selftest  run the built-in invariant suite

Exit codes: 0 success, 1 usage/config error, 2 I/O error,
3 non-convergence under --require-converged.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import beamformer, escal, geometry
from .scenario import (Scenario, ScenarioError, TilePlant, pattern_sweep,
                       scenario_from_dict, scenario_to_dict, simulate,
                       write_pattern_csv, write_summary, write_trace_csv)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NOT_CONVERGED = 3

MODES = ("run", "sweep", "oracle", "pattern", "selftest")

DEFAULT_SWEEP_RADII_M = [0.3, 0.38, 0.5, 1.0]


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    """Everything the CLI needs for one invocation."""

    mode: str
    scenario_path: str | None = None
    out_dir: str = "out"
    overrides: list = field(default_factory=list)  # "key.path=value" strings
    seed: int | None = None
    require_converged: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}; choose from {MODES}")


# ---------------------------------------------------------------------------
# Brute-force oracles.
# ---------------------------------------------------------------------------

def _oracle_plant(scn: Scenario) -> TilePlant:
    if scn.trajectory.kind != "static":
        raise ScenarioError("oracle search requires a static trajectory")
    if scn.noise.enabled:
        raise ScenarioError("oracle search requires noise disabled")
    plant = TilePlant(scn)
    plant.set_radius(scn.trajectory.r0_m)
    return plant


def oracle_exhaustive(scn: Scenario, loop_index: int):
    """Sweep all 256 codes of one loop, others frozen at the scenario codes.

    Returns (best_code, curve) where curve[c] is the noise-free objective
    at code c.
    """
    plant = _oracle_plant(scn)
    if not 0 <= loop_index < scn.loops.count:
        raise ScenarioError(f"loop index {loop_index} out of range")
    base = plant.base_codes[plant.loop_elems].astype(int)
    curve = np.zeros(256)
    for c in range(256):
        codes = base.copy()
        codes[loop_index] = c
        curve[c] = plant.raw_objective(codes)
    return int(np.argmax(curve)), curve


def oracle_joint(scn: Scenario, stride: int = 16, refine_halfwidth: int = 8):
    """Joint optimum over all loop codes: coarse grid, then local refinement.

    Stride-16 grid over every loop code, exhaustive box of +-8 codes per
    axis around the coarse winner, then a +-2 polish.  Returns
    (codes, value).
    """
    plant = _oracle_plant(scn)
    n_loops = scn.loops.count
    lsb = scn.phase_lsb_rad
    # Per-loop-element phasor for each of the 256 codes; the frozen part
    # of the sum covers the reference and any element without a loop.
    geom_phasor = plant.amps * plant.gains * np.exp(1j * plant._geom_phase)
    tables = []
    codes256 = np.arange(256)
    for e in plant.loop_elems:
        tables.append(geom_phasor[e] * np.exp(1j * ((codes256 * lsb) % (2 * np.pi))))
    mask = np.ones(plant.n, dtype=bool)
    mask[plant.loop_elems] = False
    fixed = complex(np.sum(geom_phasor[mask]
                           * np.exp(1j * ((plant.base_codes[mask] * lsb) % (2 * np.pi)))))

    def grid_argmax(code_lists):
        total = np.full([len(c) for c in code_lists], fixed, dtype=complex)
        for i, codes in enumerate(code_lists):
            shape = [1] * n_loops
            shape[i] = len(codes)
            total = total + tables[i][np.asarray(codes) % 256].reshape(shape)
        mag = plant._collapse(total) * plant.norm
        flat = int(np.argmax(mag))
        idx = np.unravel_index(flat, mag.shape)
        return [int(code_lists[i][j]) for i, j in enumerate(idx)], float(mag[idx])

    coarse = [np.arange(0, 256, stride)] * n_loops
    best, value = grid_argmax(coarse)
    for half in (refine_halfwidth, 2):
        boxes = [np.arange(b - half, b + half + 1) % 256 for b in best]
        best, value = grid_argmax(boxes)
    return best, value


# ---------------------------------------------------------------------------
# CLI plumbing.
# ---------------------------------------------------------------------------

def apply_overrides(config: dict, overrides) -> dict:
    """Apply 'dotted.key=value' overrides onto the scenario mapping."""
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        node = config
        parts = key.split(".")
        for p in parts[:-1]:
            if not isinstance(node, dict) or p not in node:
                raise UsageError(f"override path {key!r} not found in scenario")
            node = node[p]
        leaf = parts[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise UsageError(f"override path {key!r} not found in scenario")
        node[leaf] = value
    return config


def _load_with_overrides(manifest: RunManifest) -> Scenario:
    if manifest.scenario_path is None:
        raise UsageError(f"mode {manifest.mode!r} requires --scenario")
    path = Path(manifest.scenario_path)
    if not path.exists():
        raise UsageError(f"scenario file not found: {path}")
    config = yaml.safe_load(path.read_text())
    if not isinstance(config, dict):
        raise ScenarioError(f"scenario file {path} does not hold a mapping")
    config = apply_overrides(config, manifest.overrides)
    scn = scenario_from_dict(config)
    if manifest.seed is not None:
        scn.seed = manifest.seed
    return scn


def _mode_run(manifest: RunManifest, out: Path) -> int:
    scn = _load_with_overrides(manifest)
    result = simulate(scn)
    write_trace_csv(result, out / "trace.csv")
    write_summary(result, out / "summary.json")
    print(f"{scn.name}: uncompensated {result.uncompensated_error_deg:.3f} deg, "
          f"final {result.final_error_deg:.3f} deg, converged={result.converged} "
          f"(ticks_to_converge={result.ticks_to_converge})")
    if manifest.require_converged and not result.converged:
        print("run did not converge within the tick budget", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _mode_sweep(manifest: RunManifest, out: Path) -> int:
    scn0 = _load_with_overrides(manifest)
    radii = DEFAULT_SWEEP_RADII_M
    rows = []
    status = EXIT_OK
    for r in radii:
        d = scenario_to_dict(scn0)
        d["trajectory"]["r0_m"] = float(r)
        d["name"] = f"{scn0.name}_R{r:g}"
        scn = scenario_from_dict(d)
        sub = out / f"R_{r:.6f}"
        sub.mkdir(parents=True, exist_ok=True)
        result = simulate(scn)
        write_trace_csv(result, sub / "trace.csv")
        write_summary(result, sub / "summary.json")
        rows.append((r, result.uncompensated_error_deg, result.final_error_deg,
                     result.converged, result.ticks_to_converge))
        print(f"R={r:g} m: uncompensated {result.uncompensated_error_deg:.3f} deg, "
              f"final {result.final_error_deg:.3f} deg")
        if manifest.require_converged and not result.converged:
            status = EXIT_NOT_CONVERGED
    lines = ["radius_r_m,uncompensated_error_deg,final_error_deg,converged,ticks_to_converge"]
    for r, ue, fe, cv, tc in rows:
        lines.append(f"{r!r},{ue!r},{fe!r},{int(cv)},{'' if tc is None else int(tc)}")
    (out / "sweep_summary.csv").write_text("\n".join(lines) + "\n")
    return status


def _mode_oracle(manifest: RunManifest, out: Path) -> int:
    scn = _load_with_overrides(manifest)
    curves = {}
    best_single = []
    for i in range(scn.loops.count):
        best, curve = oracle_exhaustive(scn, i)
        best_single.append(best)
        curves[i] = curve
        lines = ["code,objective"]
        lines += [f"{c},{curve[c]!r}" for c in range(256)]
        (out / f"oracle_curve_loop{i + 1}.csv").write_text("\n".join(lines) + "\n")
    joint, value = oracle_joint(scn)
    payload = {
        "joint_codes": [int(c) for c in joint],
        "joint_objective": float(value),
        "single_loop_codes": [int(c) for c in best_single],
        "loop_elements": [int(e) for e in scn.loops.elements],
    }
    (out / "oracle.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"joint oracle codes {joint} objective {value:.6f}")
    return EXIT_OK


def _mode_pattern(manifest: RunManifest, out: Path) -> int:
    scn = _load_with_overrides(manifest)
    initial = [c.phase_code for c in scn.channels]
    write_pattern_csv(pattern_sweep(scn, initial), out / "pattern_initial.csv")
    result = simulate(scn)
    write_pattern_csv(pattern_sweep(scn, result.final_codes),
                      out / "pattern_corrected.csv")
    write_pattern_csv(pattern_sweep(scn, initial, radius_m=math.inf),
                      out / "pattern_flat.csv")
    write_summary(result, out / "summary.json")
    print(f"patterns written to {out}")
    return EXIT_OK


def cli_run(manifest: RunManifest) -> int:
    """Execute one CLI invocation; returns the process exit status."""
    try:
        if manifest.mode == "selftest":
            return selftest()
        try:
            out = Path(manifest.out_dir)
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            print(f"cannot create output directory: {exc}", file=sys.stderr)
            return EXIT_IO
        handler = {"run": _mode_run, "sweep": _mode_sweep,
                   "oracle": _mode_oracle, "pattern": _mode_pattern}[manifest.mode]
        return handler(manifest, out)
    except (UsageError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


# ---------------------------------------------------------------------------
# Built-in invariant suite (fast smoke checks, no pytest needed).
# ---------------------------------------------------------------------------

def selftest() -> int:
    checks = []

    def check(name, ok):
        checks.append((name, bool(ok)))
        print(f"selftest: {name:44s} {'PASS' if ok else 'FAIL'}")

    rng = np.random.default_rng(1)
    r = rng.uniform(0.1, 10.0, 2000)
    th = rng.uniform(1e-3, math.pi / 2 - 1e-3, 2000)
    ph = rng.uniform(0, 1, 2000) * th
    lhs = 2 * r * np.sin(ph / 2) * np.sin(th - ph / 2)
    rhs = r * (np.cos(th - ph) - np.cos(th))
    check("chord/closed-form equivalence", np.max(np.abs(lhs - rhs)) < 1e-12)

    d = 0.0714
    big_r = 1e6 * d
    delta = geometry.path_delta(big_r, math.pi / 6, d / big_r)
    check("flat-array limit", abs(delta - d * 0.5) / d < 1e-6)

    geom = geometry.ArrayGeometry(4, d, 0.38)
    src = geometry.PlaneWaveSource(0.2)
    w = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    af1 = abs(geometry.array_factor(geom, src, w))
    af2 = abs(geometry.array_factor(geom, src, w * np.exp(1j * 0.77)))
    check("array-factor global-phase invariance", abs(af1 - af2) < 1e-9)
    conj = np.exp(-1j * geometry.wavenumber(src.freq_rf) * geom.path_deltas(src.aoa_theta))
    check("array-factor coherent equality",
          abs(abs(geometry.array_factor(geom, src, conj)) - 4.0) < 1e-9)

    ks = np.arange(beamformer.QWORD_MIN_INT, beamformer.QWORD_MAX_INT + 1, 97)
    ok = all(beamformer.quantize(k / 1024).value == k / 1024 for k in ks)
    check("quantize round-trip on grid", ok)
    check("quantize saturation",
          beamformer.quantize(1e6).value == beamformer.QWORD_MAX_VALUE
          and beamformer.quantize(-1e6).value == beamformer.QWORD_MIN_VALUE)

    cfg = escal.LoopConfig()
    check("LUT quarter-period peak", escal.lut_sine(cfg, 32) == 1.0)
    meas, ana = _hpf_response(cfg)
    check("HPF response at dither frequency", abs(meas - ana) / ana < 0.03)

    from .scenario import headline_scenario
    scn = headline_scenario()
    scn.tick_budget = 512
    a = simulate(scn)
    b = simulate(scn)
    check("bit-identical reruns",
          np.array_equal(a.trace.objective_q, b.trace.objective_q)
          and np.array_equal(a.trace.codes, b.trace.codes))

    failed = [n for n, ok in checks if not ok]
    return EXIT_OK if not failed else EXIT_USAGE


def _hpf_response(cfg: escal.LoopConfig):
    """Measured vs analytic first-order high-pass gain at omega_p."""
    state = escal.LoopState()
    w = cfg.omega_p * cfg.tick_period
    ys = []
    for n in range(12 * cfg.lut_len):
        x = math.sin(w * n)
        if not state.hpf_primed:
            state.hpf_x_prev = x
            state.hpf_primed = True
        ys.append(escal.hpf_step(cfg, state, x))
    measured = max(abs(v) for v in ys[-cfg.lut_len:])
    ratio = cfg.omega_p / cfg.hpf_cutoff
    analytic = ratio / math.sqrt(1.0 + ratio * ratio)
    return measured, analytic


# ---------------------------------------------------------------------------
# argparse entry point.
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors map to exit code 1, not argparse's 2
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flexbeam",
                description="Conformal-tile beam-correction simulator")
    p.add_argument("--scenario", help="scenario YAML file")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--mode", default="run", choices=MODES, help="what to do")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a scenario field (dotted path)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--require-converged", action="store_true",
                   help="exit 3 if the run does not converge")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        manifest = RunManifest(
            mode=args.mode,
            scenario_path=args.scenario,
            out_dir=args.out,
            overrides=args.overrides,
            seed=args.seed,
            require_converged=args.require_converged,
        )
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return cli_run(manifest)


if __name__ == "__main__":
    sys.exit(main())
