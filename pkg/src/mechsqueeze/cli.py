"""Command-line front end.

Usage::

    mechsqueeze <subcommand> --config path [--set key=value]... [--out dir] [--seed n]

Subcommands write CSV/JSON artifacts into the output directory and print a
one-line summary.  Exit status: 0 on success, 2 for usage or configuration
errors, 3 when an engine fails numerically.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import fock_table_rows, write_csv, write_json
from .config import ScenarioConfig, load_config, validate_config
from .errors import ConfigError, MechSqueezeError
from .fock import (
    TwoModeSqueezeOp,
    phonon_stats,
    product_distribution,
    squeezed_thermal_probabilities,
    thermal_weighted_distribution,
)
from .gaussian import VACUUM_VARIANCE, duan_simon_value, epr_product, squeezing_db, wigner_projection
from .protocol import TwoModeEvolution, echo_ratio_vs_delay, fit_echo_decay, single_mode_jump_protocol
from .spectroscopy import gaussian_fit, ratio_curve, synthesize_velocity_scan, velocity_sigma

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class NumericalFailure(Exception):
    def __init__(self, operation: str, cause: BaseException):
        super().__init__(f"{operation}: {cause}")
        self.operation = operation


@contextlib.contextmanager
def _stage(operation: str):
    try:
        yield
    except ConfigError:
        raise
    except (MechSqueezeError, ArithmeticError, np.linalg.LinAlgError) as e:
        raise NumericalFailure(operation, e) from e


class _Run:
    """Output directory, metadata and format switches shared by a subcommand."""

    def __init__(self, cfg: ScenarioConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.meta = {"config_sha256": cfg.sha256, "version": __version__, "seed": cfg.seed}
        self.files: list[Path] = []

    def csv(self, name, kind, columns, rows):
        if "csv" in self.cfg["formats"]:
            self.files.append(write_csv(self.out / f"{name}.csv", kind, columns, rows, self.meta))

    def json(self, name, kind, payload):
        if "json" in self.cfg["formats"]:
            self.files.append(write_json(self.out / f"{name}.json", kind, payload, self.meta))


def _evolution(cfg: ScenarioConfig, phase: float) -> TwoModeEvolution:
    return TwoModeEvolution(cfg.oscillator(), phase, cfg["nbar0"])


def cmd_widths(cfg: ScenarioConfig, run: _Run) -> str:
    osc = cfg.oscillator()
    t = np.linspace(0.0, cfg["widths_t_max_us"] * 1e-6, cfg["widths_steps"])
    with _stage("two_mode_protocol"):
        quad = _evolution(cfg, math.pi / 2)
        inph = _evolution(cfg, 0.0)
        w_q = np.array([quad.momentum_width(ti) for ti in t])
        w_i = np.array([inph.momentum_width(ti) for ti in t])
    scale = 2 * osc.dv0 * 100
    run.csv("widths", "widths", ["time_us", "width_quadrature_phase", "width_in_phase", "dv_quadrature_phase_cm_s",
                                  "dv_in_phase_cm_s"],
            [(ti * 1e6, a, b, a * scale, b * scale) for ti, a, b in zip(t, w_q, w_i)])
    vac = math.sqrt(VACUUM_VARIANCE)
    payload = {
        "r": cfg.r,
        "nbar0": cfg["nbar0"],
        "quadrature_phase": {"mean_width": float(w_q.mean()), "ratio_to_vacuum": float(w_q.mean() / vac),
                             "peak_to_peak": float(np.ptp(w_q))},
        "in_phase": {"min_width": float(w_i.min()), "max_width": float(w_i.max()),
                     "min_db_below_vacuum": float(squeezing_db(w_i.min() / vac))},
        "vacuum_dv0_cm_s": osc.dv0 * 100,
    }
    run.json("widths", "widths", payload)
    return (f"widths: r={cfg.r:.4g} quadrature-phase width x{w_q.mean() / vac:.4f} vacuum (p-p {np.ptp(w_q):.1e}), "
            f"in-phase min {payload['in_phase']['min_db_below_vacuum']:.2f} dB below vacuum")


def cmd_criteria(cfg: ScenarioConfig, run: _Run) -> str:
    with _stage("criteria"):
        state = _evolution(cfg, cfg["relative_phase_rad"]).output_state(0.0)
        ds = duan_simon_value(state, 0, 1)
        epr = epr_product(state, 0, 1)
        ds_opt = duan_simon_value(state, 0, 1, optimize_phase=True)
        epr_opt = epr_product(state, 0, 1, optimize_phase=True)
    payload = {
        "r": cfg.r,
        "nbar0": cfg["nbar0"],
        "relative_phase_rad": cfg["relative_phase_rad"],
        "duan_simon": ds,
        "duan_simon_threshold": 1.0,
        "epr_product": epr,
        "epr_threshold": 0.25,
        "duan_simon_local_phase_optimized": ds_opt,
        "epr_product_local_phase_optimized": epr_opt,
        "inseparable": ds < 1.0,
        "verdict": f"steering: {'yes' if epr < 0.25 else 'no'}",
    }
    run.json("criteria", "criteria", payload)
    return (f"criteria: duan_simon={ds:.4f} (<1: {'yes' if ds < 1 else 'no'}) epr_product={epr:.4f} "
            f"{payload['verdict']}")


def cmd_fock(cfg: ScenarioConfig, run: _Run) -> str:
    r, nbar0, n_max = cfg.r, cfg["nbar0"], cfg["n_max"]
    with _stage("thermal_weighted_distribution"):
        tmsv = thermal_weighted_distribution(TwoModeSqueezeOp(r, l_cap=cfg["l_cap"]), nbar0, n_max)
    with _stage("squeezed_thermal_probabilities"):
        single = squeezed_thermal_probabilities(r, nbar0, n_max)
        smsv = product_distribution(single, single)
    report = {"r": r, "nbar0": nbar0, "n_max": n_max, "l_cap": cfg["l_cap"]}
    for name, dist in (("tmsv", tmsv), ("smsv", smsv)):
        run.csv(f"fock_{name}", f"fock_{name}", *fock_table_rows(dist.probs))
        mean, var = phonon_stats(dist, 0, gate=None)
        report[name] = {"truncation_mass": dist.truncation_mass, "mean_x": mean, "variance_x": var,
                        "warnings": list(dist.warnings)}
    run.json("fock", "fock", report)
    return (f"fock: r={r:.4g} n_max={n_max} truncation tmsv={tmsv.truncation_mass:.2e} "
            f"smsv={smsv.truncation_mass:.2e}")


def cmd_ratio(cfg: ScenarioConfig, run: _Run) -> str:
    rs = np.linspace(0.0, cfg["ratio_r_max"], cfg["ratio_steps"])
    model = cfg.sideband()
    with _stage("ratio_curve"):
        two = ratio_curve(rs, "two-mode", model, cfg["nbar0"], cfg["n_max"], l_cap=cfg["l_cap"])
        one = ratio_curve(rs, "single-mode", model, cfg["nbar0"], cfg["n_max"])
        lost_two = 1 - thermal_weighted_distribution(TwoModeSqueezeOp(rs[-1], l_cap=cfg["l_cap"]), cfg["nbar0"],
                                                     cfg["n_max"]).probs.sum()
        lost_one = 1 - squeezed_thermal_probabilities(rs[-1], cfg["nbar0"], cfg["n_max"]).sum()
    run.csv("ratio", "ratio", ["r", "R_two_mode", "R_single_mode"], zip(rs, two, one))
    run.json("ratio", "ratio", {"n_max": cfg["n_max"], "nbar0": cfg["nbar0"],
                                "truncation_mass_at_r_max": {"two_mode": lost_two, "single_mode": lost_one}})
    return f"ratio: {len(rs)} points r<= {rs[-1]:.3g}; at r_max R_two_mode={two[-1]:.4f} R_single_mode={one[-1]:.4f}"


def cmd_echo(cfg: ScenarioConfig, run: _Run) -> str:
    osc = cfg.oscillator()
    inhom = cfg.inhomogeneity()
    tau = np.linspace(0.0, cfg["echo_tau_max_us"] * 1e-6, cfg["echo_steps"])
    with _stage("echo_ratio_vs_delay"):
        trace = echo_ratio_vs_delay(cfg.r, tau, osc, inhom, cfg.sideband(), nbar0=cfg["nbar0"],
                                    gate=cfg["truncation_gate"])
    run.csv("echo", "echo", ["tau_us", "R"], trace.rows())
    _, schedule = single_mode_jump_protocol(osc)
    run.csv("echo_schedule", "schedule", ["time_us", "frequency_hz"], schedule.rows())
    fits = {}
    with _stage("fit_decaying_sinusoid"):
        for env in ("gaussian", "exponential"):
            if env == "gaussian" or inhom.sigma_omega > 0:
                fits[env] = fit_echo_decay(trace, osc.omega, envelope=env)
    payload = {
        "r": cfg.r,
        "sigma_omega_rad_s": inhom.sigma_omega,
        "target_decay_us": inhom.decay_time * 1e6 if inhom.sigma_omega else None,
        "fits": {k: f.to_dict() for k, f in fits.items()},
        "decay_time_us": fits["gaussian"].decay_time * 1e6,
        "period_us": fits["gaussian"].period * 1e6,
    }
    run.json("echo", "echo", payload)
    return (f"echo: {len(tau)} delays, fitted 1/e decay {payload['decay_time_us']:.2f} us, "
            f"period {payload['period_us']:.4f} us")


_WIGNER_PAIRS = {"px_py": (1, 3), "x_px": (0, 1), "y_py": (2, 3)}


def cmd_wigner(cfg: ScenarioConfig, run: _Run) -> str:
    b, n = cfg["wigner_bound"], cfg["wigner_resolution"]
    with _stage("wigner_projection"):
        state = _evolution(cfg, cfg["relative_phase_rad"]).output_state(cfg["wigner_time_us"] * 1e-6)
        grids = {k: wigner_projection(state, pair, (-b, b), n) for k, pair in _WIGNER_PAIRS.items()}
    integrals = {}
    for name, g in grids.items():
        rows = [(u, v, g.values[i, j]) for i, u in enumerate(g.first) for j, v in enumerate(g.second)]
        run.csv(f"wigner_{name}", f"wigner_{name}", ["first", "second", "W"], rows)
        integrals[name] = g.integral()
    run.json("wigner", "wigner", {"time_us": cfg["wigner_time_us"], "bound": b, "resolution": n,
                                  "quadrature_pairs": {k: list(v) for k, v in _WIGNER_PAIRS.items()},
                                  "grid_integrals": integrals, "covariance": state.cov})
    return f"wigner: {len(grids)} grids {n}x{n} over +-{b:g}, min integral {min(integrals.values()):.4f}"


def cmd_velocimetry(cfg: ScenarioConfig, run: _Run) -> str:
    osc = cfg.oscillator()
    pulse = cfg["velocimetry_pulse_ms"] * 1e-3
    with _stage("two_mode_protocol"):
        # x' and y' axis weights carry the 45-degree projection themselves
        state = _evolution(cfg, cfg["relative_phase_rad"]).lab_state(0.0)
    report = {}
    for i, axis in enumerate(("x'", "y'")):
        name = "xp" if axis == "x'" else "yp"
        with _stage("synthesize_velocity_scan"):
            sigma = velocity_sigma(state, axis, osc) * cfg.k_eff
            grid = (-4 * sigma, 4 * sigma, cfg["velocimetry_points"])
            scan = synthesize_velocity_scan(state, axis, osc, grid, noise=cfg["velocimetry_noise"],
                                            seed=cfg.seed + i, k_eff=cfg.k_eff, pulse_duration=pulse,
                                            convolve=cfg["velocimetry_convolve"])
        with _stage("gaussian_fit"):
            fit = gaussian_fit(scan)
        run.csv(f"velocimetry_{name}", "velocity_scan", ["detuning_hz", "velocity_cm_s", "fraction"],
                zip(scan.detunings / (2 * math.pi), scan.velocities * 100, scan.excited_fraction))
        err = fit.stderr[1]
        report[axis] = {
            "fit": fit.to_dict(),
            "sigma_v_cm_s": fit.sigma / cfg.k_eff * 100,
            "sigma_v_stderr_cm_s": err / cfg.k_eff * 100,
            "expected_sigma_v_cm_s": sigma / cfg.k_eff * 100,
            "within_2_stderr": bool(abs(fit.sigma - sigma) <= 2 * err),
            "noise_seed": scan.noise_seed,
        }
    report["vacuum_dv0_cm_s"] = osc.dv0 * 100
    run.json("velocimetry", "velocimetry", report)
    a, b = report["x'"], report["y'"]
    return (f"velocimetry: x' {a['sigma_v_cm_s']:.3f}({a['sigma_v_stderr_cm_s']:.3f}) cm/s, "
            f"y' {b['sigma_v_cm_s']:.3f}({b['sigma_v_stderr_cm_s']:.3f}) cm/s, vacuum {osc.dv0 * 100:.3f} cm/s")


COMMANDS = {
    "widths": cmd_widths,
    "criteria": cmd_criteria,
    "fock": cmd_fock,
    "ratio": cmd_ratio,
    "echo": cmd_echo,
    "wigner": cmd_wigner,
    "velocimetry": cmd_velocimetry,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mechsqueeze", description="Two-mode mechanical squeezing scenarios.")
    p.add_argument("subcommand", choices=[*COMMANDS, "validate"])
    p.add_argument("--config", help="scenario JSON file (defaults apply to missing keys)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key; value parsed as JSON, null removes the key")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--seed", type=int, help="random seed (overrides seed)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    try:
        if args.subcommand == "validate":
            print(json.dumps(validate_config(args.config, overrides, seed=args.seed), sort_keys=True))
            return EXIT_OK
        cfg = load_config(args.config, overrides, seed=args.seed)
        if args.out is not None:
            cfg = ScenarioConfig({**cfg.values, "out_dir": args.out}, cfg.source)
        out = Path(cfg["out_dir"])
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"out_dir: cannot create {out}: {e.strerror}") from None
        run = _Run(cfg, out)
        summary = COMMANDS[args.subcommand](cfg, run)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as e:
        print(f"numerical failure in {e.operation}: {e.__cause__}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{summary} -> {len(run.files)} files in {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
