"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import harness, ohmic, sampling
from .dynamics import Trajectory
from .errors import ConfigError, MecReconError, NumericalError, StageError
from .tomography import MeasurementPlan, samples_to_csv, synthesize

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_FAIL = 0, 2, 3, 4

# flag dest -> config key
_FLAG_KEYS = {
    "preset": "preset", "alpha": "alpha", "omega_c": "omega_c", "temperature": "temperature",
    "theory_alpha": "theory_alpha", "theory_omega_c": "theory_omega_c",
    "theory_temperature": "theory_temperature",
    "approach": "approach", "case": "case", "bw_threshold": "bw_threshold",
    "bw_criterion": "bw_criterion", "noise_sigma": "noise_sigma", "seed": "seed", "dt": "dt",
    "tbar": "tbar", "xi": "xi", "out": "out", "source": "source", "scheme": "fd_scheme",
    "sampling": "sampling", "spacing": "spacing_family",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON config; flags override its values")
    p.add_argument("--preset", choices=sorted(ohmic.PRESETS))
    p.add_argument("--alpha", type=float)
    p.add_argument("--omega-c", dest="omega_c", type=float)
    p.add_argument("--temperature", type=float)
    p.add_argument("--tbar", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mecrecon",
                                 description="Reconstruct GSP master-equation coefficients.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="evolve the benchmark cumulants and write a CSV")
    _add_common(p)
    p.add_argument("--points", type=int, default=1201)

    p = sub.add_parser("tomograms", help="synthesize tomogram samples along a trajectory")
    _add_common(p)
    p.add_argument("--points", type=int, default=13)

    p = sub.add_parser("reconstruct", help="run a Case I or Case II reconstruction")
    _add_common(p)
    p.add_argument("--approach", choices=["integral", "differential"])
    p.add_argument("--case", type=int, choices=[1, 2])
    p.add_argument("--bw-threshold", dest="bw_threshold", type=float)
    p.add_argument("--bw-criterion", dest="bw_criterion", choices=["peak", "integral"])
    p.add_argument("--source", choices=["oracle", "tomography"])
    p.add_argument("--scheme", choices=["forward", "centered"])
    p.add_argument("--sampling", choices=["uniform", "random"])
    p.add_argument("--spacing", choices=["exponential", "gamma", "delta"])
    p.add_argument("--theory-alpha", dest="theory_alpha", type=float)
    p.add_argument("--theory-omega-c", dest="theory_omega_c", type=float)
    p.add_argument("--theory-temperature", dest="theory_temperature", type=float)

    p = sub.add_parser("replicate-paper", help="benchmark figure bandwidths, counts and plot data")
    p.add_argument("--out", default="replication")
    p.add_argument("--bw-criterion", dest="bw_criterion", choices=["peak", "integral"],
                   default="peak")
    p.add_argument("--no-plots", dest="plots", action="store_false")

    p = sub.add_parser("check-alias-free", help="injectivity test of a spacing distribution")
    p.add_argument("--dist", required=True, choices=["exponential", "gamma", "delta"])
    p.add_argument("--h", type=float, required=True, help="mean spacing")
    p.add_argument("--shape", type=float, default=2.0, help="gamma shape k")
    return ap


def config_from_args(args) -> harness.ExperimentConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a flat JSON object")
    for dest, key in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            base[key] = v
    if base.get("preset") is None and "alpha" in base:
        base["preset"] = None
    return harness.ExperimentConfig.from_dict(base)


def _out_dir(cfg, default) -> Path:
    out = Path(cfg.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = config_from_args(args)
    grid = np.linspace(0.0, cfg.resolved_tbar, args.points)
    src = harness.oracle_source(cfg.true_params(), harness.probe_state(cfg))
    traj: Trajectory = src(grid)
    path = _out_dir(cfg, "simulate") / "cumulants.csv"
    traj.to_csv(path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_tomograms(args) -> int:
    cfg = config_from_args(args)
    grid = np.linspace(0.0, cfg.resolved_tbar, args.points)
    p = cfg.true_params()
    init = harness.probe_state(cfg)
    traj = harness.oracle_source(p, init)(grid)
    rng = np.random.default_rng(cfg.seed)
    out = _out_dir(cfg, "tomograms")
    for k, (t, st) in enumerate(zip(traj.times, traj.states)):
        prior = harness.free_prior(init, p.hamiltonian(), float(t))
        samples = synthesize(st, MeasurementPlan.around(prior), cfg.noise_sigma, rng)
        samples_to_csv(samples, out / f"tomogram_{k:04d}.csv")
    traj.to_csv(out / "cumulants_true.csv")
    print(f"wrote {len(traj)} tomogram files to {out}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = config_from_args(args)
    report = harness.run_case1(cfg) if cfg.case == 1 else harness.run_case2(cfg)
    out = _out_dir(cfg, "reconstruct")
    harness.export(report, out)
    for c in report.curves:
        err = "" if c.rms_rel_error is None else (
            f" rms_rel={c.rms_rel_error:.3g} max_rel={c.max_rel_error:.3g}")
        print(f"{c.name}: W={c.bandwidth_w:.6g} N={c.point_count}{err}")
    for name, rp in report.extras.get("random_plans", {}).items():
        print(f"{name}: random plan n={len(rp['times'])} h={rp['mean_spacing']:.6g}; "
              f"{rp['diagnostic']}")
    if report.verdict is not None:
        print(f"verdict: {report.verdict}")
    print(f"report written to {out}")
    return EXIT_FAIL if report.verdict == "FAIL" else EXIT_OK


def cmd_replicate(args) -> int:
    res = harness.replicate_paper(args.out, plots=args.plots, criterion=args.bw_criterion)
    print(f"{'figure':7} {'thr':>7} {'2piW':>10} {'N':>5} {'caption':>8} {'capN':>5}  W  N")
    for r in res["table"]:
        ok_w = "ok" if r["w_ok"] else "--"
        ok_n = "ex" if r["n_exempt"] else ("ok" if r["n_ok"] else "--")
        print(f"{r['label']:7} {r['threshold']:7.0e} {2 * np.pi * r['w']:10.4g} {r['n']:5d} "
              f"{2 * np.pi * r['caption_w']:8.4g} {r['caption_n']:5d}  {ok_w} {ok_n}")
    print(f"plot data written to {args.out}" if args.plots else "")
    return EXIT_OK


def cmd_alias(args) -> int:
    try:
        dist = sampling.SpacingDistribution(args.dist, args.h, args.shape)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    verdict = sampling.alias_free_check(dist)
    print(json.dumps({"dist": args.dist, "h": args.h, "alias_free": verdict.alias_free,
                      "collision": verdict.collision, "diagnostic": verdict.describe()}))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "tomograms": cmd_tomograms,
    "reconstruct": cmd_reconstruct,
    "replicate-paper": cmd_replicate,
    "check-alias-free": cmd_alias,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc.cause, ConfigError) else EXIT_NUMERICAL
    except (NumericalError, MecReconError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
