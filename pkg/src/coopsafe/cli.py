"""Command-line entry point: ``coopsafe {brs compute, simulate, batch, verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import coordination, simulator
from .grid_hj import signed_distance_cylinder, solve_brs
from .persistence import (BrsFormatError, ConfigError, RunConfig, load_brs, save_brs, write_metrics,
                          write_summary, write_trace)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_VERIFY = 4
EXIT_NOT_CONVERGED = 5

log = logging.getLogger("coopsafe")


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "method", None) and isinstance(args.method, str):
        cfg = RunConfig.from_dict({**cfg.to_dict(), "method": args.method})
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_field(path):
    field = load_brs(path)
    if not field.converged:
        raise RuntimeError(f"{path}: value function did not converge "
                           f"(residual {field.convergence_residual:.3e})")
    return field


def cmd_brs_compute(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    t0 = time.perf_counter()
    init = signed_distance_cylinder(cfg.grid(), cfg.capture_radius)
    field = solve_brs(init, cfg.params(), cfg.tolerance, cfg.max_iterations)
    wall = time.perf_counter() - t0
    path = Path(args.brs) if args.brs else out / "brs.bin"
    save_brs(field, path)
    for it, res in field.residual_history:
        print(f"sweep {it:6d}  residual {res:.3e}")
    print(f"converged={field.converged} residual={field.convergence_residual:.3e} "
          f"wall={wall:.1f}s -> {path}")
    return EXIT_OK if field.converged else EXIT_NOT_CONVERGED


def _scenario(cfg: RunConfig, n: int | None = None, seed: int | None = None):
    return simulator.random_scenario(
        n or cfg.N, cfg.seed if seed is None else seed, perturbation=cfg.perturbation,
        goal_radius=cfg.goal_radius, params=cfg.params(), capture_radius=cfg.capture_radius, K=cfg.K)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    field = _load_field(args.brs or out / "brs.bin")
    sc = _scenario(cfg)
    trace, metrics = simulator.run_scenario(sc, field, cfg.method, cfg.dt, cfg.t_max,
                                            cfg.violation_radius)
    write_trace(trace, out / "trace.csv")
    write_metrics(metrics, out / "metrics.json")
    if args.svg:
        from .plotting import render_svg
        render_svg(trace, sc, field, out / "scene.svg")
    print(f"success_ratio={metrics.success_ratio:.6f} "
          f"conflict_ratio={metrics.aggregate_conflict_ratio:.6f} steps={metrics.timesteps}")
    return EXIT_OK


def cmd_batch(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    field = _load_field(args.brs or out / "brs.bin")
    methods = args.methods or ["mip", "samv", "baseline"]
    rows = simulator.batch_run(cfg.batch_N, cfg.trials, cfg.seed, methods, field, cfg.dt, cfg.t_max,
                               cfg.violation_radius, perturbation=cfg.perturbation,
                               goal_radius=cfg.goal_radius, params=cfg.params(),
                               capture_radius=cfg.capture_radius, K=cfg.K)
    write_summary(rows, out / "summary.csv")
    for r in rows:
        for err in r["errors"]:
            log.error("N=%d %s: %s", r["N"], r["method"], err)
        print(f"N={r['N']} {r['method']:8s} success={r['success_ratio']:.6f} "
              f"conflict={r['conflict_ratio']:.6f} ({r['completed']}/{r['trials']})")
    return EXIT_OK


def cmd_verify(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if args.which == "theorem1":
        rep = coordination.verify_theorem1()
    elif args.which == "theorem2":
        rep = coordination.verify_theorem2()
    else:
        rep = coordination.verify_mip_oracle(args.trials, args.seed)
    d = rep.to_dict()
    d["seconds"] = time.perf_counter() - t0
    path = out / f"verify_{args.which}.json"
    path.write_text(json.dumps(d, indent=2, default=str))
    print(f"{rep.name}: {'PASS' if rep.passed else 'FAIL'} ({rep.checked} instances checked) -> {path}")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="coopsafe", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    brs = sub.add_parser("brs", help="value-function operations")
    brs_sub = brs.add_subparsers(dest="brs_command", required=True)
    comp = brs_sub.add_parser("compute", parents=[common], help="solve and save the value function")
    comp.add_argument("--brs", help="output file (default <out>/brs.bin)")
    comp.set_defaults(func=cmd_brs_compute)

    sim = sub.add_parser("simulate", parents=[common], help="run one randomized scenario")
    sim.add_argument("--brs")
    sim.add_argument("--method", choices=["mip", "samv", "baseline"])
    sim.add_argument("--svg", action="store_true", help="also write scene.svg")
    sim.set_defaults(func=cmd_simulate)

    bat = sub.add_parser("batch", parents=[common], help="seeded batch over N and methods")
    bat.add_argument("--brs")
    bat.add_argument("--method", dest="methods", action="append",
                     choices=["mip", "samv", "baseline"], help="repeatable; default all three")
    bat.set_defaults(func=cmd_batch)

    ver = sub.add_parser("verify", parents=[common], help="exhaustive MIP checks")
    ver.add_argument("which", choices=["theorem1", "theorem2", "mip-oracle"])
    ver.add_argument("--trials", type=int, default=500)
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BrsFormatError as exc:
        print(f"BRS format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except RuntimeError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
