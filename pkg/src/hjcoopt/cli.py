"""Command-line pipeline driver.

Subcommands: solve-safety, solve-perf, rollout, compare, oracle,
export-plots. Every subcommand reads one JSON config; --grid and --seed are
the only flag overrides so benchmark runs stay auditable. Artifacts embed
the config hash and `compare` refuses inputs whose hash does not match.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bench, oracle, rollout_lab
from .config import config_hash, load_config, save_config, with_overrides
from .errors import HjcooptError
from .grids import save_field
from .systems import benchmark_grid, benchmark_instance


def _add_common(p):
    p.add_argument("--config", required=True, help="benchmark config JSON")
    p.add_argument("--grid", type=int, default=None, help="override grid size (N x N)")
    p.add_argument("--seed", type=int, default=None, help="override rollout seed")


def _load_cfg(args):
    cfg = load_config(args.config)
    return with_overrides(cfg, grid_n=args.grid, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hjcoopt", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-safety", help="solve the safety value field")
    _add_common(p)
    p.add_argument("--out", required=True, help="output field container path")

    p = sub.add_parser("solve-perf", help="solve the performance value field")
    _add_common(p)
    p.add_argument("--vs", required=True, help="solved safety field")
    p.add_argument("--out", required=True)

    p = sub.add_parser("rollout", help="closed-loop rollouts for one method")
    _add_common(p)
    p.add_argument("--vs", required=True)
    p.add_argument("--v", default=None, help="performance field (needed for method 'ours')")
    p.add_argument("--method", required=True, choices=bench.METHODS)
    p.add_argument("--out", required=True, help="metrics JSON path")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("compare", help="merge per-method metrics into the benchmark table")
    _add_common(p)
    p.add_argument("--inputs", nargs="+", required=True, help="metrics JSONs from `rollout`")
    p.add_argument("--out", required=True, help="comparison table JSON path")

    p = sub.add_parser("oracle", help="dump a coarse-grid DP oracle field (debugging)")
    _add_common(p)
    p.add_argument("--kind", choices=("safety", "state", "control"), default="safety")
    p.add_argument("--vs", default=None, help="safety field (for --kind control)")
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--out", required=True)

    p = sub.add_parser("export-plots", help="CSV exports for external plotting")
    _add_common(p)
    p.add_argument("--vs", required=True)
    p.add_argument("--v", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--methods", default="ours", help="comma-separated methods to roll out")
    p.add_argument("--x0", default="-2.58,0.77", help="initial state x1,x2")

    p = sub.add_parser("init-config", help="write the default benchmark config")
    p.add_argument("--out", required=True)
    return ap


def _cmd_solve_safety(args) -> int:
    cfg = _load_cfg(args)
    _, elapsed = bench.solve_safety_artifact(cfg, out_path=args.out)
    print(f"wrote {args.out} ({elapsed:.1f}s, config {config_hash(cfg)[:12]})")
    return 0


def _cmd_solve_perf(args) -> int:
    cfg = _load_cfg(args)
    vs, _ = bench.load_field_checked(args.vs, cfg)
    _, elapsed = bench.solve_performance_artifact(cfg, vs, out_path=args.out)
    print(f"wrote {args.out} ({elapsed:.1f}s)")
    return 0


def _cmd_rollout(args) -> int:
    cfg = _load_cfg(args)
    vs, vs_meta = bench.load_field_checked(args.vs, cfg)
    v = None
    offline = vs_meta.get("solve_seconds", 0.0)
    if args.v:
        v, v_meta = bench.load_field_checked(args.v, cfg)
        offline += v_meta.get("solve_seconds", 0.0)
    x0s = bench.sample_states(cfg, vs)
    t0 = time.perf_counter()
    metrics = bench.run_method(cfg, args.method, vs, v, x0s, workers=args.workers, offline_seconds=offline)
    metrics["wall_seconds"] = time.perf_counter() - t0
    with open(args.out, "w") as f:
        json.dump(metrics, f, indent=2, sort_keys=True)
        f.write("\n")
    n_succ = sum(metrics["successes"])
    print(f"{args.method}: {n_succ}/{len(x0s)} successful rollouts -> {args.out}")
    return 0


def _cmd_compare(args) -> int:
    cfg = _load_cfg(args)
    table = bench.compare_metric_files(args.inputs, cfg)
    with open(args.out, "w") as f:
        json.dump(table, f, indent=2, sort_keys=True)
        f.write("\n")
    print(bench.format_table(table))
    return 0


def _cmd_oracle(args) -> int:
    cfg = _load_cfg(args)
    system, spec = benchmark_instance(cfg)
    grid = benchmark_grid(cfg)
    if args.kind == "safety":
        fld = oracle.dp_safety(system, spec.constraint, grid, cfg.horizon, dt=args.dt, l_many=spec.constraint_many)
    elif args.kind == "state":
        fld = oracle.dp_state_constrained(system, spec, grid, cfg.horizon, dt=args.dt)
    else:
        if not args.vs:
            raise HjcooptError("--kind control requires --vs")
        vs, _ = bench.load_field_checked(args.vs, cfg)
        fld = oracle.dp_control_constrained(system, spec, vs, grid, cfg.horizon, dt=args.dt, gamma=cfg.gamma)
    save_field(fld, args.out, metadata={"config_hash": config_hash(cfg), "kind": f"oracle-{args.kind}"})
    print(f"wrote {args.out}")
    return 0


def _cmd_export_plots(args) -> int:
    cfg = _load_cfg(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    vs, _ = bench.load_field_checked(args.vs, cfg)
    v = bench.load_field_checked(args.v, cfg)[0] if args.v else None
    system, spec = benchmark_instance(cfg)
    kappa = rollout_lab.success_tolerance(vs.grid, cfg.sim_dt)

    bench.export_level_set_csv(out_dir / "level_set.csv", vs)
    geometry = {
        "arena_lo": list(cfg.arena_lo),
        "arena_hi": list(cfg.arena_hi),
        "obstacles": [{"center": list(o.center), "radius": o.radius} for o in cfg.obstacles],
        "goal": list(cfg.goal),
        "config_hash": config_hash(cfg),
    }
    (out_dir / "geometry.json").write_text(json.dumps(geometry, indent=2, sort_keys=True) + "\n")

    x0 = np.array([float(s) for s in args.x0.split(",")])
    for method in args.methods.split(","):
        method = method.strip()
        policy = bench.make_policy(method, cfg, system, spec, vs, v, traj_index=0)
        traj = rollout_lab.rollout(system, spec, policy, x0, cfg.horizon, cfg.sim_dt, kappa=kappa)
        path = out_dir / f"trajectory_{method.replace('-', '_')}.csv"
        bench.export_trajectory_csv(path, traj, spec, vs, v)
        print(
            f"{method}: cost {traj.running_cost_integral:.4f}, "
            f"min margin {traj.min_constraint:.4f}, success {traj.success} -> {path}"
        )
    return 0


def _cmd_init_config(args) -> int:
    from .config import BenchmarkConfig

    save_config(BenchmarkConfig(), args.out)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "solve-safety": _cmd_solve_safety,
    "solve-perf": _cmd_solve_perf,
    "rollout": _cmd_rollout,
    "compare": _cmd_compare,
    "oracle": _cmd_oracle,
    "export-plots": _cmd_export_plots,
    "init-config": _cmd_init_config,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except HjcooptError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
