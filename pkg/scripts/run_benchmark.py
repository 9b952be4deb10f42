#!/usr/bin/env python3
"""Full benchmark pipeline: solve both fields, roll out every method from the
same seeded initial states, and print the comparison table.

Equivalent to chaining the CLI subcommands; kept as one script so a complete
reproduction is a single command:

    python scripts/run_benchmark.py --out results/ [--grid 70] [--seed 1234]
"""

import argparse
import json
import time
from pathlib import Path

from hjcoopt.bench import (
    METHODS,
    compare_metric_files,
    export_level_set_csv,
    format_table,
    run_method,
    sample_states,
    solve_performance_artifact,
    solve_safety_artifact,
)
from hjcoopt.config import BenchmarkConfig, config_hash, load_config, save_config, with_overrides


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="benchmark config JSON (default: built-in)")
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--grid", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--methods", default=",".join(METHODS))
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    cfg = load_config(args.config) if args.config else BenchmarkConfig()
    cfg = with_overrides(cfg, grid_n=args.grid, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    print(f"config hash {config_hash(cfg)[:12]}, grid {cfg.grid_n}, seed {cfg.seed}")

    t0 = time.perf_counter()
    vs, t_vs = solve_safety_artifact(cfg, out_path=out / "vs.bin")
    v, t_v = solve_performance_artifact(cfg, vs, out_path=out / "v.bin")
    print(f"solved safety ({t_vs:.1f}s) and performance ({t_v:.1f}s) fields")
    export_level_set_csv(out / "level_set.csv", vs)

    x0s = sample_states(cfg, vs)
    metric_paths = []
    for method in args.methods.split(","):
        method = method.strip()
        t1 = time.perf_counter()
        v_arg = v if method == "ours" else None
        metrics = run_method(cfg, method, vs, v_arg, x0s, workers=args.workers, offline_seconds=t_vs + t_v)
        metrics["wall_seconds"] = time.perf_counter() - t1
        path = out / f"metrics_{method.replace('-', '_')}.json"
        path.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
        metric_paths.append(path)
        n_ok = sum(metrics["successes"])
        print(f"{method:14s} {n_ok:3d}/{len(x0s)} successful, {metrics['wall_seconds']:.0f}s")

    table = compare_metric_files(metric_paths, cfg)
    (out / "comparison.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    print()
    print(format_table(table))
    print(f"\ntotal {time.perf_counter() - t0:.0f}s; artifacts in {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
