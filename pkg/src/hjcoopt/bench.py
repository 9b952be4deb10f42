"""End-to-end benchmark pipeline: solve, roll out, compare, export.

Ties the solvers, controller and baselines to one JSON config. Every
artifact embeds the config hash so downstream stages can refuse inputs
produced under a different configuration. Rollouts are independent per
seed and run in a process pool when more than one worker is configured;
results are ordered by seed index, so metrics are bitwise reproducible
regardless of scheduling.
"""

from __future__ import annotations

import csv
import json
import os
import time
from pathlib import Path

import numpy as np

from . import baselines, controller, rollout_lab
from .config import BenchmarkConfig, config_hash
from .errors import ConfigError
from .grids import ValueField, load_field, save_field
from .performance import solve_performance, unreliable_mask
from .safety import solve_safety
from .systems import benchmark_grid, benchmark_instance

__all__ = [
    "METHODS",
    "solve_safety_artifact",
    "solve_performance_artifact",
    "load_field_checked",
    "sample_states",
    "make_policy",
    "run_method",
    "compare_metric_files",
    "export_trajectory_csv",
    "export_level_set_csv",
]

METHODS = ("ours", "mppi", "mppi-filtered", "mpc")


def solve_safety_artifact(cfg: BenchmarkConfig, out_path=None):
    """Solve the safety field for the config; optionally persist it."""
    system, spec = benchmark_instance(cfg)
    grid = benchmark_grid(cfg)
    t0 = time.perf_counter()
    vs = solve_safety(system, spec.constraint, grid, cfg.horizon, cfg.solver, l_many=spec.constraint_many)
    elapsed = time.perf_counter() - t0
    if out_path is not None:
        save_field(vs, out_path, metadata={"config_hash": config_hash(cfg), "kind": "safety", "solve_seconds": elapsed})
    return vs, elapsed


def solve_performance_artifact(cfg: BenchmarkConfig, vs: ValueField, out_path=None):
    system, spec = benchmark_instance(cfg)
    t0 = time.perf_counter()
    v = solve_performance(system, spec, vs, vs.grid, cfg.solver, gamma=cfg.gamma)
    elapsed = time.perf_counter() - t0
    if out_path is not None:
        mask = unreliable_mask(vs)
        save_field(
            v,
            out_path,
            metadata={
                "config_hash": config_hash(cfg),
                "kind": "performance",
                "solve_seconds": elapsed,
                "unreliable_rule": "safety value at t=0 is negative",
                "unreliable_nodes": int(mask.sum()),
            },
        )
    return v, elapsed


def load_field_checked(path, cfg: BenchmarkConfig) -> tuple[ValueField, dict]:
    fld, meta = load_field(path)
    h = meta.get("config_hash")
    if h is not None and h != config_hash(cfg):
        raise ConfigError(f"{path} was produced under a different config (hash mismatch)")
    return fld, meta


def sample_states(cfg: BenchmarkConfig, vs: ValueField) -> np.ndarray:
    return rollout_lab.sample_initial_states(
        vs, cfg.n_rollouts, cfg.seed, cfg.sample_margin, (cfg.arena_lo, cfg.arena_hi)
    )


def make_policy(method: str, cfg: BenchmarkConfig, system, spec, vs, v, traj_index: int):
    """Fresh policy for one trajectory; stateful planners are seeded per index."""
    if method == "ours":
        if v is None:
            raise ConfigError("method 'ours' needs the performance field")
        return controller.synthesize_policy(v, vs, system, spec, gamma=cfg.gamma)
    if method == "mppi":
        return baselines.mppi_policy(system, spec, cfg.mppi, rng_seed=(cfg.seed, traj_index))
    if method == "mppi-filtered":
        nominal = baselines.mppi_policy(system, spec, cfg.mppi, rng_seed=(cfg.seed, traj_index))
        return baselines.filtered_policy(nominal, vs, system, threshold=cfg.filter_threshold, gamma=cfg.gamma)
    if method == "mpc":
        return baselines.mpc_policy(system, spec, cfg.mpc)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


# ---------------------------------------------------------------------------
# parallel rollout harness

_CTX: dict = {}


def _init_worker(cfg_dict, method, vs_payload, v_payload, kappa):
    from .config import config_from_dict

    cfg = config_from_dict(cfg_dict)
    system, spec = benchmark_instance(cfg)
    vs = ValueField(*vs_payload)
    v = ValueField(*v_payload) if v_payload is not None else None
    _CTX.update(cfg=cfg, method=method, system=system, spec=spec, vs=vs, v=v, kappa=kappa)


def _run_one(arg):
    i, x0 = arg
    cfg = _CTX["cfg"]
    system, spec = _CTX["system"], _CTX["spec"]
    policy = make_policy(_CTX["method"], cfg, system, spec, _CTX["vs"], _CTX["v"], i)

    calls = [0]
    clock = [0.0]

    def timed(x, t):
        t0 = time.perf_counter()
        u = policy(x, t)
        clock[0] += time.perf_counter() - t0
        calls[0] += 1
        return u

    traj = rollout_lab.rollout(system, spec, timed, x0, cfg.horizon, cfg.sim_dt, kappa=_CTX["kappa"])
    stats = getattr(policy, "stats", None)
    vs = _CTX["vs"]
    t_cap = float(vs.times[-1])
    min_vs = min(
        vs.value(x, min(t, t_cap)) for x, t in zip(traj.states, traj.times)
    )
    return {
        "index": i,
        "cost": traj.running_cost_integral,
        "success": traj.success,
        "min_constraint": traj.min_constraint,
        "min_safety_value": min_vs,
        "aborted": traj.aborted,
        "online_seconds": clock[0],
        "online_calls": calls[0],
        "filter_stats": dict(stats) if stats else None,
    }


def _field_payload(fld: ValueField | None):
    if fld is None:
        return None
    return (fld.grid, fld.times.copy(), fld.slices.copy())


def run_method(
    cfg: BenchmarkConfig,
    method: str,
    vs: ValueField,
    v: ValueField | None,
    x0s: np.ndarray,
    workers: int | None = None,
    offline_seconds: float | None = None,
) -> dict:
    """Roll out one method from the seeded initial states; JSON-ready result."""
    from .config import config_to_dict

    kappa = rollout_lab.success_tolerance(vs.grid, cfg.sim_dt)
    if workers is None:
        workers = cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)
    workers = max(1, min(workers, len(x0s)))
    args = list(enumerate(np.asarray(x0s, dtype=float)))
    init = (config_to_dict(cfg), method, _field_payload(vs), _field_payload(v), kappa)
    if workers == 1:
        _init_worker(*init)
        results = [_run_one(a) for a in args]
    else:
        import multiprocessing as mp

        ctx = mp.get_context("fork")
        with ctx.Pool(workers, initializer=_init_worker, initargs=init) as pool:
            results = pool.map(_run_one, args)
    results.sort(key=lambda r: r["index"])

    filter_calls = sum(r["filter_stats"]["calls"] for r in results if r["filter_stats"])
    filter_fallbacks = sum(r["filter_stats"]["fallbacks"] for r in results if r["filter_stats"])
    total_calls = sum(r["online_calls"] for r in results)
    out = {
        "method": method,
        "config_hash": config_hash(cfg),
        "kappa": kappa,
        "sample_margin": cfg.sample_margin,
        "initial_states": [[float(c) for c in x] for x in x0s],
        "costs": [r["cost"] for r in results],
        "successes": [r["success"] for r in results],
        "min_constraints": [r["min_constraint"] for r in results],
        "min_safety_values": [r["min_safety_value"] for r in results],
        "aborted": [r["aborted"] for r in results],
        "online_seconds_total": sum(r["online_seconds"] for r in results),
        "online_seconds_per_call": (
            sum(r["online_seconds"] for r in results) / total_calls if total_calls else 0.0
        ),
    }
    if offline_seconds is not None:
        out["offline_seconds"] = offline_seconds
    if filter_calls:
        out["fallback_fraction"] = filter_fallbacks / filter_calls
    return out


def compare_metric_files(paths, cfg: BenchmarkConfig, ours_key: str = "ours") -> dict:
    """Merge per-method metric JSONs into the comparison table.

    Refuses inputs whose embedded config hash differs from cfg's.
    """
    per_method = {}
    expect = config_hash(cfg)
    for p in paths:
        with open(p) as f:
            d = json.load(f)
        if d.get("config_hash") != expect:
            raise ConfigError(f"{p} carries config hash {d.get('config_hash')!r}, expected {expect!r}")
        per_method[d["method"]] = d
    ours = ours_key if ours_key in per_method else next(iter(per_method))
    table = rollout_lab.compare(per_method, ours_key=ours)
    table["config_hash"] = expect
    table["reference_method"] = ours
    if per_method:
        any_d = next(iter(per_method.values()))
        table["kappa"] = any_d.get("kappa")
        table["sample_margin"] = any_d.get("sample_margin")
    return table


def format_table(table: dict) -> str:
    """Human-readable text rendering of the comparison table."""
    lines = []
    ref = table.get("reference_method", "ours")
    header = f"{'method':<15} {'success':>8} {'mean cost':>10} {'>cost vs ' + ref:>12} {'mean % worse':>12}"
    lines.append(header)
    lines.append("-" * len(header))
    for name, m in table["methods"].items():
        pw = table["pairwise_vs_ours"].get(name, {})
        frac = pw.get("frac_higher_cost")
        pct = pw.get("mean_pct_higher_cost")
        mc = m.get("mean_cost_on_success")
        lines.append(
            f"{name:<15} {m['success_rate']:>8.2%} "
            f"{mc if mc is not None else float('nan'):>10.4f} "
            f"{(f'{frac:.0%}' if frac is not None else '-'):>12} "
            f"{(f'{pct:.2f}%' if pct is not None else '-'):>12}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# exports

def export_trajectory_csv(path, traj, spec, vs: ValueField, v: ValueField | None):
    """Per-step CSV: t, x1, x2, u1, u2, l(x), Vs and V along the trajectory."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "x1", "x2", "u1", "u2", "l", "vs", "v"])
        for k, (t, x) in enumerate(zip(traj.times, traj.states)):
            u = traj.controls[k] if k < len(traj.controls) else [float("nan")] * 2
            t_q = min(t, float(vs.times[-1]))
            row = [t, x[0], x[1], u[0], u[1], spec.constraint(x), vs.value(x, t_q)]
            row.append(v.value(x, t_q) if v is not None else float("nan"))
            w.writerow([f"{val:.10g}" for val in row])


def export_level_set_csv(path, vs: ValueField, level: float = 0.0, t: float | None = None):
    """Zero-level-set polylines of the safety field at time t (default t0)."""
    from skimage import measure

    t = float(vs.times[0]) if t is None else t
    arr = vs.slice_at(t)
    contours = measure.find_contours(arr, level)
    grid = vs.grid
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["contour", "x1", "x2"])
        for ci, contour in enumerate(contours):
            xs = grid.lo[0] + contour[:, 0] * grid.spacing[0]
            ys = grid.lo[1] + contour[:, 1] * grid.spacing[1]
            for x1v, x2v in zip(xs, ys):
                w.writerow([ci, f"{x1v:.10g}", f"{x2v:.10g}"])
