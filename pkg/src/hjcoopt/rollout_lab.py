"""Closed-loop simulation, initial-state sampling and benchmark metrics.

Rollouts integrate the dynamics with classical RK4 under a zero-order-hold
control per step, accumulate the running cost by the trapezoid rule on the
same ladder, and track the worst constraint margin along the way. A
trajectory succeeds when that margin never falls below -kappa, where kappa
ties to grid and step resolution rather than exact feasibility, because the
certified-safe region is itself known only to interpolation accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grids import GridSpec, ValueField
from .systems import ProblemSpec, SystemModel

__all__ = [
    "Trajectory",
    "rollout",
    "sample_initial_states",
    "success_tolerance",
    "compare",
]


def success_tolerance(grid: GridSpec, sim_dt: float) -> float:
    """kappa = 2 * (coarsest grid spacing + simulation step)."""
    return 2.0 * (max(grid.spacing) + sim_dt)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    running_cost_integral: float
    min_constraint: float
    success: bool
    aborted: str | None = None
    extras: dict = field(default_factory=dict)


def rollout(
    system: SystemModel,
    spec: ProblemSpec,
    policy,
    x0,
    T: float,
    dt: float,
    kappa: float = 0.0,
) -> Trajectory:
    """Simulate policy(state, time) from x0 over [0, T] at step dt."""
    steps = int(round(T / dt))
    if not (dt > 0 and abs(steps * dt - T) <= 1e-9 * max(1.0, T)):
        raise ConfigError(f"dt={dt} must positively divide T={T}")
    x = np.asarray(x0, dtype=float).copy()
    times = [0.0]
    states = [x.copy()]
    controls = []
    cost = 0.0
    min_l = spec.constraint(x)
    aborted = None
    for k in range(steps):
        t = k * dt
        try:
            u = np.asarray(policy(x, t), dtype=float)
            if not np.isfinite(u).all():
                raise ValueError(f"policy returned non-finite control {u}")
            if not system.control_set.contains(u, tol=1e-6):
                raise ValueError(f"policy returned inadmissible control {u}")
        except Exception as exc:  # noqa: BLE001 - a policy fault fails the trajectory
            aborted = f"policy error at t={t:.4f}: {exc}"
            break
        u = system.control_set.project(u)
        r0 = spec.running_cost(x, u)
        k1 = system.f(x, u)
        k2 = system.f(x + 0.5 * dt * k1, u)
        k3 = system.f(x + 0.5 * dt * k2, u)
        k4 = system.f(x + dt * k3, u)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        cost += 0.5 * dt * (r0 + spec.running_cost(x, u))
        min_l = min(min_l, spec.constraint(x))
        times.append(t + dt)
        states.append(x.copy())
        controls.append(u)
    success = aborted is None and min_l >= -kappa
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        controls=np.array(controls).reshape(len(controls), system.control_dim),
        running_cost_integral=float(cost),
        min_constraint=float(min_l),
        success=bool(success),
        aborted=aborted,
    )


def sample_initial_states(
    vs: ValueField,
    n: int,
    seed: int,
    margin: float,
    bounds: tuple,
    max_draws: int = 1_000_000,
) -> np.ndarray:
    """Rejection-sample n states uniform over `bounds` with Vs(x, t0) >= margin.

    Deterministic for a given seed. Raises when the acceptance rate stays
    under 1% after max_draws proposals (empty or near-empty region).
    """
    if margin < 0:
        raise ConfigError("margin must be nonnegative")
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    rng = np.random.default_rng(seed)
    t0 = float(vs.times[0])
    accepted: list[np.ndarray] = []
    drawn = 0
    chunk = 4096
    while sum(len(a) for a in accepted) < n:
        pts = rng.uniform(lo, hi, size=(chunk, len(lo)))
        drawn += chunk
        vals = vs.value_many(pts, t0)
        accepted.append(pts[vals >= margin])
        got = sum(len(a) for a in accepted)
        if drawn >= max_draws and got < max(n, 0.01 * drawn):
            raise ConfigError(
                f"acceptance rate {got / drawn:.2%} after {drawn} draws; "
                f"margin {margin} leaves (almost) no admissible region"
            )
    return np.vstack(accepted)[:n]


def compare(per_method: dict[str, dict], ours_key: str = "ours", tie_tol: float = 1e-9) -> dict:
    """Aggregate per-method rollout results into the benchmark metrics table.

    per_method maps a method name to {"costs": [...], "successes": [...],
    plus optional timing entries}; every method must come from the identical
    seeded initial-state list. Pairwise rows compare each baseline to
    `ours_key` over the seeds where both succeeded: the fraction of those
    seeds with strictly higher cost (ties excluded by tie_tol) and the mean
    percentage cost excess.
    """
    if ours_key not in per_method:
        raise ConfigError(f"comparison reference {ours_key!r} missing from inputs")
    lengths = {name: len(d["costs"]) for name, d in per_method.items()}
    if len(set(lengths.values())) != 1:
        raise ConfigError(f"mismatched rollout counts across methods: {lengths}")
    for name, d in per_method.items():
        if len(d["successes"]) != lengths[name]:
            raise ConfigError(f"method {name!r} has inconsistent successes/costs lengths")

    methods = {}
    for name, d in per_method.items():
        succ = np.asarray(d["successes"], dtype=bool)
        costs = np.asarray(d["costs"], dtype=float)
        entry = {
            "n_rollouts": int(len(succ)),
            "n_success": int(succ.sum()),
            "success_rate": float(succ.mean()) if len(succ) else 0.0,
            "mean_cost_on_success": float(costs[succ].mean()) if succ.any() else None,
            "per_seed_costs": [float(c) for c in costs],
            "per_seed_success": [bool(s) for s in succ],
        }
        for key in ("offline_seconds", "online_seconds_total", "online_seconds_per_call", "fallback_fraction"):
            if key in d:
                entry[key] = d[key]
        methods[name] = entry

    ours_succ = np.asarray(per_method[ours_key]["successes"], dtype=bool)
    ours_cost = np.asarray(per_method[ours_key]["costs"], dtype=float)
    pairwise = {}
    for name, d in per_method.items():
        if name == ours_key:
            continue
        succ = np.asarray(d["successes"], dtype=bool)
        costs = np.asarray(d["costs"], dtype=float)
        common = succ & ours_succ
        k = int(common.sum())
        if k == 0:
            pairwise[name] = {"common_success": 0, "frac_higher_cost": None, "mean_pct_higher_cost": None}
            continue
        diff = costs[common] - ours_cost[common]
        frac_higher = float((diff > tie_tol).sum() / k)
        mean_pct = float((diff / ours_cost[common]).mean() * 100.0)
        pairwise[name] = {
            "common_success": k,
            "frac_higher_cost": frac_higher,
            "mean_pct_higher_cost": mean_pct,
        }
    return {"methods": methods, "pairwise_vs_ours": pairwise}
