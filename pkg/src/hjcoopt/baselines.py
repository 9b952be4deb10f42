"""Sampling- and optimization-based baseline controllers.

Three baselines share the benchmark harness: penalty-based MPPI, the same
MPPI passed through a least-restrictive safety filter, and receding-horizon
single shooting (MPC) with a squared violation penalty. Both planners
integrate their internal model with forward Euler at their own plan step;
their plumbing is deterministic given the construction seed. All returned
controls lie in the control set by construction (sampled sequences are
projected, filter outputs come from exact ball projections).
"""

from __future__ import annotations

import numpy as np

from .config import MpcParams, MppiParams
from .controller import project_onto_ball_band
from .errors import ConfigError
from .grids import ValueField
from .safe_controls import query
from .systems import BallControlSet, ProblemSpec, SystemModel

__all__ = ["mppi_policy", "filtered_policy", "mpc_policy"]


def _batch_step(system: SystemModel, X: np.ndarray, U: np.ndarray, dt: float) -> np.ndarray:
    return X + dt * system.f_many(X, U)


def _batch_plan_cost(
    system: SystemModel,
    spec: ProblemSpec,
    x0: np.ndarray,
    plans: np.ndarray,
    dt: float,
    penalty_weight: float,
    squared: bool,
) -> np.ndarray:
    """Total cost of a batch of control plans (B, H, m) from a single state.

    Running cost accrues per step times dt; each advanced state adds the
    obstacle penalty w * max(0, -l) (squared for the MPC variant).
    """
    B, H, _ = plans.shape
    X = np.broadcast_to(x0, (B, len(x0))).copy()
    cost = np.zeros(B)
    for k in range(H):
        U = plans[:, k, :]
        cost += spec.r_many(X, U) * dt
        X = _batch_step(system, X, U, dt)
        viol = np.maximum(0.0, -spec.l_many(X))
        cost += penalty_weight * (viol**2 if squared else viol)
    return cost


def mppi_policy(system: SystemModel, spec: ProblemSpec, params: MppiParams, rng_seed):
    """Path-integral sampling policy with warm-started nominal sequence.

    Each call perturbs the nominal plan with Gaussian noise, projects the
    samples onto the control set, scores them with the penalized rollout
    cost, and softmin-averages them with temperature `temperature` (the
    weights use the usual best-sample baseline shift, so a vanishing
    temperature degenerates to the argmin sample). The first control of the
    averaged plan is returned and the nominal shifts one step.
    """
    rng = np.random.default_rng(rng_seed)
    H, m = params.horizon_steps, system.control_dim
    nominal = np.zeros((H, m))
    project = system.control_set.project

    def policy(x, t):
        nonlocal nominal
        x = np.asarray(x, dtype=float)
        noise = rng.normal(0.0, params.sigma, size=(params.samples, H, m))
        cand = project(nominal[None, :, :] + noise)
        costs = _batch_plan_cost(
            system, spec, x, cand, params.plan_dt, params.penalty_weight, squared=False
        )
        w = np.exp(-(costs - costs.min()) / params.temperature)
        w /= w.sum()
        mean_plan = np.einsum("b,bhm->hm", w, cand)
        u0 = mean_plan[0].copy()
        nominal = np.vstack([mean_plan[1:], np.zeros((1, m))])
        return u0

    return policy


def filtered_policy(
    nominal,
    vs: ValueField,
    system: SystemModel,
    threshold: float = 0.0,
    gamma: float = 0.0,
):
    """Least-restrictive safety filter around a nominal policy.

    Above the safety threshold the nominal control passes through; on or
    below it the control is replaced by the Euclidean-nearest member of the
    safe-control band (an exact ball/band projection). Band-infeasible
    queries take the safety-restoring fallback control and are counted on
    policy.stats. The nominal policy is always invoked first so stateful
    planners keep their warm starts in sync.
    """
    if not isinstance(system.control_set, BallControlSet):
        raise ConfigError("safety filtering requires a ball control set")
    stats = {"calls": 0, "interventions": 0, "fallbacks": 0}

    def policy(x, t):
        u_nom = np.asarray(nominal(x, t), dtype=float)
        stats["calls"] += 1
        if vs.value(x, t) > threshold:
            return u_nom
        sset = query(vs, system, x, t, gamma=gamma)
        if sset.kind == "full":
            return u_nom
        if sset.kind == "fallback":
            stats["fallbacks"] += 1
            stats["interventions"] += 1
            return np.asarray(sset.fallback_control, dtype=float)
        u = project_onto_ball_band(
            u_nom, sset.a, sset.b_lo, sset.b_hi, system.control_set.radius
        )
        if not np.allclose(u, u_nom):
            stats["interventions"] += 1
        return u

    policy.stats = stats
    return policy


def mpc_policy(system: SystemModel, spec: ProblemSpec, params: MpcParams):
    """Receding-horizon single shooting with projected gradient descent.

    Re-optimizes every replan_interval calls (executing the current plan's
    first control in between, which spans less than one plan step). The
    plan warm-starts from the previous solution; gradients come from
    forward finite differences evaluated in one batched rollout, and a
    fixed iteration budget is spent regardless of convergence. A zero
    budget returns the warm start unchanged.
    """
    H, m = params.horizon_steps, system.control_dim
    project = system.control_set.project
    state = {"plan": np.zeros((H, m)), "calls": 0, "plan_t": None}
    eps = 1e-4

    def optimize(x: np.ndarray, plan: np.ndarray) -> np.ndarray:
        step = params.step_size
        n_pert = H * m
        base_cost = None
        for _ in range(params.iterations):
            batch = np.broadcast_to(plan, (n_pert + 1, H, m)).copy()
            flat = batch[1:].reshape(n_pert, n_pert)
            flat[np.arange(n_pert), np.arange(n_pert)] += eps
            costs = _batch_plan_cost(
                system, spec, x, batch, params.plan_dt, params.penalty_weight, squared=True
            )
            base_cost = costs[0]
            grad = ((costs[1:] - base_cost) / eps).reshape(H, m)
            gnorm = np.linalg.norm(grad)
            if gnorm < 1e-12:
                break
            cand = project(plan - step * grad / gnorm)
            cand_cost = _batch_plan_cost(
                system, spec, x, cand[None], params.plan_dt, params.penalty_weight, squared=True
            )[0]
            if cand_cost <= base_cost:
                plan = cand
            else:
                step *= 0.5
                if step < 1e-10:
                    break
        return plan

    def policy(x, t):
        x = np.asarray(x, dtype=float)
        if state["calls"] % params.replan_interval == 0:
            warm = state["plan"]
            if state["plan_t"] is not None:
                # shift the previous plan by the whole plan steps elapsed
                k = min(int(round((t - state["plan_t"]) / params.plan_dt)), H)
                if k > 0:
                    warm = np.vstack([warm[k:], np.zeros((k, m))])
            state["plan"] = optimize(x, warm)
            state["plan_t"] = t
        state["calls"] += 1
        return state["plan"][0].copy()

    return policy
