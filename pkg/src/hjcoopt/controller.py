"""Closed-loop control synthesis via exact small convex solves.

The synthesis objective grad(V).f(x, u) + r(x, u) is linear in u for
control-affine dynamics and control-independent running cost, so the
minimizer over the safe-control set has a closed form: an analytic ball
minimum on the full set, and an exact ball-with-hyperplane minimizer on the
safety band. Control-dependent convex running costs are handled by a
projected-gradient solve on the same feasible sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, InfeasibleConstraint
from .grids import ValueField
from .safe_controls import SafeControlSet, query
from .systems import BallControlSet, BoxControlSet, ProblemSpec, SystemModel

__all__ = [
    "ControlDecision",
    "min_linear_on_ball_hyperplane",
    "min_linear_over_safe_set",
    "project_onto_ball_band",
    "synthesize",
    "synthesize_policy",
]


@dataclass(frozen=True)
class ControlDecision:
    u: np.ndarray
    active_constraint: str  # "none" | "band" | "fallback"
    objective: float


def min_linear_on_ball_hyperplane(c, a, b: float, radius: float, tol: float = 1e-9) -> np.ndarray:
    """Exact minimizer of c.u over {||u|| <= radius, a.u = b}.

    Decomposes u into its component along a plus an orthogonal remainder;
    the remainder takes the largest admissible step against the projected
    objective. Degenerate tangential objectives (c parallel to a) return the
    minimum-norm feasible point.
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    aa = float(a @ a)
    if aa == 0.0:
        raise ConfigError("hyperplane normal must be nonzero")
    amag = np.sqrt(aa)
    if abs(b) > radius * amag + tol:
        raise InfeasibleConstraint(
            f"plane a.u = {b} does not intersect the radius-{radius} ball (|b| > {radius * amag})"
        )
    u_base = (b / aa) * a
    rho_hat_sq = radius**2 - b**2 / aa
    rho_hat = np.sqrt(max(rho_hat_sq, 0.0))
    c_perp = c - (float(c @ a) / aa) * a
    c_perp_norm = float(np.linalg.norm(c_perp))
    if c_perp_norm <= 1e-14 * max(1.0, float(np.linalg.norm(c))) or rho_hat == 0.0:
        return u_base
    return u_base - (rho_hat / c_perp_norm) * c_perp


def min_linear_over_safe_set(c, sset: SafeControlSet) -> tuple[np.ndarray, str]:
    """Minimize c.u over a safe-control set; returns (argmin, active constraint).

    Band-constrained minimization is implemented for ball control sets (the
    geometry the closed forms cover); full-set and fallback cases work for
    balls and boxes alike.
    """
    c = np.asarray(c, dtype=float)
    cs = sset.control_set
    if sset.kind == "fallback":
        return np.asarray(sset.fallback_control, dtype=float), "fallback"
    if sset.kind == "full":
        _, u = cs.support(-c)
        return u, "none"
    if sset.kind != "hyperplane_band":
        raise ValueError(f"unknown safe-control kind {sset.kind!r}")
    a = np.asarray(sset.a, dtype=float)
    amag = float(np.linalg.norm(a))
    if amag == 0.0:
        # zero normal: every admissible control satisfies the band
        _, u = cs.support(-c)
        return u, "band"
    if not isinstance(cs, BallControlSet):
        raise ConfigError("band-constrained minimization requires a ball control set")
    radius = cs.radius
    b_lo = max(sset.b_lo, -radius * amag)
    b_hi = min(sset.b_hi, radius * amag)
    if b_lo > b_hi:
        raise InfeasibleConstraint("safety band does not intersect the control ball")
    # partial minimization over the plane offset is convex, so clamp the
    # unconstrained ball minimizer's offset into the band
    cmag = float(np.linalg.norm(c))
    b_free = -radius * float(a @ c) / cmag if cmag > 0 else 0.0
    b = float(np.clip(b_free, b_lo, b_hi))
    return min_linear_on_ball_hyperplane(c, a, b, radius), "band"


def project_onto_ball_band(z, a, b_lo: float, b_hi: float, radius: float) -> np.ndarray:
    """Euclidean projection of z onto {||u|| <= radius, b_lo <= a.u <= b_hi}."""
    z = np.asarray(z, dtype=float)
    a = np.asarray(a, dtype=float)
    aa = float(a @ a)
    if aa == 0.0:
        nrm = float(np.linalg.norm(z))
        return z if nrm <= radius else (radius / nrm) * z
    amag = np.sqrt(aa)
    lo = max(b_lo, -radius * amag)
    hi = min(b_hi, radius * amag)
    if lo > hi:
        raise InfeasibleConstraint("band does not intersect the control ball")
    zeta = float(a @ z)
    z_perp = z - (zeta / aa) * a
    z_perp_norm = float(np.linalg.norm(z_perp))

    def point(beta: float) -> np.ndarray:
        rho_hat = np.sqrt(max(radius**2 - beta**2 / aa, 0.0))
        w = z_perp if z_perp_norm <= rho_hat else (rho_hat / z_perp_norm) * z_perp
        return (beta / aa) * a + w

    beta = float(np.clip(zeta, lo, hi))
    cand = (beta / aa) * a + z_perp
    if float(np.linalg.norm(cand)) <= radius:
        return cand
    if hi - lo <= 1e-15:
        return point(lo)

    def dist_sq(beta: float) -> float:
        return float(np.sum((point(beta) - z) ** 2))

    res = minimize_scalar(dist_sq, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return point(float(res.x))


def _projected_gradient(
    c_lin, r_fn, r_grad, x, sset: SafeControlSet, u0, iterations=100, step_tol=1e-10
):
    """Minimize c_lin.u + r(x, u) over the safe set by projected gradient
    with backtracking, under a fixed iteration budget."""
    cs = sset.control_set
    if isinstance(cs, BallControlSet):
        if sset.kind == "hyperplane_band" and sset.a is not None and np.linalg.norm(sset.a) > 0:
            proj = lambda u: project_onto_ball_band(u, sset.a, sset.b_lo, sset.b_hi, cs.radius)
        else:
            proj = cs.project
    else:
        proj = cs.project

    def obj(u):
        return float(c_lin @ u) + float(r_fn(x, u))

    u = proj(np.asarray(u0, dtype=float))
    fu = obj(u)
    step = 1.0
    sigma = 0.1  # Armijo sufficient-decrease fraction
    for _ in range(iterations):
        g = c_lin + r_grad(x, u)
        while step >= step_tol:
            u_new = proj(u - step * g)
            if obj(u_new) <= fu + sigma * float(g @ (u_new - u)):
                break
            step *= 0.5
        else:
            break
        moved = float(np.linalg.norm(u_new - u))
        u, fu = u_new, obj(u_new)
        if moved < step_tol:
            break
        step = min(2.0 * step, 1.0)
    return u


def synthesize(
    v: ValueField,
    vs: ValueField,
    system: SystemModel,
    spec: ProblemSpec,
    x,
    t: float,
    gamma: float = 0.0,
) -> ControlDecision:
    """Optimal safe control at (x, t): minimize grad(V).f(x,u) + r(x,u) over
    the safe-control set."""
    x = np.asarray(x, dtype=float)
    grad_v = v.gradient(x, t)
    f1 = system.drift(x)
    f2 = system.control_jacobian(x)
    c = f2.T @ grad_v
    sset = query(vs, system, x, t, gamma=gamma)
    if spec.running_cost_u_grad is None:
        u, active = min_linear_over_safe_set(c, sset)
    else:
        if sset.kind == "fallback":
            u, active = np.asarray(sset.fallback_control, dtype=float), "fallback"
        else:
            u = _projected_gradient(
                c, spec.running_cost, spec.running_cost_u_grad, x, sset, np.zeros(system.control_dim)
            )
            active = "none" if sset.kind == "full" else "band"
    objective = float(grad_v @ (f1 + f2 @ u) + spec.running_cost(x, u))
    return ControlDecision(u=u, active_constraint=active, objective=objective)


def synthesize_policy(v, vs, system, spec, gamma: float = 0.0):
    """Policy closure (state, time) -> control wrapping synthesize().

    policy.stats counts queries by active constraint (none/band/fallback).
    """
    stats = {"calls": 0, "band": 0, "fallbacks": 0}

    def policy(x, t):
        dec = synthesize(v, vs, system, spec, x, t, gamma=gamma)
        stats["calls"] += 1
        if dec.active_constraint == "band":
            stats["band"] += 1
        elif dec.active_constraint == "fallback":
            stats["fallbacks"] += 1
        return dec.u

    policy.stats = stats
    return policy
