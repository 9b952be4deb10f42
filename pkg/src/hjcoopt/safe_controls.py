"""Safe-control sets derived from a solved safety value field.

At a query (x, t) the admissible safe controls are either the entire
control set (when the safety value is positive) or the controls u with

    -gamma <= dVs/dt + grad(Vs) . f(x, u) <= 0,

which for control-affine dynamics is the band  b_lo <= a.u <= b_hi  with
a = f2(x)^T grad(Vs), c0 = dVs/dt + grad(Vs).f1(x), b_lo = -gamma - c0 and
b_hi = -c0. gamma defaults to 0; the equality band is widened by a small
numerical tolerance so the downstream convex programs stay well posed.
When the band misses the control set entirely (possible only through
discretization error or after a constraint violation), the query falls back
to the control that maximizes a.u, i.e. the instantaneously most
safety-restoring control.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridQueryError
from .grids import ValueField
from .systems import BallControlSet, BoxControlSet, SystemModel

__all__ = ["SafeControlSet", "query", "contains", "BAND_TOL"]

# widening of the gamma=0 equality band on a.u
BAND_TOL = 1e-7


@dataclass(frozen=True)
class SafeControlSet:
    """Outcome of a safe-control query at one (x, t).

    kind is "full", "hyperplane_band" or "fallback". For the band,
    membership means b_lo <= a.u <= b_hi inside the control set; for the
    fallback, the single control fallback_control (the a.u maximizer) is
    admitted.
    """

    kind: str
    control_set: BallControlSet | BoxControlSet
    a: np.ndarray | None = None
    b_lo: float = 0.0
    b_hi: float = 0.0
    gamma: float = 0.0
    fallback_control: np.ndarray | None = None
    clamped: bool = False


def _support_min(control_set, a: np.ndarray) -> float:
    val, _ = control_set.support(-np.asarray(a, dtype=float))
    return -val


def query(
    vs: ValueField,
    system: SystemModel,
    x,
    t: float,
    gamma: float = 0.0,
    band_tol: float = BAND_TOL,
) -> SafeControlSet:
    """Safe-control set at (x, t) from the solved safety value field."""
    if gamma < 0:
        raise GridQueryError(f"gamma must be nonnegative, got {gamma}")
    x = np.asarray(x, dtype=float)
    clamped = not vs.grid.contains(x)
    vs_val = vs.value(x, t)
    cs = system.control_set
    if vs_val > 0.0:
        return SafeControlSet(kind="full", control_set=cs, gamma=gamma, clamped=clamped)

    grad = vs.gradient(x, t)
    dvdt = vs.time_derivative(x, t)
    f1 = system.drift(x)
    f2 = system.control_jacobian(x)
    c0 = float(dvdt + grad @ f1)
    a = f2.T @ grad
    b_lo = -gamma - c0 - band_tol
    b_hi = -c0 + band_tol
    hi_support, u_max = cs.support(a)
    lo_support = _support_min(cs, a)
    if hi_support < b_lo or lo_support > b_hi:
        return SafeControlSet(
            kind="fallback",
            control_set=cs,
            a=a,
            b_lo=b_lo,
            b_hi=b_hi,
            gamma=gamma,
            fallback_control=u_max,
            clamped=clamped,
        )
    return SafeControlSet(
        kind="hyperplane_band",
        control_set=cs,
        a=a,
        b_lo=b_lo,
        b_hi=b_hi,
        gamma=gamma,
        clamped=clamped,
    )


def contains(sset: SafeControlSet, u, tol: float = 1e-9) -> bool:
    """Membership test: inside the control set and the kind-specific condition."""
    u = np.asarray(u, dtype=float)
    if not sset.control_set.contains(u, tol=tol):
        return False
    if sset.kind == "full":
        return True
    if sset.kind == "hyperplane_band":
        s = float(sset.a @ u)
        return sset.b_lo - tol <= s <= sset.b_hi + tol
    if sset.kind == "fallback":
        return bool(np.linalg.norm(u - sset.fallback_control) <= tol)
    raise ValueError(f"unknown safe-control kind {sset.kind!r}")


def band_arrays(
    vs: ValueField,
    system: SystemModel,
    t: float,
    gamma: float = 0.0,
    band_tol: float = BAND_TOL,
):
    """Vectorized safe-control data at every grid node for one time.

    Returns (vs_val, a, b_lo, b_hi, feasible, u_fallback) with shapes
    (N,), (N, m), (N,), (N,), (N,), (N, m) over the flattened node order.
    Nodes with vs_val > 0 carry full-set semantics regardless of the band
    entries; feasible marks nodes whose band intersects the control set.
    Agrees with per-point query() at node coordinates.
    """
    grid = vs.grid
    nodes = grid.nodes()
    vs_val = vs.slice_at(t).ravel()
    grad = vs.node_gradients_at(t).reshape(grid.ndim, -1).T  # (N, d)
    dvdt = vs.node_time_derivative_at(t).ravel()
    f1, f2 = system.eval_many(nodes)
    c0 = dvdt + np.einsum("nd,nd->n", grad, f1)
    a = np.einsum("ndm,nd->nm", f2, grad)
    b_lo = -gamma - c0 - band_tol
    b_hi = -c0 + band_tol
    cs = system.control_set
    if isinstance(cs, BallControlSet):
        anorm = np.linalg.norm(a, axis=1)
        hi_support = cs.radius * anorm
        lo_support = -hi_support
        with np.errstate(invalid="ignore", divide="ignore"):
            u_fb = np.where(anorm[:, None] > 0, cs.radius * a / np.maximum(anorm, 1e-300)[:, None], 0.0)
    else:
        lo_arr, hi_arr = np.array(cs.lo), np.array(cs.hi)
        u_fb = np.where(a > 0, hi_arr, np.where(a < 0, lo_arr, np.clip(0.0, lo_arr, hi_arr)))
        hi_support = np.einsum("nm,nm->n", a, u_fb)
        u_min = np.where(a > 0, lo_arr, np.where(a < 0, hi_arr, np.clip(0.0, lo_arr, hi_arr)))
        lo_support = np.einsum("nm,nm->n", a, u_min)
    feasible = (hi_support >= b_lo) & (lo_support <= b_hi)
    return vs_val, a, b_lo, b_hi, feasible, u_fb
