"""Brute-force backward dynamic programming on coarse grids.

Semi-Lagrangian recursions with a fixed set of discretized controls supply
an independent ground truth for both PDE solvers and for the empirical
equivalence between the state-constrained and control-constrained
problems. Deliberately simple and slow; meant for coarse grids only. All
comparisons against it carry grid-scale tolerances.
"""

from __future__ import annotations

import numpy as np

from .grids import GridSpec, ValueField, interpolate_many
from .safe_controls import BAND_TOL, band_arrays
from .systems import BallControlSet, BoxControlSet, ProblemSpec, SystemModel

__all__ = [
    "BIG",
    "control_samples",
    "dp_safety",
    "dp_state_constrained",
    "dp_control_constrained",
]

# stand-in cost for infeasible states in the state-constrained recursion
BIG = 1e6


def control_samples(control_set, n_boundary: int = 16) -> np.ndarray:
    """Deterministic control samples covering the set boundary plus center.

    Balls take n_boundary equally spaced boundary directions; boxes take the
    corner/edge-midpoint lattice. The zero (or box center) control is always
    included.
    """
    if isinstance(control_set, BallControlSet):
        th = 2.0 * np.pi * np.arange(n_boundary) / n_boundary
        pts = control_set.radius * np.column_stack([np.cos(th), np.sin(th)])
        return np.vstack([pts, np.zeros((1, control_set.dim))])
    if isinstance(control_set, BoxControlSet):
        axes = [np.array([lo, 0.5 * (lo + hi), hi]) for lo, hi in zip(control_set.lo, control_set.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])
    raise TypeError(f"unsupported control set {type(control_set).__name__}")


def _advected(nodes, f1, f2, u, dt):
    return nodes + dt * (f1 + np.einsum("ndm,m->nd", f2, u))


def _oracle_times(T: float, dt: float) -> np.ndarray:
    steps = max(int(round(T / dt)), 0)
    return np.linspace(0.0, T, steps + 1) if steps else np.array([0.0])


def dp_safety(
    system: SystemModel,
    l,
    grid: GridSpec,
    T: float,
    dt: float = 0.05,
    controls: np.ndarray | None = None,
    l_many=None,
) -> ValueField:
    """Backward recursion Vs(x,t) = max_u min(l(x), Vs(x + f(x,u) dt, t+dt)).

    Advected states leaving the grid clamp to the boundary for
    interpolation; l itself is always evaluated exactly at the nodes.
    """
    if controls is None:
        controls = control_samples(system.control_set)
    nodes = grid.nodes()
    l_fn_many = l_many if l_many is not None else (lambda X: np.array([l(x) for x in X]))
    l_arr = np.asarray(l_fn_many(nodes), dtype=float)
    f1, f2 = system.eval_many(nodes)
    lo = np.array(grid.lo)
    hi = np.array([grid.lo[a] + (grid.n[a] - 1) * grid.spacing[a] for a in range(grid.ndim)])
    times = _oracle_times(T, dt)
    slices = [l_arr.copy()]
    V = l_arr.copy()
    for _ in range(len(times) - 1):
        best = np.full(len(nodes), -np.inf)
        for u in controls:
            adv = _advected(nodes, f1, f2, u, dt)
            nxt = interpolate_many(grid, V, adv)
            escaped = ((adv < lo) | (adv > hi)).any(axis=1)
            if escaped.any():
                nxt[escaped] = np.minimum(nxt[escaped], l_fn_many(adv[escaped]))
            np.maximum(best, np.minimum(l_arr, nxt), out=best)
        V = best
        slices.append(V.copy())
    slices.reverse()
    return ValueField(grid, times, np.stack(slices).reshape((len(times),) + grid.shape))


def dp_state_constrained(
    system: SystemModel,
    spec: ProblemSpec,
    grid: GridSpec,
    T: float,
    dt: float = 0.05,
    controls: np.ndarray | None = None,
    cap: float | None = None,
    viability: ValueField | None = None,
) -> ValueField:
    """State-constrained cost-to-go; constraint-violating nodes carry BIG.

    The state constraint is enforced through viability: a control sample is
    admissible only when the advected state keeps the coarse safety
    recursion (dp_safety, computed internally when not supplied)
    nonnegative, and nodes with l < 0 or with no admissible sample report
    BIG, the encoding of an infimum over an empty feasible set. Pricing the
    violation into the recursion instead does not survive interpolation:
    fractional weights smear BIG across the grid faster than any trajectory
    moves. Interpolated continuations are additionally saturated at `cap`
    (a bound strictly above any feasible cost) so the one-cell bleed off
    the viability boundary stays dominated by feasible detours.
    """
    if controls is None:
        controls = control_samples(system.control_set)
    if viability is None:
        viability = dp_safety(
            system, spec.constraint, grid, T, dt, controls, l_many=spec.constraint_many
        )
    nodes = grid.nodes()
    l_arr = spec.l_many(nodes)
    infeasible = l_arr < 0.0
    phi = np.array([spec.terminal_cost(x) for x in nodes], dtype=float)
    f1, f2 = system.eval_many(nodes)
    times = _oracle_times(T, dt)
    if cap is None:
        r_bound = np.abs(spec.r_many(nodes, np.zeros((len(nodes), system.control_dim)))).max()
        cap = 2.0 * (r_bound * max(T, dt) + np.abs(phi).max()) + 1.0
    V = np.where(infeasible, BIG, phi)
    slices = [V.copy()]
    for k in range(len(times) - 1, 0, -1):
        t_next = times[k]
        vs_next = viability.slice_at(t_next).ravel()
        best = np.full(len(nodes), np.inf)
        for u in controls:
            adv = _advected(nodes, f1, f2, u, dt)
            stays_viable = interpolate_many(grid, vs_next, adv) >= 0.0
            r_k = spec.r_many(nodes, np.broadcast_to(u, (len(nodes), len(u))))
            nxt = np.minimum(interpolate_many(grid, np.minimum(V, cap), adv), cap)
            cand = np.where(stays_viable, r_k * dt + nxt, np.inf)
            np.minimum(best, cand, out=best)
        V = np.where(infeasible | ~np.isfinite(best), BIG, best)
        slices.append(V.copy())
    slices.reverse()
    return ValueField(grid, times, np.stack(slices).reshape((len(times),) + grid.shape))


def dp_control_constrained(
    system: SystemModel,
    spec: ProblemSpec,
    vs: ValueField,
    grid: GridSpec,
    T: float,
    dt: float = 0.05,
    controls: np.ndarray | None = None,
    gamma: float = 0.0,
    contains_tol: float = 1e-9,
    band_tol: float = BAND_TOL,
) -> ValueField:
    """Control-constrained cost-to-go with the sample set filtered per node.

    At each (node, t) only samples inside the safe-control set participate
    in the minimization; when none qualify (the usual case on the gamma = 0
    band) the safety-restoring fallback control is used alone.
    """
    if controls is None:
        controls = control_samples(system.control_set)
    nodes = grid.nodes()
    phi = np.array([spec.terminal_cost(x) for x in nodes], dtype=float)
    f1, f2 = system.eval_many(nodes)
    times = _oracle_times(T, dt)
    V = phi.copy()
    slices = [V.copy()]
    for k in range(len(times) - 1, 0, -1):
        t = times[k - 1]
        vs_val, a, b_lo, b_hi, feasible, u_fb = band_arrays(
            vs, system, t, gamma=gamma, band_tol=band_tol
        )
        full = vs_val > 0.0
        best = np.full(len(nodes), np.inf)
        for u in controls:
            s = a @ u
            ok = full | (feasible & (s >= b_lo - contains_tol) & (s <= b_hi + contains_tol))
            if not ok.any():
                continue
            r_k = spec.r_many(nodes, np.broadcast_to(u, (len(nodes), len(u))))
            nxt = interpolate_many(grid, V, _advected(nodes, f1, f2, u, dt))
            cand = r_k * dt + nxt
            best = np.where(ok, np.minimum(best, cand), best)
        empty = ~np.isfinite(best)
        if empty.any():
            r_fb = spec.r_many(nodes[empty], u_fb[empty])
            nxt_fb = interpolate_many(
                grid, V, nodes[empty] + dt * (f1[empty] + np.einsum("ndm,nm->nd", f2[empty], u_fb[empty]))
            )
            best[empty] = r_fb * dt + nxt_fb
        V = best
        slices.append(V.copy())
    slices.reverse()
    return ValueField(grid, times, np.stack(slices).reshape((len(times),) + grid.shape))
