"""Backward sweep for the safety value function.

Integrates the variational form of the safety PDE backward from the
terminal slice Vs(x, T) = l(x): each internal step advances the equation
dVs/dt + max_u grad(Vs).f(x, u) = 0 with first-order upwinded one-sided
differences, global Lax-Friedrichs dissipation and a two-stage TVD
Runge-Kutta step, then applies the obstacle clamp Vs <- min(Vs, l) so the
minimum-over-time structure is preserved. The internal step comes from the
CFL bound and is clipped so slices land exactly on the uniform store
ladder {0, store_dt, ..., T}.

Boundary treatment: ghost nodes by linear extrapolation, which reduces
both one-sided differences at the boundary to the interior-facing one. The
caller's grid is expected to pad the domain of interest so the zero level
set stays away from the computational boundary.
"""

from __future__ import annotations

import numpy as np

from .config import SolverSettings
from .errors import SolverFailure
from .grids import GridSpec, ValueField
from .systems import BallControlSet, BoxControlSet, SystemModel

__all__ = ["solve_safety", "dissipation_bounds", "store_times"]


def store_times(T: float, store_dt: float) -> np.ndarray:
    if T == 0.0:
        return np.array([0.0])
    count = int(round(T / store_dt))
    return np.linspace(0.0, T, count + 1)


def _one_sided_diffs(V: np.ndarray, spacing) -> tuple[list, list]:
    """Left/right one-sided differences per axis with extrapolated ghosts."""
    Dm, Dp = [], []
    for a in range(V.ndim):
        Vm = np.moveaxis(V, a, 0)
        ext = np.empty((Vm.shape[0] + 2,) + Vm.shape[1:])
        ext[1:-1] = Vm
        ext[0] = 2.0 * Vm[0] - Vm[1]
        ext[-1] = 2.0 * Vm[-1] - Vm[-2]
        h = spacing[a]
        Dm.append(np.moveaxis((ext[1:-1] - ext[:-2]) / h, 0, a))
        Dp.append(np.moveaxis((ext[2:] - ext[1:-1]) / h, 0, a))
    return Dm, Dp


def dissipation_bounds(system: SystemModel, grid: GridSpec) -> np.ndarray:
    """Global per-axis bounds on |dH/dp_i| = |f_i(x, u)| over grid and controls."""
    f1, f2 = system.eval_many(grid.nodes())
    cs = system.control_set
    if isinstance(cs, BallControlSet):
        reach = cs.radius * np.linalg.norm(f2, axis=2)  # (N, d) row norms
    elif isinstance(cs, BoxControlSet):
        umax = np.maximum(np.abs(np.array(cs.lo)), np.abs(np.array(cs.hi)))
        reach = np.abs(f2) @ umax
    else:
        raise TypeError(f"unsupported control set {type(cs).__name__}")
    return (np.abs(f1) + reach).max(axis=0)


def _max_hamiltonian(system, f1, f2, pbar_flat: np.ndarray) -> np.ndarray:
    """max_u p.f(x,u) at every node; pbar_flat has shape (N, d)."""
    drift_term = np.einsum("nd,nd->n", f1, pbar_flat)
    q = np.einsum("ndm,nd->nm", f2, pbar_flat)
    cs = system.control_set
    if isinstance(cs, BallControlSet):
        return drift_term + cs.radius * np.linalg.norm(q, axis=1)
    lo, hi = np.array(cs.lo), np.array(cs.hi)
    return drift_term + np.maximum(q * lo, q * hi).sum(axis=1)


def sweep_backward(grid, times, terminal, rhs, alphas, cfl, clamp=None):
    """Shared backward integrator for both value PDEs.

    rhs(t, pbar_flat) returns the Hamiltonian per node at time t given the
    averaged one-sided gradients; alphas are the global dissipation bounds.
    Integrates dV/dt + H = 0 from times[-1] down to times[0] with TVD-RK2
    and global Lax-Friedrichs dissipation, storing a slice at every ladder
    stamp. clamp, when given, is applied nodewise (min) after every internal
    step.
    """
    spacing = grid.spacing
    denom = sum(alphas[a] / spacing[a] for a in range(grid.ndim))
    n_nodes = grid.num_nodes

    def euler_rhs(V, t):
        Dm, Dp = _one_sided_diffs(V, spacing)
        pbar = np.stack([(m + p) * 0.5 for m, p in zip(Dm, Dp)], axis=-1).reshape(n_nodes, -1)
        H = rhs(t, pbar).reshape(grid.shape)
        for a in range(grid.ndim):
            H = H + 0.5 * alphas[a] * (Dp[a] - Dm[a])
        return H

    slices = [np.array(terminal, dtype=float)]
    V = slices[0].copy()
    step_index = 0
    for k in range(len(times) - 1, 0, -1):
        t_hi, t_lo = times[k], times[k - 1]
        t = t_hi
        while t > t_lo + 1e-12:
            dt = cfl / denom if denom > 0 else (t - t_lo)
            dt = min(dt, t - t_lo)
            if not dt > 0:
                raise SolverFailure(f"nonpositive internal step dt={dt}", step_index=step_index)
            V1 = V + dt * euler_rhs(V, t)
            V2 = V1 + dt * euler_rhs(V1, t - dt)
            V = 0.5 * (V + V2)
            if clamp is not None:
                np.minimum(V, clamp, out=V)
            if not np.isfinite(V).all():
                bad = int(np.argmin(np.isfinite(V).ravel()))
                raise SolverFailure(
                    f"non-finite value after internal step {step_index}",
                    step_index=step_index,
                    node_index=bad,
                )
            t -= dt
            step_index += 1
        slices.append(V.copy())
    slices.reverse()
    return np.stack(slices, axis=0)


def solve_safety(
    system: SystemModel,
    l,
    grid: GridSpec,
    T: float,
    settings: SolverSettings | None = None,
    l_many=None,
) -> ValueField:
    """Safety value field on the grid over [0, T].

    l is the constraint margin function; l_many, when provided, evaluates it
    on an (N, d) batch of states. The terminal slice equals l at the nodes
    exactly and every stored slice satisfies Vs <= l nodewise.
    """
    settings = settings or SolverSettings()
    settings.validate(T if T > 0 else None)
    nodes = grid.nodes()
    l_arr = (l_many(nodes) if l_many is not None else np.array([l(x) for x in nodes]))
    l_arr = np.asarray(l_arr, dtype=float).reshape(grid.shape)
    if not np.isfinite(l_arr).all():
        raise SolverFailure("constraint function non-finite on the grid")

    times = store_times(T, settings.store_dt)
    if len(times) == 1:
        return ValueField(grid, times, l_arr[None, ...])

    f1, f2 = system.eval_many(nodes)
    alphas = dissipation_bounds(system, grid)

    def rhs(t, pbar_flat):
        return _max_hamiltonian(system, f1, f2, pbar_flat)

    slices = sweep_backward(grid, times, l_arr, rhs, alphas, settings.cfl, clamp=l_arr)
    return ValueField(grid, times, slices)
