"""Backward sweep for the performance value function under safe-control bands.

Solves dV/dt + min_{u in safe set(x,t)} { f(x,u).grad(V) + r(x) } = 0 with
V(x, T) equal to the terminal cost, on the same grid and time ladder as the
solved safety field. Each stage evaluates the safe-control band at every
node (full set where the safety value is positive, hyperplane band where it
is not, the safety-restoring fallback where the band misses the control
set) and minimizes the linear Hamiltonian in closed form. The spatial
scheme, time integrator and dissipation bound are shared with the safety
sweep; the dissipation uses the unconstrained control bound, an upper bound
for every constrained case.

The running-cost rate is sampled at the zero control, which is exact for
control-independent running costs (the regime the analytic minimization
covers). Nodes outside the safe set are still stepped, using the fallback
constraint, so V stays finite there; they are reported as unreliable and
excluded from solver comparisons.
"""

from __future__ import annotations

import numpy as np

from .config import SolverSettings
from .errors import ConfigError, SolverFailure
from .grids import GridSpec, ValueField
from .safe_controls import BAND_TOL, band_arrays
from .safety import dissipation_bounds, sweep_backward
from .systems import BallControlSet, ProblemSpec, SystemModel

__all__ = ["solve_performance", "constrained_min_arrays", "unreliable_mask"]


def constrained_min_arrays(c, vs_val, a, b_lo, b_hi, feasible, u_fb, radius):
    """Vectorized min of c.u over per-node safe-control sets on a ball.

    Mirrors the scalar safe-set minimization exactly: full-ball minimum
    where vs_val > 0, the clamped ball-with-hyperplane solve on feasible
    bands, and evaluation at the fallback control elsewhere.
    """
    cmag = np.linalg.norm(c, axis=1)
    lin = -radius * cmag  # full-set minimum
    banded = (vs_val <= 0.0) & feasible
    if banded.any():
        ab = a[banded]
        cb = c[banded]
        amag = np.linalg.norm(ab, axis=1)
        cbmag = cmag[banded]
        ac = np.einsum("nm,nm->n", ab, cb)
        with np.errstate(invalid="ignore", divide="ignore"):
            b_free = np.where(cbmag > 0, -radius * ac / np.maximum(cbmag, 1e-300), 0.0)
            lo = np.maximum(b_lo[banded], -radius * amag)
            hi = np.minimum(b_hi[banded], radius * amag)
            b = np.clip(b_free, lo, hi)
            aa = np.maximum(amag**2, 1e-300)
            along = ac * b / aa
            perp = np.sqrt(np.maximum(cbmag**2 - ac**2 / aa, 0.0))
            rho_hat = np.sqrt(np.maximum(radius**2 - b**2 / aa, 0.0))
            lin_band = along - perp * rho_hat
        # zero band normal admits every control: keep the full-set minimum
        lin_band = np.where(amag > 0, lin_band, -radius * cbmag)
        lin[banded] = lin_band
    infeasible = (vs_val <= 0.0) & ~feasible
    if infeasible.any():
        lin[infeasible] = np.einsum("nm,nm->n", c[infeasible], u_fb[infeasible])
    return lin


def unreliable_mask(vs: ValueField) -> np.ndarray:
    """Nodes outside the safe set at t = 0, where V has no defined semantics."""
    return vs.slices[0] < 0.0


def solve_performance(
    system: SystemModel,
    spec: ProblemSpec,
    vs: ValueField,
    grid: GridSpec,
    settings: SolverSettings | None = None,
    gamma: float = 0.0,
    band_tol: float = BAND_TOL,
) -> ValueField:
    """Performance value field on the safety field's grid and time ladder."""
    settings = settings or SolverSettings()
    if grid != vs.grid:
        raise ConfigError("performance solve requires the safety field's grid")
    if not isinstance(system.control_set, BallControlSet):
        raise ConfigError("constrained performance solve requires a ball control set")
    if len(vs.times) < 2:
        raise ConfigError("safety field must store at least two time slices")

    nodes = grid.nodes()
    terminal = np.array([spec.terminal_cost(x) for x in nodes], dtype=float).reshape(grid.shape)
    r_val = np.asarray(
        spec.r_many(nodes, np.zeros((len(nodes), system.control_dim))), dtype=float
    )
    if not (np.isfinite(terminal).all() and np.isfinite(r_val).all()):
        raise SolverFailure("cost functions non-finite on the grid")

    f1, f2 = system.eval_many(nodes)
    alphas = dissipation_bounds(system, grid)
    radius = system.control_set.radius

    def rhs(t, pbar_flat):
        vs_val, a, b_lo, b_hi, feasible, u_fb = band_arrays(
            vs, system, t, gamma=gamma, band_tol=band_tol
        )
        c = np.einsum("ndm,nd->nm", f2, pbar_flat)
        lin = constrained_min_arrays(c, vs_val, a, b_lo, b_hi, feasible, u_fb, radius)
        return np.einsum("nd,nd->n", f1, pbar_flat) + lin + r_val

    slices = sweep_backward(grid, vs.times, terminal, rhs, alphas, settings.cfl, clamp=None)
    return ValueField(grid, vs.times.copy(), slices)
