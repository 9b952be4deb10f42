"""Shared builders for solver and kernel tests."""

import numpy as np

from hjcoopt.grids import GridSpec, ValueField
from hjcoopt.systems import BallControlSet, ProblemSpec, SystemModel


def affine_time_field(grid, coef, offset=0.0, rate=0.0, times=None):
    """ValueField sampled from V(x, t) = coef.x + offset + rate*t."""
    times = np.asarray(times if times is not None else np.arange(11) * 0.01, dtype=float)
    nodes = grid.nodes()
    base = nodes @ np.asarray(coef, dtype=float) + offset
    slices = np.stack([(base + rate * t).reshape(grid.shape) for t in times])
    return ValueField(grid, times, slices)


def constant_drift_system(drift=(0.0, 0.0), radius=1.0):
    """2D system with constant drift, identity control Jacobian, ball controls."""
    drift = np.asarray(drift, dtype=float)
    eye = np.eye(2)
    return SystemModel(
        state_dim=2,
        control_dim=2,
        drift=lambda x: drift.copy(),
        control_jacobian=lambda x: eye,
        control_set=BallControlSet(radius=radius),
        drift_many=lambda X: np.broadcast_to(drift, X.shape).copy(),
        control_jacobian_many=lambda X: np.broadcast_to(eye, (len(X), 2, 2)),
    )


def integrator_system(radius=1.0):
    """Single integrator dx/dt = u."""
    return constant_drift_system((0.0, 0.0), radius=radius)


def frozen_system():
    """Zero drift and zero control Jacobian: the state never moves."""
    zero = np.zeros((2, 2))
    return SystemModel(
        state_dim=2,
        control_dim=2,
        drift=lambda x: np.zeros(2),
        control_jacobian=lambda x: zero,
        control_set=BallControlSet(radius=1.0),
        drift_many=lambda X: np.zeros_like(X),
        control_jacobian_many=lambda X: np.broadcast_to(zero, (len(X), 2, 2)),
    )


def simple_spec(r=None, phi=None, l=None, horizon=2.0, **kw):
    """ProblemSpec with vectorized variants derived from the scalar callables."""
    r = r if r is not None else (lambda x, u: 0.0)
    phi = phi if phi is not None else (lambda x: 0.0)
    l = l if l is not None else (lambda x: 1.0)
    return ProblemSpec(
        running_cost=r,
        terminal_cost=phi,
        constraint=l,
        horizon=horizon,
        constraint_many=lambda X: np.array([l(x) for x in X]),
        running_cost_many=lambda X, U: np.array([r(x, u) for x, u in zip(X, U)]),
        **kw,
    )


def segment_samples(a, b, radius, k=100_001):
    """Dense samples of the chord {a.u = b, ||u|| <= radius} in 2D."""
    a = np.asarray(a, dtype=float)
    aa = float(a @ a)
    base = (b / aa) * a
    rho_hat = np.sqrt(max(radius**2 - b**2 / aa, 0.0))
    perp = np.array([-a[1], a[0]]) / np.sqrt(aa)
    s = np.linspace(-rho_hat, rho_hat, k)
    return base[None, :] + s[:, None] * perp[None, :]
