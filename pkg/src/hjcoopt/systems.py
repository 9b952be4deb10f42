"""Control-affine dynamics, control-set geometry, costs and constraints.

Ships the 2D benchmark instance: a vehicle with dynamics
(dx1, dx2) = (u1 + 2 - 0.5*x2^2, u2), unit-ball controls, a rectangular
arena with circular obstacles encoded as an exact signed-distance margin,
and a distance-to-goal running cost over a 2 s horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import BenchmarkConfig
from .errors import ConfigError, ContractViolation
from .grids import GridSpec

__all__ = [
    "BallControlSet",
    "BoxControlSet",
    "SystemModel",
    "ProblemSpec",
    "flow",
    "benchmark_instance",
    "benchmark_grid",
]


@dataclass(frozen=True)
class BallControlSet:
    """Euclidean ball {u : ||u|| <= radius}."""

    radius: float
    dim: int = 2

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError("control ball radius must be positive")

    def contains(self, u, tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(u)) <= self.radius + tol

    def project(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        nrm = np.linalg.norm(u, axis=-1, keepdims=True)
        scale = np.where(nrm > self.radius, self.radius / np.maximum(nrm, 1e-300), 1.0)
        return u * scale

    def support(self, a) -> tuple[float, np.ndarray]:
        """max_u a.u over the set and its argmax (zero control if a = 0)."""
        a = np.asarray(a, dtype=float)
        nrm = float(np.linalg.norm(a))
        if nrm == 0.0:
            return 0.0, np.zeros_like(a)
        return self.radius * nrm, self.radius * a / nrm

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """Uniform samples over the ball (polar with sqrt radius in 2D, rejection otherwise)."""
        if self.dim == 2:
            r = self.radius * np.sqrt(rng.uniform(size=k))
            th = rng.uniform(0.0, 2 * np.pi, size=k)
            return np.column_stack([r * np.cos(th), r * np.sin(th)])
        out = np.empty((0, self.dim))
        while len(out) < k:
            cand = rng.uniform(-self.radius, self.radius, size=(2 * k, self.dim))
            cand = cand[np.linalg.norm(cand, axis=1) <= self.radius]
            out = np.vstack([out, cand])
        return out[:k]


@dataclass(frozen=True)
class BoxControlSet:
    """Axis-aligned box {u : lo <= u <= hi} (componentwise)."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ConfigError("box control set needs lo < hi per axis")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(
            (u >= np.array(self.lo) - tol).all() and (u <= np.array(self.hi) + tol).all()
        )

    def project(self, u: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(u, dtype=float), self.lo, self.hi)

    def support(self, a) -> tuple[float, np.ndarray]:
        """Per-axis bang-bang; zero-coefficient axes take the min-norm value."""
        a = np.asarray(a, dtype=float)
        lo, hi = np.array(self.lo), np.array(self.hi)
        u = np.where(a > 0, hi, np.where(a < 0, lo, np.clip(0.0, lo, hi)))
        return float(a @ u), u

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(k, self.dim))


@dataclass(frozen=True)
class SystemModel:
    """Control-affine system dx/dt = drift(x) + control_jacobian(x) @ u.

    drift and control_jacobian map a single state; the optional *_many
    variants map an (N, state_dim) batch and are used by the solvers and
    sampling baselines for speed. When absent, batch evaluation falls back
    to a per-state loop.
    """

    state_dim: int
    control_dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    control_jacobian: Callable[[np.ndarray], np.ndarray]
    control_set: BallControlSet | BoxControlSet
    drift_many: Callable[[np.ndarray], np.ndarray] | None = None
    control_jacobian_many: Callable[[np.ndarray], np.ndarray] | None = None
    flow_many: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def f(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return self.drift(x) + self.control_jacobian(x) @ u

    def eval_many(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(drift, control Jacobian) at a batch of states: (N,d), (N,d,m)."""
        X = np.asarray(X, dtype=float)
        if self.drift_many is not None and self.control_jacobian_many is not None:
            return self.drift_many(X), self.control_jacobian_many(X)
        f1 = np.stack([self.drift(x) for x in X])
        f2 = np.stack([self.control_jacobian(x) for x in X])
        return f1, f2

    def f_many(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        """Batched state derivative; uses flow_many when supplied."""
        if self.flow_many is not None:
            return self.flow_many(X, U)
        f1, f2 = self.eval_many(X)
        return f1 + np.einsum("ndm,nm->nd", f2, U)


@dataclass(frozen=True)
class ProblemSpec:
    """Performance objective and safety margin over a finite horizon.

    running_cost(x, u) is a cost rate, terminal_cost(x) a final cost, and
    constraint(x) the safety margin (nonnegative exactly on the safe
    geometry). running_cost_u_grad, when provided, marks a control-dependent
    running cost and supplies its gradient in u for the synthesis solver.
    """

    running_cost: Callable[[np.ndarray, np.ndarray], float]
    terminal_cost: Callable[[np.ndarray], float]
    constraint: Callable[[np.ndarray], float]
    horizon: float
    constraint_many: Callable[[np.ndarray], np.ndarray] | None = None
    running_cost_many: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    running_cost_u_grad: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def l_many(self, X: np.ndarray) -> np.ndarray:
        if self.constraint_many is not None:
            return self.constraint_many(np.asarray(X, dtype=float))
        return np.array([self.constraint(x) for x in np.asarray(X, dtype=float)])

    def r_many(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        if self.running_cost_many is not None:
            return self.running_cost_many(np.asarray(X, dtype=float), np.asarray(U, dtype=float))
        return np.array(
            [self.running_cost(x, u) for x, u in zip(np.asarray(X, dtype=float), np.asarray(U, dtype=float))]
        )


def flow(system: SystemModel, x, u, tol: float = 1e-9) -> np.ndarray:
    """State derivative drift(x) + control_jacobian(x) @ u for admissible u."""
    if not system.control_set.contains(u, tol=tol):
        raise ContractViolation(f"control {np.asarray(u)} outside the admissible set")
    return system.f(x, u)


def _box_interior_distance(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Signed distance to the box interior: positive inside, exact outside."""
    q = np.maximum(lo - x, x - hi)  # per-axis, negative inside
    qmax = q.max(axis=-1)
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    return -(outside + np.minimum(qmax, 0.0))


def benchmark_grid(cfg: BenchmarkConfig) -> GridSpec:
    """Solve grid: the arena grid extended by pad_cells nodes per side.

    Padding keeps the zero level set of the safety value away from the
    computational boundary; the arena itself is gridded at cfg.grid_n with
    both endpoints included.
    """
    lo, hi, n = [], [], []
    for a in range(2):
        h = (cfg.arena_hi[a] - cfg.arena_lo[a]) / (cfg.grid_n[a] - 1)
        lo.append(cfg.arena_lo[a] - cfg.pad_cells * h)
        hi.append(cfg.arena_hi[a] + cfg.pad_cells * h)
        n.append(cfg.grid_n[a] + 2 * cfg.pad_cells)
    return GridSpec(tuple(lo), tuple(hi), tuple(n))


def benchmark_instance(cfg: BenchmarkConfig) -> tuple[SystemModel, ProblemSpec]:
    """The 2D benchmark: dynamics, unit-ball controls, arena/obstacle margin,
    distance-to-goal running cost, zero terminal cost."""
    cfg.validate()
    goal = np.array(cfg.goal, dtype=float)
    arena_lo = np.array(cfg.arena_lo, dtype=float)
    arena_hi = np.array(cfg.arena_hi, dtype=float)
    centers = np.array([o.center for o in cfg.obstacles], dtype=float).reshape(-1, 2)
    radii = np.array([o.radius for o in cfg.obstacles], dtype=float)
    for c, rad in zip(centers, radii):
        if rad <= 0:
            raise ConfigError("obstacle radius must be positive")
        if np.linalg.norm(c - goal) <= rad:
            raise ConfigError(f"obstacle at {tuple(c)} (radius {rad}) covers the goal {cfg.goal}")

    def drift(x):
        return np.array([2.0 - 0.5 * x[1] ** 2, 0.0])

    eye = np.eye(2)

    def control_jacobian(x):
        return eye

    def drift_many(X):
        out = np.zeros_like(X)
        out[:, 0] = 2.0 - 0.5 * X[:, 1] ** 2
        return out

    def control_jacobian_many(X):
        return np.broadcast_to(eye, (len(X), 2, 2))

    def flow_many(X, U):
        out = U.astype(float, copy=True)
        out[:, 0] += 2.0 - 0.5 * X[:, 1] ** 2
        return out

    system = SystemModel(
        state_dim=2,
        control_dim=2,
        drift=drift,
        control_jacobian=control_jacobian,
        control_set=BallControlSet(radius=cfg.control_radius, dim=2),
        drift_many=drift_many,
        control_jacobian_many=control_jacobian_many,
        flow_many=flow_many,
    )

    def constraint_many(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        margin = _box_interior_distance(X, arena_lo, arena_hi)
        for c, rad in zip(centers, radii):
            margin = np.minimum(margin, np.linalg.norm(X - c, axis=-1) - rad)
        return margin

    def constraint(x):
        return float(constraint_many(np.asarray(x, dtype=float)[None, :])[0])

    def running_cost_many(X, U):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.linalg.norm(X - goal, axis=-1)

    def running_cost(x, u):
        return float(np.linalg.norm(np.asarray(x, dtype=float) - goal))

    spec = ProblemSpec(
        running_cost=running_cost,
        terminal_cost=lambda x: 0.0,
        constraint=constraint,
        horizon=cfg.horizon,
        constraint_many=constraint_many,
        running_cost_many=running_cost_many,
    )
    return system, spec
