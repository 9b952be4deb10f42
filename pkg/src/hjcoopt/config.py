"""Dataclass configs for the benchmark pipeline and their JSON round-trip.

One JSON config drives every CLI subcommand: benchmark geometry, grid,
solver settings, baseline hyperparameters and rollout seeds. Every artifact
written by the pipeline embeds ``config_hash(cfg)`` so downstream stages can
refuse mismatched inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

from .errors import ConfigError


@dataclass(frozen=True)
class SolverSettings:
    """Numerical settings for the backward PDE sweeps.

    cfl is the fraction of the stability bound used for the internal time
    step; store_dt is the uniform spacing of the stored time ladder and must
    divide the horizon.
    """

    cfl: float = 0.5
    store_dt: float = 0.01
    dissipation: str = "global_lax_friedrichs"
    spatial_order: int = 1

    def validate(self, horizon: float | None = None) -> None:
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError(f"cfl must be in (0, 1], got {self.cfl}")
        if self.store_dt <= 0.0:
            raise ConfigError(f"store_dt must be positive, got {self.store_dt}")
        if self.dissipation != "global_lax_friedrichs":
            raise ConfigError(f"unsupported dissipation scheme: {self.dissipation!r}")
        if self.spatial_order != 1:
            raise ConfigError(f"unsupported spatial order: {self.spatial_order}")
        if horizon is not None:
            ratio = horizon / self.store_dt
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
                raise ConfigError(
                    f"store_dt={self.store_dt} does not divide horizon={horizon}"
                )


@dataclass(frozen=True)
class MppiParams:
    """Sampling-based MPC hyperparameters.

    horizon_steps internal steps of plan_dt each; samples Gaussian
    perturbations with scale sigma, softmin temperature lam, and violation
    penalty weight applied per plan step.
    """

    horizon_steps: int = 100
    plan_dt: float = 0.02
    samples: int = 1024
    temperature: float = 1.0
    sigma: float = 0.5
    penalty_weight: float = 1e3


@dataclass(frozen=True)
class MpcParams:
    """Receding-horizon single-shooting hyperparameters.

    Plans horizon_steps piecewise-constant controls of plan_dt each and
    re-optimizes every replan_interval simulation steps (the default matches
    one plan step at the benchmark's 0.01 s simulation step), executing the
    stored plan in between and warm-starting each solve from the previous
    plan shifted by the elapsed plan steps.
    """

    horizon_steps: int = 20
    plan_dt: float = 0.1
    penalty_weight: float = 1e3
    iterations: int = 100
    step_size: float = 0.2
    replan_interval: int = 10


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.5


@dataclass(frozen=True)
class BenchmarkConfig:
    """Full description of the 2D benchmark: geometry, costs, grid, baselines."""

    arena_lo: tuple[float, float] = (-3.0, -2.0)
    arena_hi: tuple[float, float] = (2.0, 2.0)
    obstacles: tuple[Obstacle, ...] = (
        Obstacle(center=(-1.5, -0.5), radius=0.5),
        Obstacle(center=(0.0, 0.75), radius=0.5),
    )
    goal: tuple[float, float] = (1.5, 0.0)
    horizon: float = 2.0
    control_radius: float = 1.0
    grid_n: tuple[int, int] = (70, 70)
    pad_cells: int = 4
    gamma: float = 0.0
    solver: SolverSettings = field(default_factory=SolverSettings)
    sim_dt: float = 0.01
    n_rollouts: int = 100
    seed: int = 1234
    sample_margin: float = 0.05
    filter_threshold: float = 0.0
    mppi: MppiParams = field(default_factory=MppiParams)
    mpc: MpcParams = field(default_factory=MpcParams)
    workers: int = 0  # 0 = use all available cores

    def validate(self) -> None:
        for lo, hi in zip(self.arena_lo, self.arena_hi):
            if hi <= lo:
                raise ConfigError(f"arena bounds must satisfy hi > lo, got {lo}..{hi}")
        if self.control_radius <= 0:
            raise ConfigError("control_radius must be positive")
        if any(n < 2 for n in self.grid_n):
            raise ConfigError("grid_n must be at least 2 per axis")
        if self.pad_cells < 0:
            raise ConfigError("pad_cells must be nonnegative")
        if self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        if self.gamma < 0:
            raise ConfigError("gamma must be nonnegative")
        if self.sim_dt <= 0:
            raise ConfigError("sim_dt must be positive")
        ratio = self.horizon / self.sim_dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"sim_dt={self.sim_dt} does not divide horizon={self.horizon}")
        if self.sample_margin < 0:
            raise ConfigError("sample_margin must be nonnegative")
        self.solver.validate(self.horizon)


def _as_plain(obj):
    d = asdict(obj)

    def conv(v):
        if isinstance(v, tuple):
            return [conv(x) for x in v]
        if isinstance(v, list):
            return [conv(x) for x in v]
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        return v

    return conv(d)


def config_to_dict(cfg: BenchmarkConfig) -> dict:
    return _as_plain(cfg)


def config_from_dict(d: dict) -> BenchmarkConfig:
    d = dict(d)
    try:
        if "solver" in d:
            d["solver"] = SolverSettings(**d["solver"])
        if "mppi" in d:
            d["mppi"] = MppiParams(**d["mppi"])
        if "mpc" in d:
            d["mpc"] = MpcParams(**d["mpc"])
        if "obstacles" in d:
            d["obstacles"] = tuple(
                Obstacle(center=tuple(o["center"]), radius=o["radius"]) for o in d["obstacles"]
            )
        for key in ("arena_lo", "arena_hi", "goal", "grid_n"):
            if key in d:
                d[key] = tuple(d[key])
        cfg = BenchmarkConfig(**d)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed benchmark config: {exc}") from exc
    cfg.validate()
    return cfg


def load_config(path) -> BenchmarkConfig:
    with open(path) as f:
        return config_from_dict(json.load(f))


def save_config(cfg: BenchmarkConfig, path) -> None:
    with open(path, "w") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


def config_hash(cfg: BenchmarkConfig) -> str:
    """Stable sha256 of the canonical JSON encoding; embedded in artifacts."""
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def with_overrides(cfg: BenchmarkConfig, grid_n=None, seed=None) -> BenchmarkConfig:
    """Apply the CLI's flag overrides (grid size and seed only)."""
    if grid_n is not None:
        cfg = replace(cfg, grid_n=(int(grid_n), int(grid_n)))
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    cfg.validate()
    return cfg
