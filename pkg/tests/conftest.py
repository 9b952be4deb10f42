"""Session-scoped benchmark artifacts shared across solver and acceptance tests."""

from dataclasses import replace

import numpy as np
import pytest

from hjcoopt.config import BenchmarkConfig
from hjcoopt.oracle import control_samples, dp_control_constrained, dp_safety, dp_state_constrained
from hjcoopt.performance import solve_performance
from hjcoopt.safety import solve_safety
from hjcoopt.systems import benchmark_grid, benchmark_instance

ORACLE_DT = 0.05


def coarse_cfg(n: int) -> BenchmarkConfig:
    return replace(BenchmarkConfig(), grid_n=(n, n))


def build_stack(cfg: BenchmarkConfig):
    """(cfg, system, spec, grid, vs, v) for one grid resolution."""
    system, spec = benchmark_instance(cfg)
    grid = benchmark_grid(cfg)
    vs = solve_safety(system, spec.constraint, grid, cfg.horizon, cfg.solver, l_many=spec.constraint_many)
    v = solve_performance(system, spec, vs, grid, cfg.solver, gamma=cfg.gamma)
    return cfg, system, spec, grid, vs, v


@pytest.fixture(scope="session")
def stack21():
    return build_stack(coarse_cfg(21))


@pytest.fixture(scope="session")
def stack11():
    return build_stack(coarse_cfg(11))


@pytest.fixture(scope="session")
def oracles21(stack21):
    cfg, system, spec, grid, vs, _ = stack21
    controls = control_samples(system.control_set, 16)
    return {
        "safety": dp_safety(system, spec.constraint, grid, cfg.horizon, ORACLE_DT, controls, l_many=spec.constraint_many),
        "state": dp_state_constrained(system, spec, grid, cfg.horizon, ORACLE_DT, controls),
        "control": dp_control_constrained(system, spec, vs, grid, cfg.horizon, ORACLE_DT, controls, gamma=cfg.gamma),
    }


@pytest.fixture(scope="session")
def oracles11(stack11):
    cfg, system, spec, grid, vs, _ = stack11
    controls = control_samples(system.control_set, 16)
    return {
        "safety": dp_safety(system, spec.constraint, grid, cfg.horizon, ORACLE_DT, controls, l_many=spec.constraint_many),
        "state": dp_state_constrained(system, spec, grid, cfg.horizon, ORACLE_DT, controls),
        "control": dp_control_constrained(system, spec, vs, grid, cfg.horizon, ORACLE_DT, controls, gamma=cfg.gamma),
    }


def safe_mask(vs, grid, factor: float = 2.0) -> np.ndarray:
    """Nodes with Vs(x, 0) at least factor*h above zero (flattened)."""
    h = max(grid.spacing)
    return vs.slices[0].ravel() >= factor * h
