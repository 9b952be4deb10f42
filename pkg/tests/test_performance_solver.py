import numpy as np
import pytest

from conftest import safe_mask
from helpers import frozen_system, simple_spec
from hjcoopt.config import SolverSettings
from hjcoopt.errors import ConfigError
from hjcoopt.grids import GridSpec, ValueField
from hjcoopt.hamiltonians import hamiltonian_min_constrained
from hjcoopt.performance import constrained_min_arrays, solve_performance, unreliable_mask
from hjcoopt.safe_controls import band_arrays, query
from hjcoopt.safety import store_times


def always_safe_vs(grid, horizon, store_dt=0.01, value=1.0):
    times = store_times(horizon, store_dt)
    return ValueField(grid, times, np.full((len(times),) + grid.shape, value))


class TestDegenerateCases:
    def test_zero_costs_give_zero_value(self):
        system = frozen_system()
        grid = GridSpec((-1.0, -1.0), (1.0, 1.0), (9, 9))
        vs = always_safe_vs(grid, 0.5)
        spec = simple_spec(horizon=0.5)
        v = solve_performance(system, spec, vs, grid, SolverSettings())
        assert np.abs(v.slices).max() == 0.0

    def test_pure_time_integral(self):
        # frozen dynamics integrate the unit cost rate: V(x, 0) = T
        system = frozen_system()
        grid = GridSpec((-1.0, -1.0), (1.0, 1.0), (9, 9))
        vs = always_safe_vs(grid, 2.0)
        spec = simple_spec(r=lambda x, u: 1.0, horizon=2.0)
        v = solve_performance(system, spec, vs, grid, SolverSettings())
        assert np.abs(v.slices[0] - 2.0).max() <= 1e-6
        assert np.abs(v.slices[-1]).max() == 0.0

    def test_terminal_condition_exact(self, stack21):
        _, _, spec, grid, _, v = stack21
        phi = np.array([spec.terminal_cost(x) for x in grid.nodes()]).reshape(grid.shape)
        assert np.array_equal(v.slices[-1], phi)

    def test_shares_safety_time_ladder(self, stack21):
        _, _, _, _, vs, v = stack21
        assert np.array_equal(v.times, vs.times)

    def test_grid_mismatch_rejected(self, stack21):
        _, system, spec, grid, vs, _ = stack21
        other = GridSpec((-1.0, -1.0), (1.0, 1.0), (5, 5))
        with pytest.raises(ConfigError):
            solve_performance(system, spec, vs, other, SolverSettings())


class TestBenchmarkField:
    def test_nonnegative_up_to_scheme_slack(self, stack21):
        _, _, _, _, _, v = stack21
        assert v.slices.min() >= -1e-6

    def test_oracle_agreement_on_safe_nodes(self, stack21, oracles21):
        # brute-force backward DP with 17 safe-filtered controls
        _, _, _, grid, vs, v = stack21
        dp = oracles21["control"]
        h = max(grid.spacing)
        mask = vs.slices[0].ravel() >= h
        err = np.abs(v.slices[0].ravel() - dp.slices[0].ravel())[mask]
        assert err.max() <= 5 * h

    def test_unreliable_mask_marks_unsafe_nodes(self, stack21):
        _, _, _, _, vs, _ = stack21
        mask = unreliable_mask(vs)
        assert mask.shape == vs.grid.shape
        assert np.array_equal(mask, vs.slices[0] < 0)
        assert mask.any() and not mask.all()

    def test_value_decreases_toward_goal_region(self, stack21):
        # cost-to-go from next to the goal is far below cost-to-go from the far corner
        _, _, _, _, vs, v = stack21
        near = v.value((1.4, 0.0), 0.0)
        far = v.value((-2.5, 1.5), 0.0)
        assert near < far


class TestVectorizedKernelConsistency:
    def test_matches_pointwise_constrained_hamiltonian(self, stack21):
        cfg, system, _, grid, vs, _ = stack21
        rng = np.random.default_rng(40)
        t = 0.9
        vs_val, a, b_lo, b_hi, feasible, u_fb = band_arrays(vs, system, t, gamma=cfg.gamma)
        nodes = grid.nodes()
        f1, f2 = system.eval_many(nodes)
        P = rng.normal(size=nodes.shape)
        c = np.einsum("ndm,nd->nm", f2, P)
        lin = constrained_min_arrays(
            c, vs_val, a, b_lo, b_hi, feasible, u_fb, system.control_set.radius
        )
        idx = rng.choice(len(nodes), size=120, replace=False)
        for i in idx:
            sset = query(vs, system, nodes[i], t, gamma=cfg.gamma)
            res = hamiltonian_min_constrained(system, nodes[i], P[i], 0.0, sset)
            want_lin = res.value - float(P[i] @ f1[i])
            assert lin[i] == pytest.approx(want_lin, rel=1e-10, abs=1e-10)
