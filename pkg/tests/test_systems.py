import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjcoopt.config import (
    BenchmarkConfig,
    Obstacle,
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
    save_config,
)
from hjcoopt.errors import ConfigError, ContractViolation
from hjcoopt.systems import (
    BallControlSet,
    BoxControlSet,
    benchmark_grid,
    benchmark_instance,
    flow,
)


@pytest.fixture(scope="module")
def bench():
    cfg = BenchmarkConfig()
    system, spec = benchmark_instance(cfg)
    return cfg, system, spec


class TestFlow:
    # expected values substituted by hand into (u1 + 2 - 0.5 x2^2, u2)
    @pytest.mark.parametrize(
        "x, u, want",
        [
            ((0.0, 0.0), (0.0, 0.0), (2.0, 0.0)),
            ((0.0, 2.0), (1.0, 0.0), (1.0, 0.0)),
        ],
    )
    def test_benchmark_substitutions(self, bench, x, u, want):
        _, system, _ = bench
        got = flow(system, np.array(x), np.array(u))
        assert got == pytest.approx(np.array(want), abs=1e-15)

    def test_composition_identity_outside_control_set(self, bench):
        # f = f1 + f2 u holds as an algebraic identity even for controls the
        # admissible set rejects; (-1, 1) has norm sqrt(2) > 1
        _, system, _ = bench
        got = system.f(np.array([0.0, 0.0]), np.array([-1.0, 1.0]))
        assert got == pytest.approx(np.array([1.0, 1.0]), abs=1e-15)
        with pytest.raises(ContractViolation):
            flow(system, np.array([0.0, 0.0]), np.array([-1.0, 1.0]))

    def test_control_outside_set_rejected(self, bench):
        _, system, _ = bench
        with pytest.raises(ContractViolation):
            flow(system, np.zeros(2), np.array([1.2, 0.0]))

    def test_control_affinity(self, bench):
        _, system, _ = bench
        rng = np.random.default_rng(10)
        for _ in range(1000):
            x = rng.uniform(-3, 3, size=2)
            u1 = system.control_set.project(rng.normal(size=2))
            u2 = system.control_set.project(rng.normal(size=2))
            lam = rng.uniform()
            mix = flow(system, x, lam * u1 + (1 - lam) * u2)
            want = lam * flow(system, x, u1) + (1 - lam) * flow(system, x, u2)
            assert np.abs(mix - want).max() <= 1e-12

    def test_batched_evaluation_matches_scalar(self, bench):
        _, system, _ = bench
        rng = np.random.default_rng(11)
        X = rng.uniform(-3, 3, size=(40, 2))
        f1, f2 = system.eval_many(X)
        for i, x in enumerate(X):
            assert np.allclose(f1[i], system.drift(x))
            assert np.allclose(f2[i], system.control_jacobian(x))


class TestConstraint:
    def test_arena_center_no_obstacles(self):
        cfg = BenchmarkConfig(obstacles=())
        _, spec = benchmark_instance(cfg)
        # closed-form box signed distance: min(2.5, 2.5, 2, 2)
        assert spec.constraint(np.array([-0.5, 0.0])) == pytest.approx(2.0)

    def test_outside_arena_is_negative_distance(self):
        cfg = BenchmarkConfig(obstacles=())
        _, spec = benchmark_instance(cfg)
        assert spec.constraint(np.array([3.0, 0.0])) == pytest.approx(-1.0)
        assert spec.constraint(np.array([3.0, 3.0])) == pytest.approx(-np.sqrt(2.0))

    def test_obstacle_margin(self, bench):
        _, _, spec = bench
        # on the first obstacle boundary the margin vanishes
        assert spec.constraint(np.array([-1.0, -0.5])) == pytest.approx(0.0)
        assert spec.constraint(np.array([-1.5, -0.5])) == pytest.approx(-0.5)

    def test_one_lipschitz(self, bench):
        _, _, spec = bench
        rng = np.random.default_rng(12)
        X = rng.uniform(-4, 3, size=(500, 2))
        Y = rng.uniform(-4, 3, size=(500, 2))
        lx, ly = spec.l_many(X), spec.l_many(Y)
        assert np.all(np.abs(lx - ly) <= np.linalg.norm(X - Y, axis=1) + 1e-12)

    def test_batch_matches_scalar(self, bench):
        _, _, spec = bench
        rng = np.random.default_rng(13)
        X = rng.uniform(-4, 3, size=(100, 2))
        batch = spec.l_many(X)
        assert np.allclose(batch, [spec.constraint(x) for x in X], atol=1e-14)


class TestCosts:
    def test_running_cost_zero_at_goal(self, bench):
        _, _, spec = bench
        assert spec.running_cost(np.array([1.5, 0.0]), np.zeros(2)) == 0.0

    def test_running_cost_independent_of_control(self, bench):
        _, _, spec = bench
        x = np.array([0.2, -1.0])
        assert spec.running_cost(x, np.array([0.3, 0.1])) == spec.running_cost(x, np.array([-0.9, 0.0]))

    def test_terminal_cost_zero(self, bench):
        _, _, spec = bench
        rng = np.random.default_rng(14)
        assert all(spec.terminal_cost(x) == 0.0 for x in rng.uniform(-3, 2, size=(20, 2)))


class TestBenchmarkSetup:
    def test_obstacle_covering_goal_rejected(self):
        cfg = BenchmarkConfig(obstacles=(Obstacle(center=(1.4, 0.0), radius=0.5),))
        with pytest.raises(ConfigError):
            benchmark_instance(cfg)

    def test_padded_grid_keeps_arena_spacing_and_nodes(self):
        cfg = BenchmarkConfig()
        g = benchmark_grid(cfg)
        h1 = (cfg.arena_hi[0] - cfg.arena_lo[0]) / (cfg.grid_n[0] - 1)
        assert g.spacing[0] == pytest.approx(h1)
        assert g.n == (70 + 8, 70 + 8)
        # arena corners are grid nodes
        assert np.isclose(g.axis_coords(0), cfg.arena_lo[0]).any()
        assert np.isclose(g.axis_coords(0), cfg.arena_hi[0]).any()


class TestControlSets:
    @given(st.floats(-2, 2), st.floats(-2, 2))
    @settings(max_examples=100, deadline=None)
    def test_ball_support_dominates_samples(self, a1, a2):
        ball = BallControlSet(radius=1.0)
        a = np.array([a1, a2])
        val, arg = ball.support(a)
        rng = np.random.default_rng(15)
        samples = ball.sample(rng, 512)
        assert val >= (samples @ a).max() - 1e-12
        assert ball.contains(arg)
        assert val == pytest.approx(float(a @ arg), abs=1e-12)

    def test_ball_projection(self):
        ball = BallControlSet(radius=2.0)
        assert np.allclose(ball.project(np.array([6.0, 8.0])), [1.2, 1.6])
        inside = np.array([0.3, -0.4])
        assert np.array_equal(ball.project(inside), inside)

    def test_box_support_bang_bang(self):
        box = BoxControlSet(lo=(-1.0, -2.0), hi=(3.0, 0.5))
        val, arg = box.support(np.array([1.0, -1.0]))
        assert np.allclose(arg, [3.0, -2.0])
        assert val == pytest.approx(5.0)
        # zero coefficient takes the min-norm coordinate
        _, arg0 = box.support(np.array([0.0, 1.0]))
        assert arg0[0] == 0.0

    def test_box_contains_and_project(self):
        box = BoxControlSet(lo=(-1.0, -1.0), hi=(1.0, 1.0))
        assert box.contains((0.5, -1.0))
        assert not box.contains((1.5, 0.0))
        assert np.allclose(box.project(np.array([2.0, -3.0])), [1.0, -1.0])


class TestConfig:
    def test_json_round_trip(self, tmp_path):
        cfg = BenchmarkConfig()
        path = tmp_path / "cfg.json"
        save_config(cfg, path)
        back = load_config(path)
        assert back == cfg
        assert config_hash(back) == config_hash(cfg)

    def test_hash_changes_with_content(self):
        cfg = BenchmarkConfig()
        other = config_from_dict({**config_to_dict(cfg), "seed": cfg.seed + 1})
        assert config_hash(other) != config_hash(cfg)

    def test_dict_form_is_json_ready(self):
        d = config_to_dict(BenchmarkConfig())
        json.dumps(d)  # no numpy types or tuples leaking through

    def test_invalid_configs_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({**config_to_dict(BenchmarkConfig()), "gamma": -1.0})
        with pytest.raises(ConfigError):
            config_from_dict({**config_to_dict(BenchmarkConfig()), "sim_dt": 0.013})
        with pytest.raises(ConfigError):
            BenchmarkConfig(arena_lo=(2.0, 0.0), arena_hi=(1.0, 1.0)).validate()
