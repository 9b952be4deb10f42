import numpy as np
import pytest

from helpers import constant_drift_system, segment_samples
from hjcoopt.config import BenchmarkConfig
from hjcoopt.errors import ContractViolation
from hjcoopt.hamiltonians import hamiltonian_max, hamiltonian_min_constrained
from hjcoopt.safe_controls import SafeControlSet
from hjcoopt.systems import BoxControlSet, SystemModel, benchmark_instance


@pytest.fixture(scope="module")
def bench_system():
    system, _ = benchmark_instance(BenchmarkConfig())
    return system


def full_set(system):
    return SafeControlSet(kind="full", control_set=system.control_set)


class TestHamiltonianMax:
    def test_benchmark_example_drift_plus_ball(self, bench_system):
        res = hamiltonian_max(bench_system, x=(0.0, 0.0), p=(1.0, 0.0))
        assert res.value == pytest.approx(3.0, abs=1e-12)  # 2 + ||(1,0)||
        assert res.argopt == pytest.approx([1.0, 0.0], abs=1e-12)

    def test_zero_costate_takes_zero_control(self, bench_system):
        res = hamiltonian_max(bench_system, x=(0.3, -0.4), p=(0.0, 0.0))
        assert res.value == 0.0
        assert np.all(res.argopt == 0.0)

    def test_drift_cancels_at_x2_two(self, bench_system):
        res = hamiltonian_max(bench_system, x=(0.0, 2.0), p=(0.0, 1.0))
        assert res.value == pytest.approx(1.0, abs=1e-12)
        assert res.argopt == pytest.approx([0.0, 1.0], abs=1e-12)

    def test_non_finite_costate_rejected(self, bench_system):
        with pytest.raises(ContractViolation):
            hamiltonian_max(bench_system, (0.0, 0.0), (np.inf, 0.0))

    def test_brute_force_bound(self, bench_system):
        # admissible samples: uniform interior plus a dense boundary ring,
        # since linear objectives peak on the boundary
        rng = np.random.default_rng(20)
        interior = bench_system.control_set.sample(rng, 5000)
        th = rng.uniform(0, 2 * np.pi, size=5000)
        ring = np.column_stack([np.cos(th), np.sin(th)])
        U = np.vstack([interior, ring])
        for _ in range(200):
            x = rng.uniform(-3, 2, size=2)
            p = rng.normal(size=2) * rng.uniform(0.1, 3)
            res = hamiltonian_max(bench_system, x, p)
            f1 = bench_system.drift(x)
            sampled = (p @ f1) + (U @ p)  # f2 = I for the benchmark
            assert res.value >= sampled.max() - 1e-12
            assert res.value - sampled.max() <= 2e-3
            assert res.value == pytest.approx(float(p @ bench_system.f(x, res.argopt)), abs=1e-12)

    def test_positive_homogeneity_in_costate(self, bench_system):
        rng = np.random.default_rng(21)
        for _ in range(100):
            x = rng.uniform(-3, 2, size=2)
            p = rng.normal(size=2)
            lam = rng.uniform(0.1, 5.0)
            v1 = hamiltonian_max(bench_system, x, lam * p).value
            v2 = lam * hamiltonian_max(bench_system, x, p).value
            assert v1 == pytest.approx(v2, rel=1e-12, abs=1e-12)

    def test_box_control_bang_bang(self):
        system = SystemModel(
            state_dim=2,
            control_dim=2,
            drift=lambda x: np.zeros(2),
            control_jacobian=lambda x: np.eye(2),
            control_set=BoxControlSet(lo=(-1.0, -2.0), hi=(0.5, 1.0)),
        )
        res = hamiltonian_max(system, (0.0, 0.0), (2.0, -1.0))
        assert res.argopt == pytest.approx([0.5, -2.0])
        assert res.value == pytest.approx(3.0)


class TestHamiltonianMinConstrained:
    def test_full_set_example(self, bench_system):
        res = hamiltonian_min_constrained(
            bench_system, x=(0.0, 0.0), p=(1.0, 0.0), r_val=1.5, constraint=full_set(bench_system)
        )
        assert res.value == pytest.approx(2.5, abs=1e-12)  # 2 - 1 + 1.5
        assert res.argopt == pytest.approx([-1.0, 0.0], abs=1e-12)
        assert not res.flagged

    def test_band_example(self):
        # drift contributes p.f1 = 0.3; the band forces u1 = -0.3 and the
        # costate pushes u2 to the chord top
        system = constant_drift_system((0.0, -0.3))
        sset = SafeControlSet(
            kind="hyperplane_band",
            control_set=system.control_set,
            a=np.array([1.0, 0.0]),
            b_lo=-0.3,
            b_hi=-0.3,
        )
        res = hamiltonian_min_constrained(system, (0.0, 0.0), p=(0.0, -1.0), r_val=0.0, constraint=sset)
        top = np.sqrt(1.0 - 0.09)
        assert res.argopt == pytest.approx([-0.3, top], abs=1e-12)
        assert res.value == pytest.approx(0.3 - top, abs=1e-12)

    def test_zero_costate_returns_r_val(self, bench_system):
        for sset in (
            full_set(bench_system),
            SafeControlSet(
                kind="hyperplane_band",
                control_set=bench_system.control_set,
                a=np.array([1.0, 0.0]),
                b_lo=-0.2,
                b_hi=-0.2,
            ),
        ):
            res = hamiltonian_min_constrained(bench_system, (0.0, 0.0), (0.0, 0.0), 0.7, sset)
            assert res.value == pytest.approx(0.7, abs=1e-12)

    def test_fallback_is_flagged_not_fatal(self, bench_system):
        sset = SafeControlSet(
            kind="fallback",
            control_set=bench_system.control_set,
            a=np.array([1.0, 0.0]),
            b_lo=-1.8,
            b_hi=-1.8,
            fallback_control=np.array([1.0, 0.0]),
        )
        res = hamiltonian_min_constrained(bench_system, (0.0, 0.0), (1.0, 0.0), 0.0, sset)
        assert res.flagged
        assert res.value == pytest.approx(3.0, abs=1e-12)  # evaluated at (1, 0)

    def test_ball_symmetry_with_max(self, bench_system):
        rng = np.random.default_rng(22)
        for _ in range(100):
            x = rng.uniform(-3, 2, size=2)
            p = rng.normal(size=2)
            vmax = hamiltonian_max(bench_system, x, p).value
            vmin = hamiltonian_min_constrained(
                bench_system, x, -p, 0.0, full_set(bench_system)
            ).value
            assert vmax == pytest.approx(-vmin, rel=1e-12, abs=1e-12)

    def test_band_min_beats_chord_samples(self):
        rng = np.random.default_rng(23)
        system = constant_drift_system((0.4, 0.1))
        for _ in range(200):
            p = rng.normal(size=2)
            a = rng.normal(size=2)
            if np.linalg.norm(a) < 1e-3:
                continue
            b = rng.uniform(-0.95, 0.95) * np.linalg.norm(a)
            width = rng.uniform(0.0, 0.3)
            sset = SafeControlSet(
                kind="hyperplane_band",
                control_set=system.control_set,
                a=a,
                b_lo=b - width,
                b_hi=b + width,
            )
            res = hamiltonian_min_constrained(system, (0.0, 0.0), p, 0.0, sset)
            # boundary oracle: the minimizer sits on the feasible set's
            # boundary, i.e. the ball arc inside the band or a band face chord
            th = np.linspace(0, 2 * np.pi, 100_000, endpoint=False)
            arc = np.column_stack([np.cos(th), np.sin(th)])
            s = arc @ a
            arc = arc[(s >= sset.b_lo) & (s <= sset.b_hi)]
            cands = [arc] if len(arc) else []
            amag = np.linalg.norm(a)
            for bk in (max(sset.b_lo, -0.999999 * amag), min(sset.b_hi, 0.999999 * amag)):
                cands.append(segment_samples(a, bk, 1.0, k=5001))
            best = min(float((c @ p).min()) for c in cands if len(c))
            drift_term = float(p @ system.drift(np.zeros(2)))
            assert res.value <= drift_term + best + 1e-6
            assert res.value >= drift_term + best - 2e-3
