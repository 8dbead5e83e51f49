import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from attractor_lab.metric import TWO_PI, DomainError
from attractor_lab.rds import cocycle_check, omega_limit_estimate
from attractor_lab.systems.circle import (
    CirclePathBundle, CircleSDE, arc_distance, backward_hits, backward_image, circle_pullback,
    circle_tq7_report, circular_median, continuous_omega_cloud, discrete_vs_continuous_omega,
    lyapunov_estimate, lyapunov_reversed, lyapunov_two_point, pullback_cloud,
    stable_point_estimate, synchronization_diameter, synchronization_experiment,
    unstable_point_estimate,
)


class RotatedBundle(CirclePathBundle):
    """Noise rotated so that solutions are shifted by ``angle``."""

    def __init__(self, seed, angle):
        super().__init__(seed)
        self.angle = angle

    def unit(self, k):
        inc = super().unit(k)
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.column_stack([c * inc[:, 0] - s * inc[:, 1], s * inc[:, 0] + c * inc[:, 1]])


class TestBundle:
    def test_increments_are_window_independent(self):
        a = CirclePathBundle(3).increments(-2.0, 1.5)
        b = CirclePathBundle(3)
        b.increments(-10.0, 10.0)
        assert np.array_equal(a, b.increments(-2.0, 1.5))

    def test_shift(self):
        b = CirclePathBundle(1)
        assert np.array_equal(b.shifted(2.5).increments(0.0, 1.0), b.increments(2.5, 3.5))

    def test_off_grid_time(self):
        with pytest.raises(DomainError):
            CirclePathBundle(0).steps(1e-5)

    def test_increment_variance(self):
        inc = CirclePathBundle(5).increments(0.0, 50.0)
        assert np.var(inc) * 1000 == pytest.approx(1.0, abs=0.02)


class TestPullback:
    def test_zero_horizon_is_identity(self):
        x = np.linspace(0, 6, 7)
        assert np.array_equal(circle_pullback(CirclePathBundle(0), x, 0), x)

    def test_cloud_matches_single_horizons(self):
        b = CirclePathBundle(2)
        x = [0.0, 1.0, 4.0]
        cloud = pullback_cloud(b, x, [3, 7, 12])
        for row, n in zip(cloud, [3, 7, 12]):
            assert np.allclose(arc_distance(row, circle_pullback(b, x, n)), 0.0, atol=1e-12)

    def test_negative_horizon(self):
        with pytest.raises(DomainError):
            circle_pullback(CirclePathBundle(0), [0.0], -1)

    def test_cocycle_residual(self):
        b = CirclePathBundle(4)
        rep = cocycle_check(CircleSDE(), [(0.5, 1.25), (2.0, 3.0), (0.001, 0.999)],
                            np.linspace(0, TWO_PI, 9, endpoint=False), omegas=[b, b.shifted(-3.0)])
        assert rep.ok and rep.max_residual < 1e-6

    @settings(max_examples=20)
    @given(st.floats(0, TWO_PI), st.integers(0, 10 ** 6))
    def test_rotational_equivariance(self, angle, seed):
        x = np.array([0.3, 2.0, 5.0])
        plain = circle_pullback(CirclePathBundle(seed), x, 3)
        turned = circle_pullback(RotatedBundle(seed, angle), (x + angle) % TWO_PI, 3)
        assert np.all(arc_distance(turned, (plain + angle) % TWO_PI) < 1e-9)

    def test_zero_amplitude_is_still(self):
        b = CirclePathBundle(0, amplitude=0.0)
        x = np.linspace(0, 6, 7)
        assert np.array_equal(circle_pullback(b, x, 5), x)
        assert lyapunov_estimate(b, 100.0) == 0.0
        assert synchronization_diameter(circle_pullback(b, x, 5)) > 1.0


class TestStablePoint:
    def test_uniformly_distributed(self):
        s = [stable_point_estimate(CirclePathBundle(seed), 20.0, points=8).estimate for seed in range(1000)]
        assert stats.kstest(np.asarray(s) / TWO_PI, "uniform").pvalue > 0.01

    def test_stable_under_longer_horizon(self):
        for seed in range(10):
            b = CirclePathBundle(seed)
            a, c = stable_point_estimate(b, 30.0), stable_point_estimate(b, 40.0)
            if a.converged:
                assert arc_distance(a.estimate, c.estimate) <= 0.02

    def test_short_horizon_rejected(self):
        with pytest.raises(DomainError):
            stable_point_estimate(CirclePathBundle(0), 5.0)

    def test_unstable_point_differs(self):
        b = CirclePathBundle(0)
        s, u = stable_point_estimate(b), unstable_point_estimate(b)
        assert u.converged and arc_distance(s.estimate, u.estimate) > 0.1

    def test_circular_median_handles_wrap(self):
        assert circular_median([6.2, 0.05, 0.1]) == pytest.approx(0.05)

    def test_synchronization(self):
        rep = synchronization_experiment(range(20))
        assert rep.fraction >= 0.8


class TestLyapunov:
    def test_every_path_contracts(self):
        for seed in range(8):
            assert lyapunov_estimate(CirclePathBundle(seed), 200.0) < 0

    def test_two_routes_agree(self):
        b = CirclePathBundle(3)
        assert lyapunov_two_point(b, 200.0) == pytest.approx(lyapunov_estimate(b, 200.0), abs=0.01)

    def test_reversed_exponent_is_positive(self):
        vals = [lyapunov_reversed(CirclePathBundle(seed), 300.0) for seed in range(3)]
        assert np.mean(vals) == pytest.approx(0.5, abs=0.1)

    def test_short_runs_rejected(self):
        with pytest.raises(DomainError):
            lyapunov_estimate(CirclePathBundle(0), 50.0)
        with pytest.raises(DomainError):
            lyapunov_reversed(CirclePathBundle(0), 50.0)


class TestContinuousTime:
    def test_backward_image_inverts_pullback(self):
        b = CirclePathBundle(6)
        z = backward_image(b, 1.0, 10)
        assert arc_distance(circle_pullback(b, [z], 10)[0], 1.0) < 1e-6

    def test_backward_hits_certify(self):
        rep = backward_hits(CirclePathBundle(0), 2.0, 0.0, budget=1e3)
        assert rep.verdict == "certified" and len(rep.epochs) == 3
        assert np.all(np.diff(rep.epochs) >= 1.0)

    def test_tiny_budget_is_undetermined(self):
        rep = backward_hits(CirclePathBundle(0), 2.0, 5.0, delta=1e-4, budget=2)
        assert rep.verdict == "undetermined"

    def test_continuous_cloud_is_dense(self):
        cloud = continuous_omega_cloud(CirclePathBundle(0), 0.0)
        assert cloud.coverage >= 0.95

    def test_discrete_cloud_collapses(self):
        rep = discrete_vs_continuous_omega(CirclePathBundle(1), budget=1e3)
        assert rep.discrete_within and rep.certified_fraction >= 0.9

    def test_omega_estimate_single_cluster(self):
        b = CirclePathBundle(0)
        series = omega_limit_estimate(CircleSDE(), np.linspace(0, 6, 5), b, [40, 50], eps=0.1, t_max=60)
        assert len(series.clouds[-1]) == 1
        assert arc_distance(series.clouds[-1][0], stable_point_estimate(b).estimate) < 0.1

    def test_tq7_witness(self):
        rep = CircleSDE().tq7_report(None, CirclePathBundle(0))
        assert rep.witnessed
        assert rep.deterministic_cloud_max_distance < 0.1
        assert rep == circle_tq7_report(CirclePathBundle(0))
