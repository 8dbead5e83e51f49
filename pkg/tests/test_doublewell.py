import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from attractor_lab.systems.doublewell import (
    ConfigurationError, doublewell_attractor_suite, doublewell_engine, doublewell_flow,
    grid_values, interval_set_attractor, ode_residual,
)


class TestFlow:
    @pytest.mark.parametrize("x", [-1.0, 0.0, 1.0])
    def test_equilibria_are_fixed(self, x):
        assert doublewell_flow(7.3, x) == x

    def test_converges_to_one(self):
        assert abs(doublewell_flow(10.0, 2.0) - 1.0) < 1e-6

    def test_ode_residual(self):
        xs = np.linspace(-3, 3, 13)
        for t in (0.5, 1.0, 3.0):
            assert np.max(np.abs(ode_residual(t, xs))) < 1e-9

    @given(st.floats(-3, 3), st.floats(0, 5), st.floats(0, 5))
    def test_semigroup(self, x, s, t):
        assert doublewell_flow(s + t, x) == pytest.approx(doublewell_flow(t, doublewell_flow(s, x)), abs=1e-12)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 8))
    def test_monotone_in_initial_value(self, a, b, t):
        if a < b:
            assert doublewell_flow(t, a) <= doublewell_flow(t, b)

    def test_backward_blow_up_is_nan(self):
        assert np.isnan(doublewell_flow(-2.0, 3.0))


class TestGrid:
    def test_grid_contains_equilibria(self):
        v = grid_values(0.01, 3.0)
        assert len(v) == 601
        for p in (-1.0, 0.0, 1.0):
            assert np.min(np.abs(v - p)) < 1e-12

    @pytest.mark.parametrize("h,R", [(0.03, 3.0), (0.01, 0.5), (0.0, 3.0), (0.25, 3.1)])
    def test_bad_grids(self, h, R):
        with pytest.raises(ConfigurationError):
            grid_values(h, R)

    def test_engine_fixes_equilibria(self):
        c, v = doublewell_engine(0.01, 3.0)
        for p in (-1.0, 0.0, 1.0):
            i = int(np.argmin(np.abs(v - p)))
            assert c.gens[0, i] == i


class TestSuite:
    def test_values(self):
        rep = doublewell_attractor_suite()
        assert rep.point_attractor == [-1.0, 0.0, 1.0]
        assert rep.set_attractor_grid[0] == pytest.approx(-1.0, abs=0.01)
        assert rep.set_attractor_grid[-1] == pytest.approx(1.0, abs=0.01)
        assert all(v["attracts_points"] for v in rep.candidates.values())
        assert rep.cocycle_max_residual < 1e-9
        assert rep.passed

    def test_intervals_shrink(self):
        ivs = interval_set_attractor(3.0, [1.0, 5.0, 20.0, 50.0])
        widths = [hi - lo for lo, hi in ivs]
        assert np.all(np.diff(widths) <= 0) and widths[0] > widths[-1]
        assert ivs[-1] == pytest.approx((-1.0, 1.0), abs=1e-12)

    def test_a_non_attracting_candidate_is_rejected(self):
        from attractor_lab.attractor import attracts
        from attractor_lab.randomset import RandomSetFin
        c, v = doublewell_engine(0.01, 3.0)
        u = c.universe
        only_zero = RandomSetFin(u, (np.abs(v) < 0.005)[None, :])
        start = RandomSetFin.constant(u, len(v), [int(np.argmin(np.abs(v - 0.5)))])
        assert not attracts(c, start, only_zero).converges
