import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hodyn.jet import JetPoint, Trajectory, sample_trajectory, taylor_propagate, truncate_jet
from hodyn.integrate import loglog_slope


class TestJetPoint:
    def test_shape_and_orders(self):
        j = JetPoint(0.0, np.zeros((4, 3)))
        assert j.M == 3 and j.dim == 3

    @pytest.mark.parametrize("bad", [np.zeros((2, 4)), np.zeros((0, 1)), np.array([[np.nan]])])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            JetPoint(0.0, bad)

    def test_immutable(self):
        j = JetPoint.scalar([1.0, 2.0])
        with pytest.raises(ValueError):
            j.derivs[0, 0] = 5.0


class TestTaylorPropagate:
    def test_kinematic_formula(self):
        # s = s0 + v dt + a dt^2 / 2
        out = taylor_propagate(JetPoint.scalar([0.0, 1.0, 2.0, 0.0]), 1.0, 2)
        assert out[0][0] == 2.0
        assert out.t == 1.0

    def test_zero_step_is_identity(self):
        j = JetPoint.scalar([0.3, -1.2, 4.0, 7.5], t=2.0)
        assert taylor_propagate(j, 0.0, 3) == j

    def test_cubic_exact(self):
        out = taylor_propagate(JetPoint.scalar([0.0, 0.0, 0.0, 6.0, 0.0]), 2.0, 3)
        assert out[0][0] == 8.0
        assert out[1][0] == 12.0  # 3 t^2
        assert out[4][0] == 0.0

    def test_orders_above_frozen(self):
        j = JetPoint.scalar([1.0, 1.0, 1.0, 5.0])
        out = taylor_propagate(j, 0.5, 1)
        assert out[0][0] == 1.5 and out[1][0] == 1.0
        assert out[2][0] == 1.0 and out[3][0] == 5.0

    def test_order_out_of_range(self):
        with pytest.raises(ValueError):
            taylor_propagate(JetPoint.scalar([1.0, 2.0]), 0.1, 2)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=6),
        st.floats(-1, 1, allow_nan=False),
        st.floats(-1, 1, allow_nan=False),
    )
    def test_composition_exact_for_polynomials(self, coeffs, dt1, dt2):
        j = JetPoint.scalar(coeffs)
        M = j.M
        one = taylor_propagate(j, dt1 + dt2, M)
        two = taylor_propagate(taylor_propagate(j, dt1, M), dt2, M)
        scale = np.maximum(1.0, np.abs(one.derivs))
        assert np.all(np.abs(one.derivs - two.derivs) <= 1e-12 * scale * 10)

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_error_order(self, order):
        def exact(t):
            return [math.sin(t + n * math.pi / 2) for n in range(order + 1)]

        jet = JetPoint.scalar(exact(0.3), 0.3)
        dts = np.geomspace(1e-1, 1e-3, 5) if order < 4 else np.geomspace(1e-1, 1e-2, 5)
        errs = [abs(taylor_propagate(jet, dt, order)[0][0] - math.sin(0.3 + dt)) for dt in dts]
        slope, _ = loglog_slope(dts, errs)
        assert abs(slope - (order + 1)) < 0.2


class TestTruncate:
    def test_truncate(self):
        j = JetPoint.scalar([1, 2, 3, 4, 5])
        assert truncate_jet(j, 2).M == 2
        assert truncate_jet(j, 4) == j
        assert truncate_jet(j, 0).derivs.tolist() == [[1.0]]
        with pytest.raises(ValueError):
            truncate_jet(j, 5)


class TestTrajectory:
    def test_mixed_shapes_rejected(self):
        with pytest.raises(ValueError):
            Trajectory.from_jets([JetPoint.scalar([0, 1]), JetPoint(1.0, np.zeros((2, 2)))])

    def test_times_must_increase(self):
        with pytest.raises(ValueError):
            Trajectory([0.0, 0.0], np.zeros((2, 1, 1)))

    def test_csv_header_and_precision(self):
        traj = Trajectory([0.0, 0.1], np.array([[[1 / 3, 2.0], [0.5, 0.25]], [[1.0, 1.0], [0.0, 0.0]]]))
        lines = traj.to_csv().splitlines()
        assert lines[0] == "t,r0_x,r0_y,r1_x,r1_y"
        assert lines[1].split(",")[1] == "0.33333333333333331"
        assert float(lines[1].split(",")[1]) == 1 / 3

    def test_resample(self):
        ts = np.array([0.0, 0.1, 0.35, 0.5, 1.0])
        traj = sample_trajectory(lambda t: [[math.sin(t)], [math.cos(t)], [-math.sin(t)], [-math.cos(t)]], ts)
        uni = traj.resample_uniform(9)
        assert uni.is_uniform()
        np.testing.assert_allclose(uni.derivs[:, 0, 0], np.sin(uni.times), atol=5e-4)
