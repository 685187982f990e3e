"""Normalized flow stepping, maximum-principle monitors, pinching."""

import math

import numpy as np
import pytest

from reebflow import (
    BasicPotential,
    ConfigurationError,
    FlowPolicy,
    epsilon_pinching,
    flow_rhs,
    holder_seminorm,
    metric_state,
    reference_state,
    run_flow,
    smoothing_monitors,
)
from reebflow.transverse import M_DIM
from tests.conftest import psi_bump

MP1 = M_DIM + 1


@pytest.fixture(scope="module")
def traj96(base96):
    return run_flow(base96, s_end=1.0)


class TestRhs:
    def test_round_fixed_point(self, grid128, ref128):
        rhs = flow_rhs(BasicPotential.zero(grid128), ref128)
        assert np.abs(rhs).max() < 1e-13

    def test_einstein_translate_fixed_point(self, grid128, base128, psi128):
        # v = -psi + const reaches a round total structure, where the
        # rhs cancels exactly against the base Ricci potential
        v = BasicPotential(values=-psi128.values + 0.3, grid=grid128)
        rhs = flow_rhs(v, base128)
        assert np.abs(rhs - 2.0 * 0.3 + base128.norm_constant).max() < 1e-12

    def test_directional_linearization(self, traj96, base96):
        # d/de rhs(v + e u) = Lap_s u / 4 + (m+1) u at each record state
        grid = base96.potential.grid
        rec = traj96.records[len(traj96.records) // 2]
        state = metric_state(
            BasicPotential(
                values=base96.potential.values + rec.v.values, grid=grid
            )
        )
        u = rec.vdot
        eps = 1e-6
        up = flow_rhs(BasicPotential(values=rec.v.values + eps * u, grid=grid), base96)
        dn = flow_rhs(BasicPotential(values=rec.v.values - eps * u, grid=grid), base96)
        fd = (up - dn) / (2 * eps)
        analytic = 0.25 * state.laplacian(u) + MP1 * u
        rel = np.abs(fd - analytic).max() / max(np.abs(analytic).max(), 1e-30)
        assert rel < 1e-6


class TestRunFlow:
    def test_round_base_stationary(self, grid128, ref128):
        traj = run_flow(ref128, s_end=1.0, policy=FlowPolicy(record_stride=100))
        assert traj.completed
        assert max(r.v.sup() for r in traj.records) < 1e-10
        assert max(r.monitors.sup_vdot for r in traj.records) < 1e-10

    def test_monitor_bounds_hold(self, traj96):
        assert traj96.completed and traj96.failure is None
        for rec in traj96.records:
            m = rec.monitors
            assert m.bound_a_slack >= -1e-10
            assert m.bound_b_slack >= -1e-10
            assert m.bound_c_min >= -1e-10
            assert m.bound_d_slack >= -1e-10
            assert m.constancy_dev < 1e-12

    def test_ricci_potential_decays(self, traj96):
        first = traj96.records[0].monitors
        last = traj96.endpoint().monitors
        assert last.sup_h < 0.05 * first.sup_h
        assert last.s_pinch < 0.05 * first.s_pinch

    def test_records_cover_interval(self, traj96):
        ss = [r.s for r in traj96.records]
        assert ss[0] == 0.0
        assert ss[-1] == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.diff(ss) > 0)
        assert traj96.record_at(0.5).s == pytest.approx(0.5, abs=0.02)

    def test_step_halving_converges(self, base128):
        # mean-free endpoint is first order in ds; the constant mode is
        # gauge (it grows like e^{(m+1)s}) and is projected out
        ends = []
        for ds in (5e-4, 2.5e-4):
            traj = run_flow(
                base128, s_end=2.0, policy=FlowPolicy(ds=ds, record_stride=10**6)
            )
            assert traj.completed
            v = traj.endpoint().v
            ends.append(v.values - base128.integrate(v.values))
        assert np.abs(ends[0] - ends[1]).max() < 1e-6

    def test_invalid_s_end(self, ref128):
        with pytest.raises(ConfigurationError):
            run_flow(ref128, s_end=0.0)


class TestHolderSeminorm:
    def test_max_pair_closed_form(self, grid96):
        # for f = theta the pairwise ratio sqrt(2 |dtheta|) peaks at the
        # widest node separation
        theta = np.arccos(-grid96.x)
        expected = math.sqrt(2.0 * (theta.max() - theta.min()))
        assert holder_seminorm(grid96, theta) == pytest.approx(expected, rel=1e-12)

    def test_constant_is_zero(self, grid96):
        assert holder_seminorm(grid96, np.ones(grid96.n)) == 0.0

    def test_scaling(self, grid96, rng):
        f = rng.standard_normal(grid96.n)
        assert holder_seminorm(grid96, 3.0 * f) == pytest.approx(
            3.0 * holder_seminorm(grid96, f), rel=1e-12
        )


class TestSmoothing:
    def test_report_fields(self, base96):
        traj = run_flow(base96, s_end=2.0, policy=FlowPolicy(record_stride=50))
        rep = smoothing_monitors(traj, one_minus_t=0.4)
        assert rep.worst_a_slack >= -1e-10
        assert rep.worst_b_slack >= -1e-10
        assert rep.worst_c_min >= -1e-10
        assert rep.worst_d_slack >= -1e-10
        assert rep.max_constancy_dev < 1e-12
        assert len(rep.holder_track) == len(traj.records)
        assert rep.u_bound_slack is not None and rep.u_bound_slack > 0
        assert rep.sandwich_held is not None
        assert rep.c1_fit is not None and rep.c1_fit > 0
        assert rep.c7_fit is not None and rep.c7_fit > 0

    def test_short_trajectory_rejected(self, base96):
        traj = run_flow(base96, s_end=0.5, policy=FlowPolicy(record_stride=10**6))
        short = type(traj)(
            initial=traj.initial,
            records=traj.records[:1],
            policy=traj.policy,
            completed=True,
            failure=None,
        )
        with pytest.raises(ConfigurationError):
            smoothing_monitors(short)

    def test_no_time_one_section_when_flow_is_short(self, base96):
        traj = run_flow(base96, s_end=0.5, policy=FlowPolicy(record_stride=100))
        rep = smoothing_monitors(traj)
        assert rep.u_bound_slack is None
        assert rep.sandwich_held is None
        assert rep.c1_fit is None


class TestPinching:
    def test_pinch_from_bump(self, base96):
        res = epsilon_pinching(base96, eps=0.1)
        assert res.achieved <= 0.1
        assert res.h_at_path <= 0.05 + 1e-12
        assert 0.1 < res.path_t < 1.0
        assert res.calabi <= res.calabi_bound_value
        assert res.flow_h_slack > 0
        assert res.flow_dh2_slack > 0
        assert res.flow_lap_h_min > 0
        # the sandwich is reported, not assumed: the lower side holds,
        # the upper side may overshoot 1 by O(h) during relaxation
        assert res.smoothing.sandwich_lo_margin > 0
        assert res.smoothing.sandwich_hi_margin > -0.01
        assert res.trajectory.completed

    def test_invalid_eps(self, base96):
        with pytest.raises(ConfigurationError):
            epsilon_pinching(base96, eps=0.0)
