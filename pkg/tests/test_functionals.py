"""Energy functionals: frozen values, identities, and bound reports."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reebflow import (
    BasicPotential,
    FunctionalLedger,
    eval_F,
    eval_I,
    eval_J,
    eval_K_energy,
    make_grid,
    metric_state,
    mobius_potential,
    random_potential,
    reference_state,
    relative_state,
    verify_cocycle,
    verify_ij_sandwich,
    verify_mabuchi_f_relation,
)
from reebflow.functionals import osc_bound_report, verify_shift_bound

# Frozen reference values for phi = 0.1 x on the round base.  I and J
# have closed forms (I = 2 eps^2 / 3, J = I / 2 for eps x); F and K were
# frozen after grid-doubling agreement to 13 digits.
FROZEN_I = 0.02 / 3.0
FROZEN_J = 0.01 / 3.0
FROZEN_F = 4.433190719833457e-06
FROZEN_K = 5.395322763893058e-05


@pytest.fixture(scope="module")
def linear128(grid128):
    return BasicPotential.from_callable(grid128, lambda x: 0.1 * x)


class TestFrozenValues:
    def test_I_closed_form(self, linear128, ref128):
        assert eval_I(linear128, ref128) == pytest.approx(FROZEN_I, rel=1e-13)

    def test_J_closed_form(self, linear128, ref128):
        assert eval_J(linear128, ref128) == pytest.approx(FROZEN_J, rel=1e-13)

    def test_F_frozen(self, linear128, ref128):
        f0, f = eval_F(linear128, ref128)
        assert f0 == pytest.approx(FROZEN_J, rel=1e-13)  # mean-free phi: F0 = J
        assert f == pytest.approx(FROZEN_F, rel=1e-10)

    def test_K_frozen(self, linear128, ref128):
        assert eval_K_energy(linear128, ref128) == pytest.approx(FROZEN_K, rel=1e-10)

    def test_zero_potential_annihilates(self, grid128, ref128):
        zero = BasicPotential.zero(grid128)
        assert eval_I(zero, ref128) == 0.0
        assert eval_J(zero, ref128) == 0.0
        f0, f = eval_F(zero, ref128)
        assert abs(f0) < 1e-16 and abs(f) < 1e-14
        assert abs(eval_K_energy(zero, ref128)) < 1e-14


class TestIdentities:
    def test_j_collapse(self, ref128, grid128, rng):
        for _ in range(5):
            phi = random_potential(grid128, rng)
            i_val = eval_I(phi, ref128)
            assert eval_J(phi, ref128) == pytest.approx(i_val / 2.0, abs=1e-14)

    def test_translation_invariance(self, ref128, grid128, rng):
        phi = random_potential(grid128, rng)
        _, f = eval_F(phi, ref128)
        for c in (-4.2, 0.7, 3.9):
            _, f_c = eval_F(phi.shifted(c), ref128)
            assert f_c == pytest.approx(f, abs=1e-12)
            # F0 drops by exactly c (unit base mass)
            f0, _ = eval_F(phi, ref128)
            f0_c, _ = eval_F(phi.shifted(c), ref128)
            assert f0_c == pytest.approx(f0 - c, abs=1e-12)

    def test_cocycle_and_antisymmetry(self, ref128, grid128, rng):
        psi = random_potential(grid128, rng)
        phi = random_potential(grid128, rng)
        rep = verify_cocycle(psi, phi, ref128)
        assert abs(rep.cocycle_f0) < 1e-12
        assert abs(rep.cocycle_f) < 1e-12
        assert abs(rep.antisym_f0) < 1e-12
        assert abs(rep.antisym_f) < 1e-12
        assert rep.max_residual() < 1e-12

    def test_sandwich(self, ref128, grid128, rng):
        phi = random_potential(grid128, rng)
        rep = verify_ij_sandwich(phi, ref128)
        assert rep.holds
        assert rep.i_value >= 0 and rep.j_value >= 0
        assert abs(rep.lower_slack) < 1e-12 and abs(rep.upper_slack) < 1e-12

    def test_mabuchi_relation(self, ref128, grid128, rng):
        phi = random_potential(grid128, rng)
        rep = verify_mabuchi_f_relation(phi, ref128)
        assert rep.holds
        assert abs(rep.residual) < 1e-10
        assert rep.inequality_slack >= 0.0

    def test_f0_ray_derivative(self, ref128, linear128, grid128):
        # d/ds F0(s phi) = -int phi dmu_{s phi}, checked at s = 0.5
        phi = linear128
        h = 1e-4
        up = BasicPotential(values=(0.5 + h) * phi.values, grid=grid128)
        dn = BasicPotential(values=(0.5 - h) * phi.values, grid=grid128)
        fd = (eval_F(up, ref128)[0] - eval_F(dn, ref128)[0]) / (2.0 * h)
        mid = relative_state(ref128, BasicPotential(values=0.5 * phi.values, grid=grid128))
        expected = -mid.integrate(phi.values)
        assert fd == pytest.approx(expected, rel=1e-6)

    def test_k_energy_path_independence(self, ref128, grid128, rng):
        phi = random_potential(grid128, rng)
        k_lin = eval_K_energy(phi, ref128, path="linear")
        k_quad = eval_K_energy(phi, ref128, path="quadratic")
        assert k_quad == pytest.approx(k_lin, abs=1e-8)

    def test_k_energy_vanishes_on_automorphisms(self, ref128, grid128):
        for lam in (1.5, 2.0, 4.0):
            mob = mobius_potential(lam, grid128)
            assert abs(eval_K_energy(mob, ref128)) < 1e-10

    def test_i_minus_j_derivative(self, ref128, linear128, grid128):
        # d/dt (I - J)(t phi) = -(1/4) int phi_t Lap_t phidot dmu_t
        phi = linear128
        h = 1e-4
        t0 = 0.6

        def imj(t):
            p = BasicPotential(values=t * phi.values, grid=grid128)
            return eval_I(p, ref128) - eval_J(p, ref128)

        fd = (imj(t0 + h) - imj(t0 - h)) / (2.0 * h)
        state = relative_state(
            ref128, BasicPotential(values=t0 * phi.values, grid=grid128)
        )
        expected = -0.25 * state.integrate(
            t0 * phi.values * state.laplacian(phi.values)
        )
        assert fd == pytest.approx(expected, rel=1e-5)

    @settings(max_examples=15, deadline=None, derandomize=True)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_collapse_property(self, seed):
        grid = make_grid(64)
        ref = reference_state(grid)
        phi = random_potential(grid, np.random.default_rng(seed), degree=8)
        i_val = eval_I(phi, ref)
        j_val = eval_J(phi, ref)
        assert abs(j_val - i_val / 2.0) < 1e-13
        assert i_val >= -1e-15


class TestBoundReports:
    def test_shift_bound(self, ref128, grid128, rng):
        phi = random_potential(grid128, rng)
        shift = random_potential(grid128, rng, amplitude=0.1)
        rep = verify_shift_bound(phi, shift, ref128)
        assert rep.holds

    def test_osc_bound(self, ref128, grid128):
        phi = BasicPotential.from_callable(grid128, lambda x: 0.1 * (1 - x * x))
        rep = osc_bound_report(phi, ref128, eps=0.5)
        # oscillation dominates I for admissible potentials
        assert rep.excess >= 0.0
        assert rep.implied_constant == pytest.approx(rep.excess * rep.eps)

    def test_osc_bound_precondition(self, grid128):
        from reebflow import PreconditionError

        # a strongly deformed structure violates the curvature floor
        phi = BasicPotential.from_callable(grid128, lambda x: 0.45 * (1 - x * x))
        state = metric_state(phi)
        eps_too_big = float(state.scalar_curvature.min()) / 2.0 + 1.0
        with pytest.raises(PreconditionError):
            osc_bound_report(phi, reference_state(grid128), eps=eps_too_big)


class TestRandomPotential:
    def test_margin_and_determinism(self, grid128):
        rng_a = np.random.default_rng(7)
        rng_b = np.random.default_rng(7)
        phi_a = random_potential(grid128, rng_a, min_margin=0.2)
        phi_b = random_potential(grid128, rng_b, min_margin=0.2)
        np.testing.assert_array_equal(phi_a.values, phi_b.values)
        state = metric_state(phi_a)
        assert state.ratio.min() >= 0.2


class TestLedger:
    def test_row_fields(self, ref128, grid128, rng):
        phi = random_potential(grid128, rng)
        led = FunctionalLedger.evaluate("probe", phi, ref128, "round")
        assert led.tag == "probe" and led.base == "round"
        assert led.J == pytest.approx(led.I / 2.0, abs=1e-13)
        assert np.isfinite([led.F0, led.F, led.K, led.osc, led.margin]).all()
        assert led.margin > 0
        assert led.osc == pytest.approx(phi.osc())
