import math

import numpy as np
import pytest

from awkb.bremmer import (
    E_MINUS,
    E_PLUS,
    awkb_wavefunction_bound,
    awkb_wavefunction_scattering,
    bremmer_iterate,
    coupled_rhs,
    expansion_pair,
    first_order_amplitudes_bound,
    first_order_amplitudes_scattering,
    gauge_residual,
    solve_coupled_ode,
)
from awkb.errors import RegionError, SingularityError
from awkb.potential import Centrifugal, CustomPolynomial, Harmonic, ProblemSetup, classical_momentum, reflection_coupling
from awkb.quadrature import phase_integral
from awkb.reference import compare, ho_exact_eigenstate, normalize
from awkb.scenarios import convergence_study
from awkb.wkb import wkb1_allowed, wkb1_forbidden

HO = ProblemSetup(Harmonic(), 0.5)
FLAT = ProblemSetup(CustomPolynomial((0.0,)), 0.5, 1.0, (-5.0, 5.0))
LANGER = ProblemSetup(Centrifugal(1, 1.0, True), 0.5, 1.0, (0.01, 200.0))
BOUND_GRID = np.linspace(-0.9, 0.9, 181)
HALF_GRID = np.linspace(0.0, 0.9, 181)
OUTER_GRID = np.linspace(1.6, 20.0, 369)


@pytest.fixture(scope="module")
def bound_pair():
    return first_order_amplitudes_bound(HO, BOUND_GRID, 0.0, 1.0, tol=1e-10)


@pytest.fixture(scope="module")
def half_expansion():
    return bremmer_iterate(HO, HALF_GRID, 0.0, 4, tol=1e-12)


@pytest.fixture(scope="module")
def scattering_pair():
    return first_order_amplitudes_scattering(LANGER, OUTER_GRID, 1.5, tol=1e-9)


class TestCoupledSystem:
    def test_flat_potential_has_no_coupling(self):
        assert coupled_rhs(FLAT, 0.7, 1.0 + 2j, 3.0 - 1j, 0.0) == (0, 0)

    def test_symmetric_point(self):
        da, db = coupled_rhs(HO, 0.0, 1.0, 1.0, 0.0)
        assert da == 0 and db == 0

    def test_value_at_half(self):
        S = phase_integral(HO, 0.0, 0.5).value
        w = reflection_coupling(HO, 0.5)
        da, db = coupled_rhs(HO, 0.5, 1.0, 1.0, 0.0)
        assert da == pytest.approx(-w * (1 - np.exp(-2j * S)), abs=1e-14)
        assert db == pytest.approx(np.conj(da), abs=1e-14)

    def test_rhs_matches_trajectory_slope(self):
        a0, b0 = E_MINUS, E_PLUS
        h = 1e-4
        pair = solve_coupled_ode(HO, 0.0, 0.6, a0, b0, 1e-13, t_eval=[0.5 - h, 0.5, 0.5 + h])
        slope = (pair.a[2] - pair.a[0]) / (2 * h)
        da, _ = coupled_rhs(HO, 0.5, pair.a[1], pair.b[1], 0.0, phase=pair.phase[1])
        assert abs(slope - da) < 1e-7

    def test_singular_at_turning_point(self):
        with pytest.raises(SingularityError):
            coupled_rhs(HO, 1.0, 1.0, 1.0, 0.0)

    def test_ode_flat_potential_constant(self):
        pair = solve_coupled_ode(FLAT, 0.0, 3.0, 1 + 1j, 2 - 1j)
        np.testing.assert_allclose(pair.a, 1 + 1j, atol=1e-14)
        np.testing.assert_allclose(pair.b, 2 - 1j, atol=1e-14)

    def test_ode_conjugate_symmetry(self):
        grid = np.linspace(0.0, 0.9, 181)
        pair = solve_coupled_ode(HO, 0.0, 0.9, E_MINUS, E_PLUS, t_eval=grid)
        assert np.abs(pair.b - np.conj(pair.a)).max() < 1e-9

    def test_ode_gauge_reassembly(self):
        grid = np.linspace(0.0, 0.9, 4001)
        pair = solve_coupled_ode(HO, 0.0, 0.9, E_MINUS, E_PLUS, t_eval=grid, phase_sign=-1)
        assert gauge_residual(HO, pair) < 1e-6

    def test_ode_rejects_forbidden_interval(self):
        with pytest.raises(RegionError):
            solve_coupled_ode(HO, 0.0, 1.2, E_MINUS, E_PLUS)


class TestFirstOrderBound:
    grid = BOUND_GRID

    @pytest.fixture
    def pair(self, bound_pair):
        return bound_pair

    def test_reference_values(self, pair):
        A, B = pair.scaled_amplitudes(HO)
        i = int(np.argmin(np.abs(self.grid)))
        assert A[i] == pytest.approx(E_MINUS, abs=1e-14)
        assert B[i] == pytest.approx(E_PLUS, abs=1e-14)

    def test_conjugate_construction(self, pair):
        assert np.abs(pair.b - np.conj(pair.a)).max() < 1e-10

    def test_real_wavefunction(self, pair):
        assert np.abs(pair.psi().imag).max() < 1e-9

    def test_first_order_in_eps(self):
        grid = np.linspace(0.0, 0.5, 51)
        devs = []
        for eps in (0.05, 0.1):
            ex = bremmer_iterate(HO, grid, 0.0, 1, x0=1.0, tol=1e-12, eps=eps)
            ode = solve_coupled_ode(HO, 0.0, 0.5, E_MINUS, E_PLUS, 1e-13, eps, grid, ex.metadata["Theta"], -1)
            A_ode = ode.a * np.sqrt(classical_momentum(HO, grid).real)
            devs.append(abs(ex.partial_sums[0][-1] - A_ode[-1]))
        assert devs[0] < 1e-3
        assert devs[1] / devs[0] == pytest.approx(4.0, rel=0.05)


class TestBremmerIterate:
    grid = HALF_GRID

    @pytest.fixture
    def expansion(self, half_expansion):
        return half_expansion

    def test_layers_vanish_at_reference(self, expansion):
        assert np.all(expansion.layers[:, 0] == 0)

    def test_order_one_matches_first_order(self, expansion):
        pair = first_order_amplitudes_bound(HO, self.grid, 0.0, 1.0, tol=1e-12)
        A, _ = pair.scaled_amplitudes(HO)
        np.testing.assert_allclose(expansion.partial_sums[0], A, atol=1e-10)

    def test_flat_potential(self):
        ex = bremmer_iterate(FLAT, np.linspace(-2, 2, 41), 0.0, 3)
        assert np.all(ex.layers == 0)
        np.testing.assert_allclose(ex.partial_sums, E_MINUS, atol=0)

    def test_zero_coupling_is_zeroth_order(self):
        ex = bremmer_iterate(HO, self.grid, 0.0, 2, eps=0.0)
        assert np.abs(ex.partial_sums - E_MINUS).max() < 1e-12

    def test_successive_differences_shrink(self, expansion):
        d = [np.abs(expansion.partial_sums[k + 1] - expansion.partial_sums[k]).max() for k in range(3)]
        assert d[0] > d[1] > d[2]

    def test_deviation_from_ode_decreases(self):
        devs = convergence_study(HO, self.grid, 0.0, [1, 2, 3, 4])[1.0]
        assert all(a > b for a, b in zip(devs, devs[1:]))

    def test_order_three_within_bound(self):
        devs = convergence_study(HO, self.grid, 0.0, [3])[1.0]
        assert devs[0] < 1e-4

    def test_eps_scaling_slopes(self):
        from awkb.scenarios import fitted_slopes

        study = convergence_study(HO, self.grid, 0.0, [1, 2, 3], eps_values=(0.1, 0.2, 0.4))
        for n, slope in zip((1, 2, 3), fitted_slopes(study, (1, 2, 3))):
            assert abs(slope - (n + 1)) <= 0.3

    def test_expansion_pair_conjugate(self, expansion):
        pair = expansion_pair(HO, expansion, 3)
        assert pair.order == "order-3"
        assert np.abs(pair.b - np.conj(pair.a)).max() < 1e-12

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError):
            bremmer_iterate(HO, self.grid, 0.0, 0)


class TestBoundWavefunction:
    def test_equals_wkb1_at_reference(self):
        grid = np.linspace(0.0, 0.9, 91)
        aw = awkb_wavefunction_bound(HO, grid, None, 1.0)
        w1 = wkb1_allowed(HO, grid, 1.0)
        assert aw.psi[0] == pytest.approx(w1.psi[0], abs=1e-12)

    def test_real_everywhere(self):
        aw = awkb_wavefunction_bound(HO, np.linspace(0.0, 0.96, 97), np.linspace(1.04, 4.0, 60), 1.0)
        assert np.abs(aw.psi.imag).max() < 1e-9

    def test_forbidden_piece_is_first_order(self):
        outside = np.linspace(1.04, 4.0, 60)
        aw = awkb_wavefunction_bound(HO, np.linspace(0.0, 0.96, 97), outside, 1.0)
        np.testing.assert_allclose(aw.psi[-60:], wkb1_forbidden(HO, outside, 1.0).psi, rtol=1e-14)

    def test_closer_to_exact_than_first_order(self):
        grid = np.linspace(0.0, 0.95, 191)
        exact = ho_exact_eigenstate(0, grid=grid)
        aw = awkb_wavefunction_bound(HO, grid, None, 1.0, delta=0.04)
        w1 = wkb1_allowed(HO, grid, 1.0, delta=0.04)
        m_aw = compare(normalize(aw, "amplitude-match", (0.0, 0.95), exact), exact, (0.0, 0.95))
        m_w1 = compare(normalize(w1, "amplitude-match", (0.0, 0.95), exact), exact, (0.0, 0.95))
        assert m_aw.l2 < m_w1.l2

    def test_higher_order_assembly(self):
        grid = np.linspace(0.0, 0.9, 91)
        aw = awkb_wavefunction_bound(HO, grid, None, 1.0, order=3)
        assert aw.metadata["order"] == 3 and np.abs(aw.psi.imag).max() < 1e-9


class TestScattering:
    grid = OUTER_GRID

    @pytest.fixture
    def pair(self, scattering_pair):
        return scattering_pair

    def test_conjugate(self, pair):
        assert np.abs(pair.b - np.conj(pair.a)).max() < 1e-12

    def test_correction_decays_outward(self, pair):
        A, _ = pair.scaled_amplitudes(LANGER)
        dev = np.abs(A - E_MINUS)
        assert dev[-1] < 1e-2 * dev[0]
        assert dev[-1] < 2e-3

    def test_tail_bounded(self, pair):
        p = classical_momentum(LANGER, 20.0).real
        bound = abs(reflection_coupling(LANGER, 20.0, p)) / p
        assert abs(pair.metadata["tail_value"]) <= bound + pair.metadata["tail_bound"]

    def test_against_inward_ode(self):
        # start the ODE at r = 50 from the first-order values there and integrate inward;
        # the gap is second order, so it is small against the first-order correction
        theta50 = phase_integral(LANGER, 1.5, 50.0).value
        rel = []
        for r in (2.0, 3.0, 5.0):
            fo = first_order_amplitudes_scattering(LANGER, np.array([r, 50.0]), 1.5, tol=1e-10)
            ode = solve_coupled_ode(LANGER, 50.0, r, fo.a[1], fo.b[1], 1e-12, 1.0, [r, 50.0], theta50, 1, "scattering")
            root_p = math.sqrt(classical_momentum(LANGER, r).real)
            correction = abs(fo.a[0] * root_p - E_MINUS)
            rel.append(abs(ode.a[0] - fo.a[0]) * root_p / correction)
        assert rel[0] < 0.1
        assert rel[0] > rel[1] > rel[2]

    def test_wavefunction_real_and_far_limit(self):
        grid = np.linspace(1.6, 60.0, 1000)
        wf = awkb_wavefunction_scattering(LANGER, grid, 1.5, tol=1e-9)
        assert np.abs(wf.psi.imag).max() < 1e-9
        theta = np.array([phase_integral(LANGER, 1.5, r).value for r in grid[-5:]])
        first = 2 / math.sqrt(1.0) * np.cos(theta - math.pi / 4)
        np.testing.assert_allclose(wf.psi[-5:].real, first, atol=2e-3)

    def test_rejects_grid_inside_turning_point(self):
        with pytest.raises(RegionError):
            first_order_amplitudes_scattering(LANGER, np.linspace(1.0, 5.0, 10), 1.5)
