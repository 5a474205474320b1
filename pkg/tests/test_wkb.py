import math

import numpy as np
import pytest

from awkb.errors import RegionError, TurningPointProximityError
from awkb.potential import Harmonic, ProblemSetup, classical_momentum
from awkb.reference import ho_exact_eigenstate
from awkb.wkb import (
    WaveTable,
    asymptoticity_report,
    concatenate_tables,
    schrodinger_residual,
    series_crossing,
    wkb1_allowed,
    wkb1_forbidden,
    wkb2_wavefunction,
    wkb_series,
)

HO = ProblemSetup(Harmonic(), 0.5)


@pytest.fixture(scope="module")
def series_terms():
    return wkb_series(HO, np.linspace(0.0, 0.999, 1000), 1.0)


def residual_l2(table, s=HO):
    x, r = schrodinger_residual(s, table)
    return float(np.sqrt(np.trapezoid(np.abs(r) ** 2, x)))


class TestWaveTable:
    def test_validation(self):
        with pytest.raises(ValueError):
            WaveTable([0.0, 0.0], [1.0, 1.0], "wkb1")
        with pytest.raises(ValueError):
            WaveTable([0.0, 1.0], [1.0, np.nan], "wkb1")
        with pytest.raises(ValueError):
            WaveTable([0.0, 1.0], [1.0, 1.0], "bogus")

    def test_scaled_keeps_metadata(self):
        t = WaveTable([0.0, 1.0], [1.0, 2.0], "exact", {"a": 1}).scaled(0.5, scale=0.5)
        assert t.psi.tolist() == [0.5, 1.0] and t.metadata == {"a": 1, "scale": 0.5}

    def test_concatenate_segments(self):
        a = WaveTable([0.0, 1.0], [1.0, 1.0], "wkb1")
        b = WaveTable([2.0, 3.0], [1.0, 1.0], "wkb1", regions=("forbidden", "forbidden"))
        c = concatenate_tables([b, a])
        assert c.x.tolist() == [0, 1, 2, 3]
        assert c.segments.tolist() == [0, 0, 1, 1]
        assert c.regions == ("allowed", "allowed", "forbidden", "forbidden")


class TestFirstOrder:
    def test_value_at_origin(self):
        t = wkb1_allowed(HO, np.array([0.0, 0.5]), 1.0)
        assert t.psi[0].real == pytest.approx(2.0, abs=1e-12)
        assert np.abs(t.psi.imag).max() < 1e-10

    def test_envelope_grows_toward_turning_point(self):
        grid = np.linspace(0.0, 0.98, 2000)
        t = wkb1_allowed(HO, grid, 1.0, delta=0.01)
        envelope = 2 / np.sqrt(classical_momentum(HO, grid).real)
        assert np.all(np.abs(t.psi) <= envelope + 1e-12)
        assert envelope[-1] > 2.2 * envelope[0]

    def test_left_turning_point_mirror(self):
        grid = np.linspace(0.0, 0.9, 91)
        right = wkb1_allowed(HO, grid, 1.0)
        left = wkb1_allowed(HO, -grid[::-1], -1.0)
        np.testing.assert_allclose(left.psi[::-1], right.psi, atol=1e-12)

    def test_standoff_enforced(self):
        with pytest.raises(TurningPointProximityError):
            wkb1_allowed(HO, np.linspace(0.0, 0.99, 10), 1.0)
        with pytest.raises(RegionError):
            wkb1_allowed(HO, np.linspace(0.5, 1.5, 10), 1.0)

    def test_forbidden_closed_form(self):
        t = wkb1_forbidden(HO, np.array([1.5, 3.0]), 1.0)
        action = 0.5 * (3 * math.sqrt(8) - math.acosh(3.0))
        expected = math.exp(-action) / abs(classical_momentum(HO, 3.0)) ** 0.5
        assert t.psi[1].real == pytest.approx(expected, rel=1e-9)

    def test_forbidden_monotone_decay(self):
        t = wkb1_forbidden(HO, np.linspace(1.2, 5.0, 200), 1.0)
        assert np.all(np.diff(np.abs(t.psi)) < 0)

    def test_forbidden_rejects_allowed_points(self):
        with pytest.raises(RegionError):
            wkb1_forbidden(HO, np.array([0.5, 2.0]), 1.0)

    def test_connection_envelopes_match(self):
        # both sides scale as |p|^(-1/2) with the same D as the standoff shrinks
        for d in (1e-2, 1e-3, 1e-4):
            inside = wkb1_allowed(HO, np.array([0.0, 1 - d]), 1.0, delta=d / 2)
            outside = wkb1_forbidden(HO, np.array([1 + d]), 1.0)
            q_in = abs(classical_momentum(HO, 1 - d)) ** 0.5
            q_out = abs(classical_momentum(HO, 1 + d)) ** 0.5
            # allowed side: 2 cos(theta - pi/4) -> sqrt(2) as theta -> 0
            assert inside.psi[1].real * q_in == pytest.approx(math.sqrt(2), rel=2e-2)
            assert outside.psi[0].real * q_out == pytest.approx(1.0, rel=2e-2)

    def test_schrodinger_residual_larger_near_turning_point(self):
        grid = np.linspace(0.0, 0.9, 901)
        x, r = schrodinger_residual(HO, wkb1_allowed(HO, grid, 1.0))
        assert np.abs(r[x > 0.8]).max() > 10 * np.abs(r[x < 0.1]).max()


class TestSeries:
    @pytest.fixture
    def terms(self, series_terms):
        return series_terms

    def test_s1_identity(self, terms):
        p = classical_momentum(HO, terms.x).real
        np.testing.assert_allclose(np.exp(2 * terms.S1) * p, 1.0, atol=1e-12)
        assert terms.S1[0] == 0.0

    def test_s0_is_action_toward_turning_point(self, terms):
        assert abs(terms.S0[0]) == pytest.approx(math.pi / 4, abs=1e-9)

    def test_s2_anchored_at_midpoint(self, terms):
        assert terms.x_mid == pytest.approx(0.0, abs=1e-12)
        assert terms.S2[0] == 0.0

    def test_hierarchy_relation(self):
        h = 1e-4
        x = 0.5 + h * np.arange(-2, 3)
        t = wkb_series(HO, x, 1.0, x_mid=0.0, tol=1e-13)
        d1 = lambda f: (f[3] - f[1]) / (2 * h)  # noqa: E731
        d2 = (t.S1[3] - 2 * t.S1[2] + t.S1[1]) / h**2
        lhs = 2 * d1(t.S0) * d1(t.S2) + d2 + d1(t.S1) ** 2
        assert abs(lhs) < 1e-6

    def test_s2_exceeds_s1_near_turning_point(self, terms):
        window = (terms.x > 0.9) & (terms.x < 0.999)
        assert np.any(np.abs(terms.S2[window]) > np.abs(terms.S1[window]))

    def test_flags_deep_inside(self, terms):
        rep = asymptoticity_report(terms, HO.hbar)
        i = int(np.argmin(np.abs(terms.x - 0.1)))
        assert rep.flags[i].tolist() == [True, True, True]

    def test_flags_near_turning_point(self, terms):
        rep = asymptoticity_report(terms, HO.hbar)
        i = int(np.argmin(np.abs(terms.x - 0.99)))
        assert not rep.flags[i, 1]

    def test_vanishing_s2_flags(self, terms):
        rep = asymptoticity_report(terms, HO.hbar)
        assert rep.flags[0, 1] and rep.flags[0, 2]

    def test_ratio_is_configurable(self, terms):
        strict = asymptoticity_report(terms, HO.hbar, ratio=100.0)
        loose = asymptoticity_report(terms, HO.hbar, ratio=1.5)
        assert strict.flags.sum() <= loose.flags.sum()

    def test_crossing_ignores_common_anchor(self, terms):
        # both terms vanish at the anchor; hbar|S2| stays above |S1| beyond it
        assert series_crossing(terms, HO.hbar) is None

    def test_requires_allowed_grid(self):
        with pytest.raises(RegionError):
            wkb_series(HO, np.array([0.5, 1.5]), 1.0)


class TestSecondOrder:
    def test_equals_first_order_at_anchor(self):
        grid = np.linspace(0.0, 0.9, 91)
        w1, w2 = wkb1_allowed(HO, grid, 1.0), wkb2_wavefunction(HO, grid, 1.0)
        assert w2.psi[0] == pytest.approx(w1.psi[0], abs=1e-12)
        assert np.abs(w2.psi.imag).max() < 1e-10

    def test_larger_magnitude_near_turning_point(self):
        grid = np.linspace(0.99, 0.999, 901)
        w1 = wkb1_allowed(HO, grid, 1.0, delta=5e-4)
        w2 = wkb2_wavefunction(HO, grid, 1.0, delta=5e-4)
        assert np.abs(w2.psi).max() > np.abs(w1.psi).max()
        # the correction only moves the phase, so 2/sqrt(p) bounds both
        envelope = 2 / np.sqrt(classical_momentum(HO, grid).real)
        assert np.all(np.abs(w2.psi) <= envelope * (1 + 1e-12))

    def test_sup_distance_on_inner_window_is_frozen(self):
        # least-squares scaled onto the exact ground state; golden from the first verified run
        grid = np.linspace(0.0, 0.8, 801)
        exact = ho_exact_eigenstate(0, grid=grid)
        w2 = wkb2_wavefunction(HO, grid, 1.0)
        scale = np.vdot(w2.psi, exact.psi).real / np.vdot(w2.psi, w2.psi).real
        assert np.abs(scale * w2.psi - exact.psi).max() == pytest.approx(0.50468279, rel=1e-6)

    def test_residual_converges_faster_in_hbar(self):
        # fixed turning point x0 = 1 while hbar shrinks
        ratios = []
        for hb in (0.5, 0.25, 0.125):
            s = ProblemSetup(Harmonic(), 0.5, hb, (-4.0, 4.0))
            g = np.linspace(0.0, 0.8, int(4000 / hb) + 1)
            ratios.append(residual_l2(wkb2_wavefunction(s, g, 1.0), s) / residual_l2(wkb1_allowed(s, g, 1.0), s))
        assert ratios[0] > ratios[1] > ratios[2]
        assert ratios[-1] < 0.5

    def test_residual_ordering_on_inner_window(self):
        g = np.linspace(0.0, 0.8, 801)
        assert residual_l2(wkb2_wavefunction(HO, g, 1.0)) < residual_l2(wkb1_allowed(HO, g, 1.0))

    def test_residual_ordering_reverses_near_turning_point(self):
        g = np.linspace(0.9, 0.99, 901)
        w1 = wkb1_allowed(HO, g, 1.0, delta=0.005)
        w2 = wkb2_wavefunction(HO, g, 1.0, delta=0.005)
        assert residual_l2(w2) > residual_l2(w1)
