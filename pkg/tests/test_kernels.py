import os
import subprocess
import sys

import numpy as np
import pytest

from awkb import _kernels
from awkb._kernels import NUMBA_KERNELS, NUMPY_KERNELS
from awkb.quadrature import gauss_rule

needs_numba = pytest.mark.skipif(NUMBA_KERNELS is None, reason="numba not importable")


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(7)


@needs_numba
class TestBackendsAgree:
    def test_panel_cumulative(self, rng):
        _, wts, Q = gauss_rule(8)
        gh = rng.standard_normal((300, 8)) + 1j * rng.standard_normal((300, 8))
        a = NUMPY_KERNELS.panel_cumulative(gh, Q, wts, 0.5 + 0j)
        b = NUMBA_KERNELS.panel_cumulative(gh, Q, wts, 0.5 + 0j)
        for u, v in zip(a, b):
            np.testing.assert_allclose(u, v, rtol=1e-13, atol=1e-13)

    def test_numerov(self):
        x = np.linspace(-6, 6, 4001)
        F = x**2 - 1.0
        a = NUMPY_KERNELS.numerov(F, x[1] - x[0], 0.0, 1e-6, 1e150)
        b = NUMBA_KERNELS.numerov(F, x[1] - x[0], 0.0, 1e-6, 1e150)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-13)
        assert a[1] == b[1]

    def test_numerov_rescaling(self):
        x = np.linspace(0, 40, 4001)
        F = x**2
        a = NUMPY_KERNELS.numerov(F, x[1] - x[0], 1.0, 1.0, 1e50)
        b = NUMBA_KERNELS.numerov(F, x[1] - x[0], 1.0, 1.0, 1e50)
        assert a[1] > 0 and a[1] == pytest.approx(b[1], rel=1e-12)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-12)

    def test_continue_sqrt(self):
        t = np.linspace(0, 2 * np.pi, 2001)
        z = 2 * np.cos(t) + 1j * np.sin(t)
        p2 = (1 - z**2).astype(complex)
        (pa, wa), (pb, wb) = NUMPY_KERNELS.continue_sqrt(p2), NUMBA_KERNELS.continue_sqrt(p2)
        np.testing.assert_allclose(pa, pb, rtol=1e-14)
        assert wa == pytest.approx(wb)
        np.testing.assert_allclose(pa**2, p2, rtol=1e-12, atol=1e-12)


def test_continued_root_is_smooth():
    t = np.linspace(0, 2 * np.pi, 2001)
    z = 2 * np.cos(t) + 1j * np.sin(t)
    p, worst = _kernels.continue_sqrt(1 - z**2)
    assert worst < 0.05
    assert np.abs(np.diff(p)).max() < 0.05


def _active_backend(flag):
    env = dict(os.environ)
    env.pop("AWKB_DISABLE_NUMBA", None)
    if flag is not None:
        env["AWKB_DISABLE_NUMBA"] = flag
    code = "from awkb import _kernels; print(_kernels.active.name)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


@pytest.mark.parametrize("flag, expected", [("1", "numpy"), ("true", "numpy"), ("0", "numba"), (None, "numba")])
def test_environment_flag_selects_backend(flag, expected):
    if NUMBA_KERNELS is None and expected == "numba":
        expected = "numpy"
    assert _active_backend(flag) == expected
