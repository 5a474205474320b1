"""Time the numba kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each kernel
is first called once per backend so compilation is excluded, then timed
with ``timeit``; the outputs of both backends are compared as well.
"""

import argparse
import timeit

import numpy as np

from awkb._kernels import NUMBA_KERNELS, NUMPY_KERNELS
from awkb.quadrature import gauss_rule


def _cases(rng):
    _, wts, Q = gauss_rule(16)
    gh = rng.standard_normal((4096, 16)) + 1j * rng.standard_normal((4096, 16))
    x = np.linspace(-6.0, 6.0, 200001)
    F = x**2 - 1.0
    theta = np.linspace(0.0, 2 * np.pi, 100001)
    z = 1.2 * np.cos(theta) + 0.1j * np.sin(theta)
    p2 = 1.0 - z**2
    return {
        "panel_cumulative (4096 panels x 16)": ("panel_cumulative", (gh, Q, wts, 0j)),
        "numerov (200001 points)": ("numerov", (F, x[1] - x[0], 0.0, 1e-6, 1e150)),
        "continue_sqrt (100001 samples)": ("continue_sqrt", (p2.astype(np.complex128),)),
    }


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(u, v) for u, v in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    scale = max(1.0, float(np.abs(a).max()))
    return float(np.abs(a - b).max()) / scale


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if NUMBA_KERNELS is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>9s} {'max rel diff':>13s}")
    for label, (name, call_args) in _cases(rng).items():
        f_np = getattr(NUMPY_KERNELS, name)
        f_nb = getattr(NUMBA_KERNELS, name)
        diff = _max_diff(f_np(*call_args), f_nb(*call_args))  # also warms the JIT
        t_np = min(timeit.repeat(lambda: f_np(*call_args), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*call_args), number=1, repeat=args.repeat))
        print(f"{label:40s} {1e3 * t_np:12.3f} {1e3 * t_nb:12.3f} {t_np / t_nb:9.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
