"""Hot inner loops with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``AWKB_DISABLE_NUMBA`` is unset (or set to ``0``).  Both paths are
always importable as ``NUMPY_KERNELS`` / ``NUMBA_KERNELS`` so tests and the
benchmark can compare them directly.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _flag_disabled():
    value = os.environ.get("AWKB_DISABLE_NUMBA", "").strip().lower()
    return value not in ("", "0", "false", "no")


# ---------------------------------------------------------------------------
# panel cumulative quadrature


def panel_cumulative_numpy(gh, Q, wts, start):
    """Cumulative Gauss-Legendre integration over consecutive panels.

    Parameters
    ----------
    gh : ndarray, shape (M, k), complex
        Integrand samples at the panel nodes, already multiplied by the
        panel Jacobian.
    Q : ndarray, shape (k, k)
        ``Q[j, l] = integral from -1 to t_j of the l-th Lagrange basis``.
    wts : ndarray, shape (k,)
        Gauss-Legendre weights.
    start : complex
        Value of the running integral at the first panel edge.

    Returns
    -------
    node_cum : ndarray, shape (M, k)
    edge_cum : ndarray, shape (M + 1,)
    """
    totals = gh @ wts
    edge = np.empty(gh.shape[0] + 1, dtype=np.complex128)
    edge[0] = start
    np.cumsum(totals, out=edge[1:])
    edge[1:] += start
    node = edge[:-1, None] + gh @ Q.T
    return node, edge


def _panel_cumulative_loop(gh, Q, wts, start):
    M, k = gh.shape
    node = np.empty((M, k), dtype=np.complex128)
    edge = np.empty(M + 1, dtype=np.complex128)
    edge[0] = start
    acc = start
    for i in range(M):
        for j in range(k):
            s = 0.0 + 0.0j
            for l in range(k):
                s += Q[j, l] * gh[i, l]
            node[i, j] = acc + s
        tot = 0.0 + 0.0j
        for l in range(k):
            tot += wts[l] * gh[i, l]
        acc = acc + tot
        edge[i + 1] = acc
    return node, edge


# ---------------------------------------------------------------------------
# Numerov recursion


def _numerov_loop(F, h, u0, u1, big):
    n = F.shape[0]
    u = np.empty(n, dtype=np.float64)
    u[0] = u0
    u[1] = u1
    h12 = h * h / 12.0
    log_scale = 0.0
    for i in range(1, n - 1):
        c_next = 1.0 - h12 * F[i + 1]
        c_here = 2.0 * (1.0 + 5.0 * h12 * F[i])
        c_prev = 1.0 - h12 * F[i - 1]
        u[i + 1] = (c_here * u[i] - c_prev * u[i - 1]) / c_next
        a = abs(u[i + 1])
        if a > big:
            for j in range(i + 2):
                u[j] /= a
            log_scale += np.log(a)
    return u, log_scale


numerov_numpy = _numerov_loop


# ---------------------------------------------------------------------------
# square-root continuation along an ordered path


def continue_sqrt_numpy(p2):
    """Analytically continue ``sqrt(p2)`` along ordered samples.

    Returns the continued roots and the largest successive jump relative to
    the local magnitude, used to detect branch-tracking failures.
    """
    r = np.sqrt(p2.astype(np.complex128))
    flip = np.abs(r[1:] - r[:-1]) > np.abs(r[1:] + r[:-1])
    parity = np.concatenate(([0], np.cumsum(flip) % 2))
    out = np.where(parity == 1, -r, r)
    jump = np.abs(out[1:] - out[:-1])
    scale = np.maximum(np.abs(out[1:]), np.abs(out[:-1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale > 0, jump / scale, 0.0)
    return out, float(rel.max()) if rel.size else 0.0


def _continue_sqrt_loop(p2):
    n = p2.shape[0]
    out = np.empty(n, dtype=np.complex128)
    out[0] = np.sqrt(p2[0] + 0j)
    worst = 0.0
    for i in range(1, n):
        r = np.sqrt(p2[i] + 0j)
        if abs(r - out[i - 1]) > abs(r + out[i - 1]):
            r = -r
        out[i] = r
        scale = max(abs(r), abs(out[i - 1]))
        if scale > 0.0:
            rel = abs(r - out[i - 1]) / scale
            if rel > worst:
                worst = rel
    return out, worst


class _Kernels:
    def __init__(self, name, panel_cumulative, numerov, continue_sqrt):
        self.name = name
        self.panel_cumulative = panel_cumulative
        self.numerov = numerov
        self.continue_sqrt = continue_sqrt

    def __repr__(self):
        return f"<awkb kernels: {self.name}>"


NUMPY_KERNELS = _Kernels(
    "numpy", panel_cumulative_numpy, numerov_numpy, continue_sqrt_numpy
)

if numba is not None:
    NUMBA_KERNELS = _Kernels(
        "numba",
        numba.njit(cache=True)(_panel_cumulative_loop),
        numba.njit(cache=True)(_numerov_loop),
        numba.njit(cache=True)(_continue_sqrt_loop),
    )
else:  # pragma: no cover
    NUMBA_KERNELS = None

if NUMBA_KERNELS is not None and not _flag_disabled():
    active = NUMBA_KERNELS
else:
    active = NUMPY_KERNELS


def panel_cumulative(gh, Q, wts, start=0.0):
    gh = np.ascontiguousarray(gh, dtype=np.complex128)
    return active.panel_cumulative(gh, np.ascontiguousarray(Q), np.ascontiguousarray(wts), complex(start))


def numerov(F, h, u0, u1, big=1e150):
    return active.numerov(np.ascontiguousarray(F, dtype=np.float64), float(h), float(u0), float(u1), float(big))


def continue_sqrt(p2):
    out, worst = active.continue_sqrt(np.ascontiguousarray(p2, dtype=np.complex128))
    return out, float(worst)
