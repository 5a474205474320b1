"""Exact and brute-force reference solutions, normalization and error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from . import _kernels
from .errors import BracketError, DegenerateError, DomainError
from .potential import ProblemSetup, evaluate_potential
from .wkb import WaveTable


@dataclass(frozen=True)
class ErrorMetrics:
    window: tuple
    l2: float
    sup: float
    sup_location: float
    policy: str = "as given"

    def __post_init__(self):
        if self.l2 < 0 or self.sup < 0:
            raise ValueError("distances must be non-negative")
        lo, hi = self.window
        if not lo <= self.sup_location <= hi:
            raise ValueError("sup location outside the window")


# ---------------------------------------------------------------------------
# analytic oracles


def ho_exact_eigenstate(n: int, mass=1.0, omega=1.0, hbar=1.0, grid=None) -> WaveTable:
    """Normalized oscillator eigenfunction via the Hermite-function recurrence."""
    if int(n) != n or n < 0:
        raise ValueError("n must be a non-negative integer")
    x = np.asarray(grid, dtype=float)
    alpha = math.sqrt(mass * omega / hbar)
    xi = alpha * x
    prev = np.zeros_like(xi)
    cur = (alpha**2 / math.pi) ** 0.25 * np.exp(-0.5 * xi**2)
    for k in range(int(n)):
        prev, cur = cur, math.sqrt(2.0 / (k + 1)) * xi * cur - math.sqrt(k / (k + 1)) * prev
    md = {"n": int(n), "energy": hbar * omega * (n + 0.5)}
    return WaveTable(x, cur.astype(complex), "exact", md)


def riccati_bessel_regular(l: int, x):
    """Regular Riccati-Bessel function ``x j_l(x)``.

    Upward recurrence from ``sin x`` and ``sin x / x - cos x`` where
    ``x >= l``; Miller's downward recurrence otherwise, normalized against
    whichever of the two closed forms is larger in magnitude.
    """
    if int(l) != l or l < 0:
        raise ValueError("l must be a non-negative integer")
    l = int(l)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("riccati_bessel_regular needs x > 0")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    s0 = np.sin(x)
    s1 = s0 / x - np.cos(x)
    if l == 0:
        out = s0
    elif l == 1:
        out = s1
    else:
        out = np.empty_like(x)
        up = x >= l
        if np.any(up):
            xu = x[up]
            a, b = s0[up], s1[up]
            for k in range(1, l):
                a, b = b, (2 * k + 1) / xu * b - a
            out[up] = b
        down = ~up
        if np.any(down):
            xd = x[down]
            top = l + int(math.sqrt(40.0 * (l + 1))) + 20
            nxt = np.zeros_like(xd)
            cur = np.full_like(xd, 1e-300)
            keep = None
            keep0 = keep1 = None
            for k in range(top, 0, -1):
                # S_{k-1} = (2k+1)/x S_k - S_{k+1}
                prev = (2 * k + 1) / xd * cur - nxt
                nxt, cur = cur, prev
                big = np.abs(cur) > 1e250
                if np.any(big):
                    scale = np.where(big, 1e-250, 1.0)
                    cur, nxt = cur * scale, nxt * scale
                    if keep is not None:
                        keep = keep * scale
                    if keep1 is not None:
                        keep1 = keep1 * scale
                if k - 1 == l:
                    keep = cur.copy()
                if k - 1 == 1:
                    keep1 = cur.copy()
            keep0 = cur
            use0 = np.abs(s0[down]) >= np.abs(s1[down])
            norm = np.where(use0, s0[down] / keep0, s1[down] / keep1)
            out[down] = keep * norm
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# Numerov


def numerov_solve(s: ProblemSetup, grid, u0, u1, direction="outward") -> WaveTable:
    """Numerov recursion for ``u'' = (2m/hbar^2)(V - E) u`` on a uniform grid.

    ``u0``, ``u1`` seed the first two points in the direction of travel
    (the last two grid points for ``direction="inward"``).  Large values are
    rescaled on the fly; the accumulated log factor is kept in metadata.
    """
    x = np.asarray(grid, dtype=float)
    if x.size < 3:
        raise ValueError("Numerov needs at least three grid points")
    h = np.diff(x)
    if np.any(h <= 0) or np.ptp(h) > 1e-9 * h.mean():
        raise ValueError("Numerov needs a uniform, increasing grid")
    if not (np.isfinite(u0) and np.isfinite(u1)):
        raise ValueError("seed values must be finite")
    F = 2.0 * s.mass / s.hbar**2 * (evaluate_potential(s.potential, x, s.hbar) - s.energy)
    if direction == "outward":
        u, log_scale = _kernels.numerov(F, h.mean(), u0, u1)
    elif direction == "inward":
        u, log_scale = _kernels.numerov(F[::-1], h.mean(), u0, u1)
        u = u[::-1]
    else:
        raise ValueError("direction must be 'outward' or 'inward'")
    md = {"direction": direction, "log_scale": float(log_scale), "rescaled": bool(log_scale != 0.0)}
    return WaveTable(x, u.astype(complex), "numerov", md)


def numerov_eigenvalue(s: ProblemSetup, bracket, count=16001, tol=1e-12):
    """Eigenvalue inside ``bracket`` by shooting across the setup's domain.

    The solution started at ``x_lo`` with a vanishing value is traced to
    ``x_hi``; its normalized end value changes sign at each eigenvalue.
    """
    x = np.linspace(*s.domain, count)
    h = x[1] - x[0]

    def end_value(E):
        u = numerov_solve(s.with_energy(E), x, 0.0, h).psi.real
        return u[-1] / np.max(np.abs(u))

    lo, hi = bracket
    flo, fhi = end_value(lo), end_value(hi)
    if np.sign(flo) == np.sign(fhi):
        raise BracketError("shooting function has no sign change in the bracket")
    return brentq(end_value, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


# ---------------------------------------------------------------------------
# normalization and comparison


def _segment_integral(x, y, segments):
    total = 0.0
    for seg in np.unique(segments):
        m = segments == seg
        if m.sum() >= 2:
            total += simpson(y[m], x=x[m])
    return total


def _window_mask(table, window):
    if window is None:
        return np.ones(table.x.size, dtype=bool)
    lo, hi = window
    return (table.x >= lo) & (table.x <= hi)


def _interp_local_cubic(src: WaveTable, x):
    """Four-point Lagrange interpolation inside the segments of ``src``.

    Points outside every segment come back as NaN.
    """
    out = np.full(x.shape, np.nan, dtype=complex)
    for seg in np.unique(src.segments):
        m = src.segments == seg
        xs, ys = src.x[m], src.psi[m]
        inside = (x >= xs[0]) & (x <= xs[-1])
        if not np.any(inside) or xs.size < 2:
            continue
        xt = x[inside]
        if xs.size < 4:
            out[inside] = np.interp(xt, xs, ys.real) + 1j * np.interp(xt, xs, ys.imag)
            continue
        i = np.clip(np.searchsorted(xs, xt) - 2, 0, xs.size - 4)
        idx = i[:, None] + np.arange(4)
        xn, yn = xs[idx], ys[idx]
        val = np.zeros(xt.size, dtype=complex)
        for j in range(4):
            lj = np.ones(xt.size)
            for k in range(4):
                if k != j:
                    lj *= (xt - xn[:, k]) / (xn[:, j] - xn[:, k])
            val += lj * yn[:, j]
        out[inside] = val
    return out


def normalize(w: WaveTable, policy="unit-L2", window=None, reference: WaveTable | None = None) -> WaveTable:
    """Scaled copy of ``w``.

    ``"unit-L2"`` makes the integral of ``|psi|^2`` over the window (summed
    over segments) equal to one.  ``"amplitude-match"`` applies the
    least-squares factor that best maps ``w`` onto ``reference`` over the
    window.
    """
    m = _window_mask(w, window)
    if m.sum() < 2:
        raise DomainError("normalization window holds fewer than two samples")
    x, psi, seg = w.x[m], w.psi[m], w.segments[m]
    if policy == "unit-L2":
        norm = _segment_integral(x, np.abs(psi) ** 2, seg)
        if not norm > 0:
            raise DegenerateError("cannot normalize a function with zero norm")
        factor = 1.0 / math.sqrt(norm)
    elif policy == "amplitude-match":
        if reference is None:
            raise ValueError("amplitude-match needs a reference table")
        ref = _interp_local_cubic(reference, x)
        ok = np.isfinite(ref)
        den = _segment_integral(x[ok], np.abs(psi[ok]) ** 2, seg[ok])
        if not den > 0:
            raise DegenerateError("cannot match a function with zero norm")
        num = _segment_integral(x[ok], np.conj(psi[ok]) * ref[ok], seg[ok])
        factor = num / den
        if abs(np.imag(factor)) <= 1e-12 * abs(factor):
            factor = float(np.real(factor))
    else:
        raise ValueError(f"unknown normalization policy {policy!r}")
    win = None if window is None else [float(window[0]), float(window[1])]
    return w.scaled(factor, normalization={"policy": policy, "window": win, "factor": factor})


def compare(wa: WaveTable, wb: WaveTable, window) -> ErrorMetrics:
    """L2 and sup distances over ``window``.

    The table with more samples in the window sets the abscissae; the other
    is interpolated onto them.
    """
    lo, hi = window
    ma, mb = _window_mask(wa, window), _window_mask(wb, window)
    if not ma.any() or not mb.any():
        raise DomainError("window does not overlap both tables")
    base, other = (wa, wb) if ma.sum() >= mb.sum() else (wb, wa)
    m = _window_mask(base, window)
    x, seg = base.x[m], base.segments[m]
    if np.array_equal(base.x, other.x):
        yo = other.psi[m]
    else:
        yo = _interp_local_cubic(other, x)
    ok = np.isfinite(yo)
    if ok.sum() < 2:
        raise DomainError("tables share fewer than two abscissae in the window")
    diff = np.abs(base.psi[m][ok] - yo[ok])
    l2 = math.sqrt(max(_segment_integral(x[ok], diff**2, seg[ok]), 0.0))
    i = int(np.argmax(diff))
    pol_a = wa.metadata.get("normalization", {}).get("policy", "as given")
    pol_b = wb.metadata.get("normalization", {}).get("policy", "as given")
    policy = pol_a if pol_a == pol_b else f"{pol_a}/{pol_b}"
    return ErrorMetrics((float(lo), float(hi)), l2, float(diff[i]), float(x[ok][i]), policy)
