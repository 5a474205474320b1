"""First- and second-order WKB wavefunctions and series diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RegionError
from .potential import (
    ProblemSetup,
    allowed_interval,
    classical_momentum,
    default_standoff,
    evaluate_potential,
    momentum_derivative,
    momentum_squared,
    potential_derivative,
    scan_turning_points,
)
from .quadrature import DEFAULT_PHASE_TOL, check_standoff, phase_profile, refined_cumulative

METHODS = ("wkb1", "wkb2", "awkb", "exact", "numerov")


@dataclass(frozen=True)
class WaveTable:
    """Sampled wavefunction.

    ``segments`` labels contiguous pieces of a composite grid (allowed and
    forbidden pieces separated by turning-point gaps); integrals never span
    two segments.  ``regions`` optionally tags each sample as ``"allowed"``
    or ``"forbidden"``.
    """

    x: np.ndarray
    psi: np.ndarray
    method: str
    metadata: dict = field(default_factory=dict)
    regions: tuple | None = None
    segments: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        psi = np.asarray(self.psi, dtype=complex)
        if x.ndim != 1 or x.shape != psi.shape:
            raise ValueError("x and psi must be 1-D arrays of equal length")
        if x.size > 1 and np.any(np.diff(x) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(psi)):
            raise ValueError("wavefunction samples must be finite")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        seg = np.zeros(x.size, dtype=int) if self.segments is None else np.asarray(self.segments, dtype=int)
        if seg.shape != x.shape:
            raise ValueError("segments must match the grid")
        if self.regions is not None and len(self.regions) != x.size:
            raise ValueError("regions must match the grid")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "segments", seg)
        object.__setattr__(self, "metadata", dict(self.metadata))

    def scaled(self, factor, **meta):
        md = dict(self.metadata)
        md.update(meta)
        return WaveTable(self.x, self.psi * factor, self.method, md, self.regions, self.segments)


def concatenate_tables(tables, method=None, metadata=None):
    """Join tables covering disjoint, increasing pieces into one composite."""
    tables = sorted(tables, key=lambda t: t.x[0])
    xs, ps, regs, segs = [], [], [], []
    offset = 0
    for t in tables:
        xs.append(t.x)
        ps.append(t.psi)
        regs.extend(t.regions if t.regions is not None else ["allowed"] * t.x.size)
        segs.append(t.segments - t.segments.min() + offset)
        offset = segs[-1].max() + 1
    md = dict(metadata or {})
    return WaveTable(
        np.concatenate(xs), np.concatenate(ps), method or tables[0].method, md, tuple(regs), np.concatenate(segs)
    )


@dataclass(frozen=True)
class SeriesTerms:
    """WKB series terms on a grid.

    ``S0`` is the signed action measured from the turning point (so
    ``S0' = p``), ``S1 = -ln(p)/2`` and ``S2`` solves the second-order
    hierarchy relation with ``S2(x_mid) = 0``.
    """

    x: np.ndarray
    S0: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    x0: float
    x_mid: float


@dataclass(frozen=True)
class AsymptoticityReport:
    x: np.ndarray
    flags: np.ndarray  # (N, 3) booleans
    ratio: float

    @property
    def all_ordered(self):
        return self.flags.all(axis=1)


# ---------------------------------------------------------------------------
# helpers


def _side_of(grid, x0):
    if np.all(grid < x0):
        return 1  # turning point to the right
    if np.all(grid > x0):
        return -1
    raise RegionError("grid straddles the turning point")


def _allowed_grid(s, grid, x0, delta):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a non-empty, strictly increasing 1-D array")
    sigma = _side_of(grid, x0)
    check_standoff(s, grid, delta)
    return grid, sigma


def turning_phase(s: ProblemSetup, grid, x0, tol=DEFAULT_PHASE_TOL):
    """``theta(x) = (1/hbar)|int_x^x0 p|`` on an allowed grid."""
    vals, _ = phase_profile(s, grid, x0, tol)
    return np.abs(vals)


def region_midpoint(s: ProblemSetup, x0, side):
    """Midpoint of the allowed region bounded by ``x0`` on one side.

    ``side`` is +1 when the region lies to the left of ``x0``.  A half-open
    region has no midpoint and yields ``None``.
    """
    probe = x0 - side * 1e-6 * max(1.0, abs(x0))
    left, right = allowed_interval(s, probe)
    if left is None or right is None:
        return None
    return 0.5 * (left + right)


# ---------------------------------------------------------------------------
# first order


def wkb1_allowed(s: ProblemSetup, grid, x0, D=1.0, delta=None, tol=DEFAULT_PHASE_TOL) -> WaveTable:
    """``(2D/sqrt(p)) cos(theta - pi/4)`` with the phase measured toward ``x0``."""
    grid, sigma = _allowed_grid(s, grid, x0, delta)
    p = classical_momentum(s, grid).real
    theta = turning_phase(s, grid, x0, tol)
    psi = 2.0 * D * np.cos(theta - 0.25 * math.pi) / np.sqrt(p)
    md = {"turning_point": float(x0), "D": D, "phase_convention": "toward turning point"}
    return WaveTable(grid, psi.astype(complex), "wkb1", md, ("allowed",) * grid.size)


def wkb1_forbidden(s: ProblemSetup, grid, x0, D=1.0, tol=DEFAULT_PHASE_TOL) -> WaveTable:
    """``(D/sqrt|p|) exp(-(1/hbar)|int_x0^x |p||)`` beyond the turning point."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a non-empty, strictly increasing 1-D array")
    _side_of(grid, x0)
    if np.any(momentum_squared(s, grid) >= 0):
        raise RegionError("forbidden-region grid reaches into the allowed region")
    kappa, _ = phase_profile(s, grid, x0, tol, forbidden=True)
    q = np.abs(classical_momentum(s, grid))
    psi = D / np.sqrt(q) * np.exp(-np.abs(kappa))
    md = {"turning_point": float(x0), "D": D}
    return WaveTable(grid, psi.astype(complex), "wkb1", md, ("forbidden",) * grid.size)


# ---------------------------------------------------------------------------
# second-order series


def second_order_density(s: ProblemSetup, x):
    """``(S1'' + S1'^2) / (2p)``, the derivative of ``-S2``."""
    p = classical_momentum(s, x).real
    dp = momentum_derivative(s, x, p).real
    d2p = -(s.mass * potential_derivative(s.potential, x, s.hbar, order=2) + dp**2) / p
    return (-d2p / (2 * p) + 0.75 * dp**2 / p**2) / (2 * p)


def _running_integral(fun, grid, x_anchor, tol, rtol=0.0):
    pts = np.union1d(grid, [x_anchor])
    anchor = int(np.searchsorted(pts, x_anchor))
    where = np.searchsorted(pts, grid)

    def evaluate(mesh, anchor_edge):
        return mesh.cumulative(fun(mesh.nodes), anchor_edge)[1]

    vals, errs, _ = refined_cumulative(pts, anchor, evaluate, tol, rtol=rtol)
    return vals[0].real[where], float(errs.sum())


def wkb_series(s: ProblemSetup, grid, x0, x_mid=None, tol=1e-10) -> SeriesTerms:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a non-empty, strictly increasing 1-D array")
    sigma = _side_of(grid, x0)
    if np.any(momentum_squared(s, grid) <= 0):
        raise RegionError("series terms need a strictly allowed grid")
    if x_mid is None:
        x_mid = region_midpoint(s, x0, sigma)
        if x_mid is None:
            x_mid = float(grid[0] if sigma == 1 else grid[-1])
    p = classical_momentum(s, grid).real
    phase, _ = phase_profile(s, grid, x0)
    S0 = s.hbar * phase
    S1 = -0.5 * np.log(p)
    # S2 grows without bound near the turning point, so its target is mixed
    T2, _ = _running_integral(lambda z: second_order_density(s, z), grid, float(x_mid), tol, rtol=1e-11)
    return SeriesTerms(grid, S0, S1, -T2, float(x0), float(x_mid))


def asymptoticity_report(terms: SeriesTerms, hbar: float, ratio: float = 3.0) -> AsymptoticityReport:
    """Per-point ordering flags for the WKB series.

    Columns: ``|S0|/hbar >> |S1|``, ``|S1| >> hbar|S2|`` and
    ``hbar|S2| << 1``, where ``a >> b`` means ``a >= ratio * b``.
    """
    if not ratio > 1:
        raise ValueError("ratio must exceed 1")
    s0 = np.abs(terms.S0) / hbar
    s1 = np.abs(terms.S1)
    s2 = hbar * np.abs(terms.S2)
    flags = np.column_stack([s0 >= ratio * s1, s1 >= ratio * s2, ratio * s2 <= 1.0])
    return AsymptoticityReport(terms.x, flags, ratio)


def series_crossing(terms: SeriesTerms, hbar: float):
    """First abscissa where ``hbar|S2|`` overtakes ``|S1|``, or ``None``.

    Located by linear interpolation of the sampled difference.  A point
    where both terms vanish (their common reference point) does not count.
    """
    d = hbar * np.abs(terms.S2) - np.abs(terms.S1)
    idx = np.nonzero((d[:-1] < 0) & (d[1:] >= 0))[0]
    if idx.size == 0:
        return None
    i = idx[0]
    t = -d[i] / (d[i + 1] - d[i])
    return float(terms.x[i] + t * (terms.x[i + 1] - terms.x[i]))


def wkb2_wavefunction(s: ProblemSetup, grid, x0, D=1.0, x_mid=None, delta=None) -> WaveTable:
    """Second-order WKB wavefunction with first-order connection phases.

    The forward branch carries the phase ``S + hbar*T2`` with ``T2 = -S2``;
    rewritten toward the turning point this is ``theta + sigma*hbar*S2``
    with ``sigma = +1`` for a turning point on the right.
    """
    grid, sigma = _allowed_grid(s, grid, x0, delta)
    terms = wkb_series(s, grid, x0, x_mid)
    p = classical_momentum(s, grid).real
    theta = np.abs(terms.S0) / s.hbar
    psi = 2.0 * D * np.cos(theta + sigma * s.hbar * terms.S2 - 0.25 * math.pi) / np.sqrt(p)
    md = {
        "turning_point": float(x0),
        "D": D,
        "x_mid": terms.x_mid,
        "connection": "first-order pi/4 phases reused",
    }
    return WaveTable(grid, psi.astype(complex), "wkb2", md, ("allowed",) * grid.size)


def schrodinger_residual(s: ProblemSetup, table: WaveTable):
    """``-(hbar^2/2m) psi'' + (V - E) psi`` at interior points of each segment.

    Three-point second differences on the (possibly non-uniform) grid.
    Returns ``(x_interior, residual)``.
    """
    xs, rs = [], []
    for seg in np.unique(table.segments):
        m = table.segments == seg
        x, y = table.x[m], table.psi[m]
        if x.size < 3:
            continue
        h0, h1 = x[1:-1] - x[:-2], x[2:] - x[1:-1]
        d2 = 2 * (h0 * y[2:] - (h0 + h1) * y[1:-1] + h1 * y[:-2]) / (h0 * h1 * (h0 + h1))
        xi = x[1:-1]
        V = evaluate_potential(s.potential, xi, s.hbar)
        xs.append(xi)
        rs.append(-(s.hbar**2) / (2 * s.mass) * d2 + (V - s.energy) * y[1:-1])
    if not xs:
        return np.empty(0), np.empty(0, dtype=complex)
    return np.concatenate(xs), np.concatenate(rs)


def standoff_grid(s: ProblemSetup, x0, start, count, fraction=0.02, turning_points=None):
    """Uniform allowed grid from ``start`` up to the standoff before ``x0``."""
    if turning_points is None:
        turning_points = scan_turning_points(s)
    delta = default_standoff(s, start, fraction, turning_points)
    end = x0 - delta if x0 > start else x0 + delta
    lo, hi = sorted((start, end))
    return np.linspace(lo, hi, count), delta
