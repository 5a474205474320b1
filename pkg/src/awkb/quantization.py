"""Quantization condition: action, eigenenergies and contour diagnostics.

On a closed contour around both turning points the momentum
``p(z) = sqrt(2m(E - V(z)))`` is single valued once a branch is fixed.  The
branch is obtained by continuing the square root sample by sample along the
ordered quadrature nodes, starting from the path's start point, and its
overall sign is chosen so that ``oint p dz`` is positive for a
counterclockwise path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .errors import BracketError, BranchError, PathError, ToleranceError, TopologyError
from .potential import (
    ProblemSetup,
    evaluate_potential,
    potential_derivative,
    scan_turning_points,
)
from .quadrature import (
    EPS,
    ContourPath,
    QuadratureEstimate,
    ellipse,
    momentum_integral,
    path_mesh,
)

BRANCH_JUMP_TOL = 0.25
DEFAULT_CONTOUR_PANELS = 2048


@dataclass(frozen=True)
class ReflectionCorrection:
    """Contour term of the order-n reflection amplitude.

    ``value`` is the exponential (total-derivative) form; ``ratio`` the
    unapproximated ratio form, reported for n = 1; ``loop`` is the change of
    the nested integral once around the path.
    """

    order: int
    value: QuadratureEstimate
    ratio: QuadratureEstimate | None
    loop: complex


@dataclass(frozen=True)
class QuantizationReport:
    energy: float
    n: int
    action: float
    winding: QuadratureEstimate
    reflection: tuple
    residual: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = [self.energy, self.action, self.residual, self.winding.value]
        vals += [r.value.value for r in self.reflection]
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("quantization report entries must be finite")


# ---------------------------------------------------------------------------
# real-line action


def _two_turning_points(s: ProblemSetup):
    tps = scan_turning_points(s)
    if len(tps) != 2:
        raise TopologyError(f"expected two turning points, found {len(tps)}")
    return tps[0], tps[1]


def action_integral(s: ProblemSetup, E=None, tol=1e-12) -> float:
    """``oint p dx = 2 int_{xL}^{xR} p dx`` at energy ``E``."""
    if E is not None:
        s = s.with_energy(E)
    xl, xr = _two_turning_points(s)
    return 2.0 * momentum_integral(s, xl, xr, tol / 2).value.real


def quantization_function(s: ProblemSetup, E, n, tol=1e-12):
    return action_integral(s, E, tol) - 2.0 * math.pi * s.hbar * (n + 0.5)


def _auto_bracket(s: ProblemSetup, n):
    lo_x, hi_x = s.domain
    xs = np.linspace(lo_x, hi_x, 4001)
    V = evaluate_potential(s.potential, xs, s.hbar)
    i = int(np.argmin(V))
    vmin = float(V[i])
    scale = max(1.0, abs(vmin), float(np.ptp(V)) * 1e-6)
    # refine the minimum so the lowest trial energy has two turning points
    lo = vmin + 1e-9 * scale
    while True:
        try:
            f_lo = quantization_function(s, lo, n)
            break
        except TopologyError:
            lo += 1e-6 * scale
            if lo > vmin + scale:
                raise BracketError("could not find a two-turning-point energy near the well bottom")
    if f_lo > 0:
        raise BracketError("quantization function positive at the well bottom")
    step = s.hbar * max(1.0, n + 1)
    hi = lo + step
    while True:
        try:
            f_hi = quantization_function(s, hi, n)
        except TopologyError as exc:
            raise BracketError("energy search left the domain before bracketing a root") from exc
        if f_hi > 0:
            return lo, hi
        lo, hi = hi, hi + step
        step *= 2


def eigenenergy(s: ProblemSetup, n: int, bracket=None, tol=1e-12) -> float:
    """Energy with ``oint p dx = 2 pi hbar (n + 1/2)``."""
    if int(n) != n or n < 0:
        raise ValueError("n must be a non-negative integer")
    if bracket is None:
        bracket = _auto_bracket(s, n)
    lo, hi = (float(b) for b in bracket)
    try:
        f_lo, f_hi = quantization_function(s, lo, n), quantization_function(s, hi, n)
    except TopologyError as exc:
        raise BracketError(f"bracket end does not have two turning points: {exc}") from exc
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError("quantization function has no sign change in the bracket")
    return brentq(lambda E: quantization_function(s, E, n), lo, hi, xtol=tol, rtol=4 * EPS)


# ---------------------------------------------------------------------------
# contour machinery


def _momentum_squared_complex(s, z):
    return 2.0 * s.mass * (s.energy - evaluate_potential(s.potential, z, s.hbar))


def _dV_complex(s, z):
    return potential_derivative(s.potential, z, s.hbar)


def branch_momentum(s: ProblemSetup, path: ContourPath, mesh):
    """Branch-consistent ``p`` at the mesh nodes (shape of ``mesh.nodes``).

    Raises
    ------
    BranchError
        On a jump between successive samples or if the continued root does
        not return to its starting value after one circuit.
    """
    z = np.concatenate(([path.start], mesh.nodes.ravel(), [path.start]))
    p, worst = _kernels.continue_sqrt(_momentum_squared_complex(s, z))
    if worst > BRANCH_JUMP_TOL:
        raise BranchError(f"square-root branch jumps by {worst:.3g} between samples; refine the path")
    if abs(p[-1] - p[0]) > 1e-6 * max(abs(p[0]), 1.0):
        raise BranchError("momentum changes sign once around the path (odd number of turning points enclosed)")
    p_nodes = p[1:-1].reshape(mesh.nodes.shape)
    action = mesh.integral(p_nodes)
    orient = path.orientation
    if orient != 0 and action.real * orient < 0:
        p_nodes = -p_nodes
    return p_nodes


def _estimate(path, integrand, n_per_segment):
    """Apply ``integrand(mesh) -> weighted samples`` at n and 2n panels."""
    with np.errstate(over="ignore", invalid="ignore"):
        coarse = integrand(path_mesh(path, n_per_segment))
        fine = integrand(path_mesh(path, 2 * n_per_segment))
        value = complex(fine.sum())
        if not (np.all(np.isfinite(coarse)) and np.all(np.isfinite(fine))):
            raise ToleranceError("contour integrand overflowed; use a path closer to the real axis")
        bound = abs(value - complex(coarse.sum())) + EPS * fine.size * float(np.abs(fine).sum())
    return QuadratureEstimate(value, float(bound), int(coarse.size + fine.size))


def contour_action(s: ProblemSetup, path: ContourPath, n_per_segment=DEFAULT_CONTOUR_PANELS):
    def integrand(mesh):
        return mesh.weighted(branch_momentum(s, path, mesh))

    return _estimate(path, integrand, n_per_segment)


def winding_contribution(
    s: ProblemSetup, path: ContourPath, n_per_segment=DEFAULT_CONTOUR_PANELS, halve=True
) -> QuadratureEstimate:
    """``-(hbar/i) oint p'/(2p) dz`` along ``path``.

    With ``halve=False`` the integrand is ``p'/p``.
    """
    if not isinstance(path, ContourPath):
        raise PathError("winding_contribution needs a ContourPath")
    c = 0.5 if halve else 1.0

    def integrand(mesh):
        p = branch_momentum(s, path, mesh)
        dp = -s.mass * _dV_complex(s, mesh.nodes) / p
        return mesh.weighted(c * dp / p)

    est = _estimate(path, integrand, n_per_segment)
    factor = -s.hbar / 1j
    return QuadratureEstimate(factor * est.value, abs(factor) * est.error_bound, est.evaluations)


def _nested_on_path(s, path, mesh, n):
    """Nested integral ``N_n`` and its derivative at the nodes, measured from the path start."""
    p = branch_momentum(s, path, mesh)
    w = -s.mass * _dV_complex(s, mesh.nodes) / p / (2.0 * p)
    S, _ = mesh.cumulative(p / s.hbar, 0)
    u_minus = w * np.exp(-2j * S)
    u_plus = w * np.exp(2j * S)
    nm, np_ = np.ones_like(S), np.ones_like(S)
    dn = u_minus
    for k in range(n):
        dn = u_minus * np_
        nm_new, nm_edges = mesh.cumulative(dn, 0)
        np_new, _ = mesh.cumulative(u_plus * nm, 0)
        nm, np_ = nm_new, np_new
    return nm, dn, nm_edges[-1]


def reflection_correction_contour(
    s: ProblemSetup, path: ContourPath, n: int, n_per_segment=DEFAULT_CONTOUR_PANELS
) -> ReflectionCorrection:
    """Contour term of the order-n reflection amplitude.

    With ``X = exp(i pi/4) N_n`` (nested integrals along the path from its
    start point), ``value = (hbar/i) oint X' exp(-X) dz``.  For ``n = 1``
    the ratio form ``(hbar/i) oint X'/(1 + X) dz`` is reported as well.
    """
    if int(n) != n or n < 1:
        raise ValueError("order n must be a positive integer")
    if not isinstance(path, ContourPath):
        raise PathError("reflection_correction_contour needs a ContourPath")
    rot = complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    factor = s.hbar / 1j
    loop = [0j]

    def exp_form(mesh):
        X, dX, end = _nested_on_path(s, path, mesh, int(n))
        loop[0] = rot * end
        return mesh.weighted(rot * dX * np.exp(-rot * X))

    def ratio_form(mesh):
        X, dX, _ = _nested_on_path(s, path, mesh, 1)
        return mesh.weighted(rot * dX / (1.0 + rot * X))

    est = _estimate(path, exp_form, n_per_segment)
    value = QuadratureEstimate(factor * est.value, abs(factor) * est.error_bound, est.evaluations)
    ratio = None
    if n == 1:
        r = _estimate(path, ratio_form, n_per_segment)
        ratio = QuadratureEstimate(factor * r.value, abs(factor) * r.error_bound, r.evaluations)
    return ReflectionCorrection(int(n), value, ratio, complex(loop[0]))


def default_contour(s: ProblemSetup, reach=1.25, height=0.1):
    """Ellipse around the well, semi-axes ``reach`` and ``height`` times its half-width.

    A flat ellipse keeps ``exp(+-2iS)`` moderate off the real axis, where it
    grows roughly like ``exp(2 p y / hbar)``.
    """
    xl, xr = _two_turning_points(s)
    half = 0.5 * (xr - xl)
    return ellipse(reach * half, height * half, center=0.5 * (xl + xr))


def quantization_report(
    s: ProblemSetup, n: int, orders=(1,), path=None, n_per_segment=DEFAULT_CONTOUR_PANELS, bracket=None
) -> QuantizationReport:
    """Solve for the n-th level and evaluate the contour diagnostics there."""
    E = eigenenergy(s, n, bracket)
    sE = s.with_energy(E)
    action = action_integral(sE)
    if path is None:
        path = default_contour(sE)
    wind = winding_contribution(sE, path, n_per_segment)
    refl = tuple(reflection_correction_contour(sE, path, k, n_per_segment) for k in orders)
    residual = action + wind.value.real - 2.0 * math.pi * s.hbar * n
    md = {"contour_action": contour_action(sE, path, n_per_segment).value}
    return QuantizationReport(E, int(n), action, wind, refl, residual, md)
