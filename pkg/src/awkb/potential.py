"""Potential models, classical momentum and turning points."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, ConvergenceError, DomainError

ROOT_TOL = 1e-12


@dataclass(frozen=True)
class Harmonic:
    mass: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        if not (self.mass > 0 and self.omega > 0):
            raise DomainError("harmonic model needs mass > 0 and omega > 0")


@dataclass(frozen=True)
class Centrifugal:
    """Repulsive ``l(l+1) hbar^2 / (2 m r^2)`` barrier on ``r > 0``.

    With ``langer_modified`` the factor ``l(l+1)`` is replaced by
    ``(l + 1/2)^2``.
    """

    l: int = 1
    mass: float = 1.0
    langer_modified: bool = False

    def __post_init__(self):
        if isinstance(self.l, bool) or int(self.l) != self.l or self.l < 0:
            raise DomainError("angular momentum l must be a non-negative integer")
        if not self.mass > 0:
            raise DomainError("centrifugal model needs mass > 0")
        object.__setattr__(self, "l", int(self.l))

    def strength(self, hbar):
        factor = (self.l + 0.5) ** 2 if self.langer_modified else self.l * (self.l + 1)
        return factor * hbar**2 / (2.0 * self.mass)


@dataclass(frozen=True)
class CustomPolynomial:
    """``V(x) = sum_i c_i x**i``; derivatives use central differences."""

    coefficients: tuple = (0.0,)
    mass: float = 1.0

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs or not all(np.isfinite(coeffs)):
            raise DomainError("polynomial needs a non-empty list of finite coefficients")
        if not self.mass > 0:
            raise DomainError("polynomial model needs mass > 0")
        object.__setattr__(self, "coefficients", coeffs)


PotentialModel = Union[Harmonic, Centrifugal, CustomPolynomial]


@dataclass(frozen=True)
class ProblemSetup:
    potential: PotentialModel
    energy: float
    hbar: float = 1.0
    domain: tuple = (-10.0, 10.0)

    def __post_init__(self):
        lo, hi = (float(v) for v in self.domain)
        object.__setattr__(self, "domain", (lo, hi))
        if not np.isfinite(self.energy):
            raise DomainError("energy must be finite")
        if not self.hbar > 0:
            raise DomainError("hbar must be positive")
        if not lo < hi:
            raise DomainError("domain needs x_lo < x_hi")
        if isinstance(self.potential, Centrifugal) and lo <= 0:
            raise DomainError("centrifugal domain must exclude r <= 0")

    @property
    def mass(self):
        return self.potential.mass

    def with_energy(self, energy):
        return replace(self, energy=float(energy))


@dataclass(frozen=True)
class TurningPointSet:
    roots: tuple
    brackets: tuple = field(default=())
    residuals: tuple = field(default=())

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)

    def __getitem__(self, i):
        return self.roots[i]


def _check_radial(x):
    arr = np.asarray(x)
    if not np.iscomplexobj(arr) and np.any(arr <= 0):
        raise DomainError("centrifugal potential is defined only for r > 0")


def evaluate_potential(p: PotentialModel, x, hbar=1.0):
    """Potential energy at ``x`` (scalar or array, real or complex)."""
    if isinstance(p, Harmonic):
        return 0.5 * p.mass * p.omega**2 * np.square(x)
    if isinstance(p, Centrifugal):
        _check_radial(x)
        return p.strength(hbar) / np.square(x)
    if isinstance(p, CustomPolynomial):
        # Horner, highest power first
        x = np.asarray(x)
        out = np.zeros_like(x, dtype=np.result_type(x, float))
        for c in reversed(p.coefficients):
            out = out * x + c
        return out if out.ndim else out[()]
    raise TypeError(f"unknown potential model {p!r}")


def _fd_step(x):
    return 1e-6 * np.maximum(1.0, np.abs(x))


def potential_derivative(p: PotentialModel, x, hbar=1.0, order=1):
    """First or second derivative of the potential.

    Built-in models are differentiated analytically; polynomials go through
    central differences so the generic path stays exercised.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if isinstance(p, Harmonic):
        k = p.mass * p.omega**2
        return k * np.asarray(x) if order == 1 else k * np.ones_like(np.asarray(x, dtype=float))
    if isinstance(p, Centrifugal):
        _check_radial(x)
        c = p.strength(hbar)
        return -2.0 * c / np.power(x, 3) if order == 1 else 6.0 * c / np.power(x, 4)
    if isinstance(p, CustomPolynomial):
        x = np.asarray(x)
        if order == 1:
            h = _fd_step(x)
            return (evaluate_potential(p, x + h) - evaluate_potential(p, x - h)) / (2 * h)
        h = 1e2 * _fd_step(x)
        return (
            evaluate_potential(p, x + h) - 2 * evaluate_potential(p, x) + evaluate_potential(p, x - h)
        ) / h**2
    raise TypeError(f"unknown potential model {p!r}")


def _branch_sqrt(q):
    """sqrt with +i|.|^(1/2) on the negative real axis."""
    q = np.asarray(q)
    if np.iscomplexobj(q):
        return np.sqrt(q)
    out = np.where(q >= 0, np.sqrt(np.abs(q)) + 0j, 1j * np.sqrt(np.abs(q)))
    return out if out.ndim else out[()]


def momentum_squared(s: ProblemSetup, x):
    return 2.0 * s.mass * (s.energy - evaluate_potential(s.potential, x, s.hbar))


def classical_momentum(s: ProblemSetup, x):
    """``sqrt(2m(E - V))``; ``+i sqrt(2m(V - E))`` in forbidden regions."""
    return _branch_sqrt(momentum_squared(s, x))


def momentum_derivative(s: ProblemSetup, x, p=None):
    """dp/dx = -m V'(x) / p."""
    if p is None:
        p = classical_momentum(s, x)
    return -s.mass * potential_derivative(s.potential, x, s.hbar) / p


def reflection_coupling(s: ProblemSetup, x, p=None):
    """The coupling ``p' / (2p)`` between forward and backward amplitudes."""
    if p is None:
        p = classical_momentum(s, x)
    return momentum_derivative(s, x, p) / (2.0 * p)


def effective_momentum_langer(l, s: ProblemSetup, r):
    """Langer-modified radial momentum ``sqrt(2mE - (l+1/2)^2 hbar^2 / r^2)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("effective momentum needs r > 0")
    q = 2.0 * s.mass * s.energy - (l + 0.5) ** 2 * s.hbar**2 / r**2
    return _branch_sqrt(q)


def _gap(s, x):
    return float(s.energy - evaluate_potential(s.potential, x, s.hbar))


def find_turning_points(
    s: ProblemSetup, brackets: Sequence[tuple], root_tol: float = ROOT_TOL
) -> TurningPointSet:
    """One root of ``E - V`` per bracket, sorted.

    Brent's method (bisection safeguarded secant / inverse interpolation)
    is run to full double precision; the residual is then checked against
    ``root_tol``.
    """
    found = []
    for lo, hi in brackets:
        lo, hi = sorted((float(lo), float(hi)))
        glo, ghi = _gap(s, lo), _gap(s, hi)
        if glo == 0.0:
            root = lo
        elif ghi == 0.0:
            root = hi
        else:
            if np.sign(glo) == np.sign(ghi):
                raise BracketError(f"E - V has no sign change on [{lo}, {hi}]")
            try:
                root = brentq(lambda x: _gap(s, x), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
            except RuntimeError as exc:
                raise ConvergenceError(str(exc)) from exc
        res = abs(_gap(s, root))
        if res >= root_tol:
            raise ConvergenceError(f"turning point residual {res:.3e} exceeds {root_tol:.1e}")
        found.append((root, (lo, hi), res))
    found.sort(key=lambda t: t[0])
    roots = tuple(f[0] for f in found)
    if any(b <= a for a, b in zip(roots, roots[1:])):
        raise BracketError("brackets overlap: turning points are not distinct")
    return TurningPointSet(roots, tuple(f[1] for f in found), tuple(f[2] for f in found))


def scan_turning_points(s: ProblemSetup, n_scan=4001, root_tol=ROOT_TOL) -> TurningPointSet:
    """Locate every sign change of ``E - V`` on the setup's domain."""
    lo, hi = s.domain
    xs = np.linspace(lo, hi, n_scan)
    g = s.energy - evaluate_potential(s.potential, xs, s.hbar)
    brackets = []
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        brackets.append((xs[i], xs[i + 1]))
    for i in np.nonzero(g == 0)[0]:
        if 0 < i < n_scan - 1:
            brackets.append((xs[i], xs[i]))
    return find_turning_points(s, brackets, root_tol)


def allowed_interval(s: ProblemSetup, x, turning_points=None):
    """Classically allowed interval ``(left, right)`` containing ``x``.

    Unbounded sides are returned as the domain edge with ``inf`` sign
    replaced by ``None``.
    """
    if turning_points is None:
        turning_points = scan_turning_points(s)
    if momentum_squared(s, x) <= 0:
        raise DomainError(f"x = {x} is not classically allowed")
    left = max((r for r in turning_points if r < x), default=None)
    right = min((r for r in turning_points if r > x), default=None)
    return left, right


def default_standoff(s: ProblemSetup, x, fraction=0.02, turning_points=None):
    """Default turning-point standoff for the allowed region around ``x``.

    Bounded regions use ``fraction`` of their width; a half-open region
    (scattering) uses ``fraction`` of the turning radius.
    """
    left, right = allowed_interval(s, x, turning_points)
    if left is not None and right is not None:
        return fraction * (right - left)
    tp = left if left is not None else right
    if tp is None:
        return 0.0
    return fraction * max(abs(tp), 1.0)
