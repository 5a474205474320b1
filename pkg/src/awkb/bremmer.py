"""Coupled forward/backward amplitudes and the nested reflection series.

Wavefunctions are written as ``psi = a exp(i phi) + b exp(-i phi)`` with
``phi' = +-p/hbar`` and the gauge ``a' exp(i phi) + b' exp(-i phi) = 0``.
With ``w = p'/(2p)`` the amplitudes obey

    a' = -w a + eps w b exp(-2 i phi)
    b' = -w b + eps w a exp(+2 i phi)

and the rescaled pair ``A = sqrt(p) a``, ``B = sqrt(p) b`` obeys
``A' = eps w exp(-2 i phi) B`` and ``B' = eps w exp(2 i phi) A``.

Bound-state amplitudes use the phase ``theta`` measured toward the turning
point, starting from ``A = exp(-i pi/4)``, ``B = exp(i pi/4)`` at the
reference point; scattering amplitudes take the same values at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import RegionError, SingularityError
from .potential import (
    ProblemSetup,
    classical_momentum,
    momentum_squared,
    reflection_coupling,
    scan_turning_points,
)
from .quadrature import (
    DEFAULT_REFLECTION_TOL,
    check_standoff,
    cumulative_reflection_integral,
    oscillatory_tail,
    phase_integral,
    refined_cumulative,
    _phase_step,
)
from .wkb import WaveTable, concatenate_tables, region_midpoint, wkb1_forbidden

E_MINUS = complex(math.cos(math.pi / 4), -math.sin(math.pi / 4))
E_PLUS = E_MINUS.conjugate()
DEFAULT_ODE_TOL = 1e-11


@dataclass(frozen=True)
class AmplitudePair:
    """Forward/backward amplitude samples.

    ``phase`` holds ``phi`` at each abscissa and ``phase_sign`` is the sign
    of ``phi'`` relative to ``p/hbar``.
    """

    x: np.ndarray
    a: np.ndarray
    b: np.ndarray
    phase: np.ndarray
    phase_sign: int
    order: str
    x_ref: float
    geometry: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.geometry not in ("bound", "scattering"):
            raise ValueError("geometry must be 'bound' or 'scattering'")
        if self.phase_sign not in (-1, 1):
            raise ValueError("phase_sign must be +1 or -1")

    def psi(self):
        e = np.exp(1j * self.phase)
        return self.a * e + self.b / e

    def psi_gauge_derivative(self, s: ProblemSetup):
        """``psi'`` implied by the gauge condition."""
        p = classical_momentum(s, self.x).real
        e = np.exp(1j * self.phase)
        return 1j * self.phase_sign * p / s.hbar * (self.a * e - self.b / e)

    def scaled_amplitudes(self, s: ProblemSetup):
        """``(sqrt(p) a, sqrt(p) b)``."""
        r = np.sqrt(classical_momentum(s, self.x).real)
        return r * self.a, r * self.b


@dataclass(frozen=True)
class BremmerExpansion:
    """Nested reflection integrals and partial sums on one grid.

    ``layers[k-1]`` is the k-fold nested integral whose outermost factor is
    ``w exp(-2 i theta)`` with exponent signs alternating inward.
    ``partial_sums[n-1]`` is the order-n rescaled forward amplitude.
    """

    x: np.ndarray
    layers: np.ndarray
    partial_sums: np.ndarray
    theta: np.ndarray
    x_ref: float
    error_bound: float
    metadata: dict = field(default_factory=dict)

    @property
    def order(self):
        return self.layers.shape[0]


# ---------------------------------------------------------------------------
# direct ODE


def _momentum_or_raise(s, x):
    q = momentum_squared(s, x)
    if np.any(q <= 0):
        raise SingularityError(f"momentum vanishes or is imaginary at x = {x}")
    return np.sqrt(q)


def coupled_rhs(s: ProblemSetup, x, a, b, x_ref, eps=1.0, phase=None):
    """Right-hand side ``(a', b')`` of the coupled amplitude system.

    ``phase`` defaults to the phase ``(1/hbar) int_{x_ref}^x p``.
    """
    p = float(_momentum_or_raise(s, float(x)))
    if phase is None:
        phase = phase_integral(s, x_ref, x).value.real
    w = float(reflection_coupling(s, float(x), p))
    e = np.exp(-2j * phase)
    return -w * a + eps * w * b * e, -w * b + eps * w * a / e


def solve_coupled_ode(
    s: ProblemSetup,
    x_ref,
    x_end,
    a_init,
    b_init,
    tol=DEFAULT_ODE_TOL,
    eps=1.0,
    t_eval=None,
    phase0=0.0,
    phase_sign=1,
    geometry="bound",
) -> AmplitudePair:
    """Integrate the coupled system from ``x_ref`` to ``x_end`` (DOP853).

    The phase is carried as a fifth real state, ``phi' = phase_sign p/hbar``
    with ``phi(x_ref) = phase0``.
    """
    x_ref, x_end = float(x_ref), float(x_end)
    lo, hi = sorted((x_ref, x_end))
    xs = np.linspace(lo, hi, 257)
    if np.any(momentum_squared(s, xs) <= 0):
        raise RegionError("ODE interval leaves the classically allowed region")

    def rhs(x, y):
        p = _momentum_or_raise(s, x)
        w = reflection_coupling(s, x, p)
        a = y[0] + 1j * y[1]
        b = y[2] + 1j * y[3]
        e = np.exp(-2j * y[4])
        da = -w * a + eps * w * b * e
        db = -w * b + eps * w * a * np.conj(e)
        return [da.real, da.imag, db.real, db.imag, phase_sign * p / s.hbar]

    y0 = [a_init.real, a_init.imag, b_init.real, b_init.imag, phase0]
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if x_end < x_ref:
            t_eval = t_eval[::-1]
    sol = solve_ivp(
        rhs, (x_ref, x_end), y0, method="DOP853", rtol=tol, atol=tol * 1e-2, t_eval=t_eval
    )
    if sol.status != 0:
        raise SingularityError(f"ODE integration failed: {sol.message}")
    order = np.argsort(sol.t)
    y = sol.y[:, order]
    return AmplitudePair(
        sol.t[order],
        y[0] + 1j * y[1],
        y[2] + 1j * y[3],
        y[4],
        int(phase_sign),
        "ode-exact",
        x_ref,
        geometry,
        {"eps": eps, "tol": tol, "nfev": int(sol.nfev)},
    )


def gauge_residual(s: ProblemSetup, pair: AmplitudePair):
    """Max relative mismatch between ``psi'`` by finite differences and the gauge form."""
    psi = pair.psi()
    d_fd = np.gradient(psi, pair.x, edge_order=2)
    d_g = pair.psi_gauge_derivative(s)
    scale = np.max(np.abs(d_g))
    return float(np.max(np.abs(d_fd - d_g)[2:-2]) / scale)


# ---------------------------------------------------------------------------
# bound geometry


def _bound_geometry(s, x_ref, x0):
    """``(Theta, sigma)`` with ``theta = Theta - sigma*S`` and ``S`` measured from ``x_ref``."""
    if x0 is None:
        return 0.0, -1
    sigma = 1 if x0 > x_ref else -1
    big_theta = abs(phase_integral(s, x_ref, x0).value.real)
    return big_theta, sigma


def _nearest_turning_point(s, x_ref, grid):
    tps = scan_turning_points(s)
    side = 1 if np.all(np.asarray(grid) >= x_ref) else -1
    cands = [r for r in tps if (r - x_ref) * side > 0]
    if not cands:
        return None
    return min(cands, key=lambda r: abs(r - x_ref))


def _pair_from_scaled(s, grid, A, theta, phase_sign, order, x_ref, geometry, md):
    r = np.sqrt(classical_momentum(s, grid).real)
    return AmplitudePair(grid, A / r, np.conj(A) / r, theta, phase_sign, order, float(x_ref), geometry, md)


def first_order_amplitudes_bound(
    s: ProblemSetup, grid, x_ref, x0, tol=DEFAULT_REFLECTION_TOL, delta=None
) -> AmplitudePair:
    """First-order amplitudes ``A = exp(-i pi/4) + exp(i pi/4) int_{x_ref}^x w exp(-2 i theta)``."""
    grid = np.asarray(grid, dtype=float)
    big_theta, sigma = _bound_geometry(s, x_ref, x0)
    R = cumulative_reflection_integral(s, grid, sigma, x_ref, tol, delta)
    A = E_MINUS + E_PLUS * np.exp(-2j * big_theta) * R.values
    theta = big_theta - sigma * R.phase
    md = {"Theta": big_theta, "error_bound": R.error_bound, "phase_convention": "toward turning point"}
    return _pair_from_scaled(s, grid, A, theta, -sigma, "order-1", x_ref, "bound", md)


def bremmer_iterate(
    s: ProblemSetup, grid, x_ref, n, x0="auto", tol=DEFAULT_REFLECTION_TOL, eps=1.0, delta=None
) -> BremmerExpansion:
    """Nested reflection integrals up to order ``n`` on a shared panel mesh.

    Every layer is a cumulative integral of the previous one's node values,
    so the cost is linear in ``n``.  ``x0="auto"`` takes the nearest turning
    point on the grid side of ``x_ref``; ``None`` measures the phase from
    ``x_ref`` directly.
    """
    if int(n) != n or n < 1:
        raise ValueError("order n must be a positive integer")
    n = int(n)
    grid = np.asarray(grid, dtype=float)
    if isinstance(x0, str):
        x0 = _nearest_turning_point(s, x_ref, grid)
    big_theta, sigma = _bound_geometry(s, x_ref, x0)
    pts = np.union1d(grid, [x_ref])
    anchor = int(np.searchsorted(pts, x_ref))
    where = np.searchsorted(pts, grid)
    check_standoff(s, pts, delta)
    rot = np.exp(-2j * big_theta)

    def evaluate(mesh, anchor_edge):
        p = classical_momentum(s, mesh.nodes).real
        S_nodes, S_edges = mesh.cumulative(p / s.hbar, anchor_edge)
        w = eps * reflection_coupling(s, mesh.nodes, p)
        e = np.exp(2j * sigma * S_nodes.real)
        u_minus = w * rot * e
        u_plus = np.conj(u_minus)
        nm, np_ = 1.0, 1.0
        minus_edges = []
        for _ in range(n):
            nm_nodes, nm_e = mesh.cumulative(u_minus * np_, anchor_edge)
            np_nodes, _ = mesh.cumulative(u_plus * nm, anchor_edge)
            nm, np_ = nm_nodes, np_nodes
            minus_edges.append(nm_e)
        return np.vstack(minus_edges + [S_edges])

    vals, errs, nev = refined_cumulative(pts, anchor, evaluate, tol, h_max=_phase_step(s, pts))
    layers = vals[:n][:, where]
    S = vals[n].real[where]
    partial = np.empty_like(layers)
    acc = np.full(grid.size, E_MINUS)
    for k in range(n):
        acc = acc + (E_PLUS if k % 2 == 0 else E_MINUS) * layers[k]
        partial[k] = acc
    md = {"Theta": big_theta, "sigma": sigma, "turning_point": x0, "eps": eps, "evaluations": nev}
    return BremmerExpansion(grid, layers, partial, big_theta - sigma * S, float(x_ref), float(errs.sum()), md)


def expansion_pair(s: ProblemSetup, expansion: BremmerExpansion, order=None) -> AmplitudePair:
    """Amplitude pair for one partial sum of an expansion."""
    k = expansion.order if order is None else order
    A = expansion.partial_sums[k - 1]
    sigma = expansion.metadata["sigma"]
    return _pair_from_scaled(
        s, expansion.x, A, expansion.theta, -sigma, f"order-{k}", expansion.x_ref, "bound", dict(expansion.metadata)
    )


def _assemble(s, pair: AmplitudePair, D, method, md):
    psi = D * pair.psi()
    return WaveTable(pair.x, psi, method, md, ("allowed",) * pair.x.size)


def awkb_wavefunction_bound(
    s: ProblemSetup,
    grid_allowed,
    grid_forbidden,
    x0,
    x_ref=None,
    order=1,
    D=1.0,
    tol=DEFAULT_REFLECTION_TOL,
    delta=None,
) -> WaveTable:
    """a-WKB bound-state wavefunction: corrected amplitudes inside, first-order tail outside."""
    grid_allowed = np.asarray(grid_allowed, dtype=float)
    side = 1 if np.all(grid_allowed < x0) else -1
    if x_ref is None:
        x_ref = region_midpoint(s, x0, side)
        if x_ref is None:
            raise RegionError("no bounded allowed region next to the turning point; pass x_ref")
    if order == 1:
        pair = first_order_amplitudes_bound(s, grid_allowed, x_ref, x0, tol, delta)
    else:
        pair = expansion_pair(s, bremmer_iterate(s, grid_allowed, x_ref, order, x0, tol, delta=delta))
    md = {
        "turning_point": float(x0),
        "x_ref": float(x_ref),
        "order": order,
        "D": D,
        "phase_convention": "theta toward turning point; reflection phase from x_ref",
    }
    inside = _assemble(s, pair, D, "awkb", md)
    if grid_forbidden is None or len(grid_forbidden) == 0:
        return inside
    outside = wkb1_forbidden(s, grid_forbidden, x0, D)
    return concatenate_tables([inside, outside], "awkb", md)


# ---------------------------------------------------------------------------
# scattering geometry


def first_order_amplitudes_scattering(
    s: ProblemSetup, grid, r0, tol=DEFAULT_REFLECTION_TOL, delta=None
) -> AmplitudePair:
    """First-order amplitudes fixed at infinity.

    ``A(r) = exp(-i pi/4) - exp(i pi/4) int_r^inf w exp(-2 i theta)`` with
    ``theta = (1/hbar) int_r0^r p``.  The integral splits into a cumulative
    piece up to the last grid point and an oscillatory tail beyond it.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= r0):
        raise RegionError("scattering grid must lie beyond the turning point")
    r_max = float(grid[-1])
    theta_max = phase_integral(s, r0, r_max).value.real
    F = cumulative_reflection_integral(s, grid, -1, r_max, tol / 2, delta)
    tail = oscillatory_tail(s, r_max, theta_max, tol / 2)
    J = -np.exp(-2j * theta_max) * F.values + tail.value
    A = E_MINUS - E_PLUS * J
    theta = theta_max + F.phase
    md = {
        "turning_point": float(r0),
        "tail_value": tail.value,
        "tail_bound": tail.error_bound,
        "error_bound": F.error_bound + tail.error_bound,
    }
    return _pair_from_scaled(s, grid, A, theta, 1, "order-1", math.inf, "scattering", md)


def awkb_wavefunction_scattering(s: ProblemSetup, grid, r0, D=1.0, tol=DEFAULT_REFLECTION_TOL, delta=None) -> WaveTable:
    pair = first_order_amplitudes_scattering(s, grid, r0, tol, delta)
    md = {"turning_point": float(r0), "D": D, "x_ref": "infinity", "tail_bound": pair.metadata["tail_bound"]}
    return _assemble(s, pair, D, "awkb", md)
