"""Scenario runners behind the CLI subcommands.

Each runner takes a :class:`ScenarioConfig` and returns a ``ScenarioResult``
made of plain tables plus per-method metadata; writing files is left to the
CLI layer.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bremmer import (
    E_MINUS,
    E_PLUS,
    awkb_wavefunction_bound,
    awkb_wavefunction_scattering,
    bremmer_iterate,
    solve_coupled_ode,
)
from .config import ScenarioConfig
from .errors import ConfigError, RegionError
from .potential import (
    Centrifugal,
    Harmonic,
    ProblemSetup,
    classical_momentum,
    effective_momentum_langer,
    momentum_squared,
    scan_turning_points,
)
from .quadrature import ellipse, rectangle, stadium
from .quantization import (
    action_integral,
    default_contour,
    eigenenergy,
    reflection_correction_contour,
    winding_contribution,
)
from .reference import compare, ho_exact_eigenstate, normalize, numerov_solve, riccati_bessel_regular
from .wkb import (
    WaveTable,
    asymptoticity_report,
    concatenate_tables,
    series_crossing,
    wkb1_allowed,
    wkb1_forbidden,
    wkb2_wavefunction,
    wkb_series,
)

REFERENCE_METHODS = ("exact", "numerov")


@dataclass
class Table:
    name: str
    columns: list
    rows: list
    metadata: dict = field(default_factory=dict)


@dataclass
class ScenarioResult:
    command: str
    tables: list
    methods: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


class _Timer:
    def __init__(self, sink, key):
        self.sink, self.key = sink, key

    def __enter__(self):
        self.t = time.perf_counter()

    def __exit__(self, *exc):
        self.sink[self.key] = time.perf_counter() - self.t


def _grid(cfg):
    g = cfg.grid
    return np.linspace(g["min"], g["max"], g["count"])


def _tol(cfg, key):
    return cfg.tolerances[key]


# ---------------------------------------------------------------------------
# bound composite assembly


def _relabel_segments(table: WaveTable):
    """One segment per run of equal region tags."""
    regs = table.regions
    seg = np.zeros(len(regs), dtype=int)
    for i in range(1, len(regs)):
        seg[i] = seg[i - 1] + (regs[i] != regs[i - 1])
    return WaveTable(table.x, table.psi, table.method, table.metadata, table.regions, seg)


@dataclass
class BoundLayout:
    setup: ProblemSetup
    left: float
    right: float
    midpoint: float
    delta: float
    allowed_left: np.ndarray
    allowed_right: np.ndarray
    forbidden_left: np.ndarray
    forbidden_right: np.ndarray

    @property
    def x(self):
        return np.concatenate([self.forbidden_left, self.allowed_left, self.allowed_right, self.forbidden_right])


def bound_layout(cfg: ScenarioConfig, setup: ProblemSetup | None = None) -> BoundLayout:
    s = setup or cfg.setup()
    tps = scan_turning_points(s)
    if len(tps) != 2:
        raise ConfigError(f"bound scenarios need two turning points inside the grid, found {len(tps)}")
    xl, xr = tps[0], tps[1]
    mid = 0.5 * (xl + xr) if cfg.x_ref is None else float(cfg.x_ref)
    if not xl < mid < xr:
        raise ConfigError("x_ref must lie inside the allowed region")
    delta = cfg.delta_tp * (xr - xl)
    x = _grid(cfg)
    q = momentum_squared(s, x)
    return BoundLayout(
        s,
        xl,
        xr,
        mid,
        delta,
        x[(x > xl + delta) & (x < mid)],
        x[(x >= mid) & (x < xr - delta)],
        x[(x < xl - delta) & (q < 0)],
        x[(x > xr + delta) & (q < 0)],
    )


def _composite(parts, method, md):
    parts = [p for p in parts if p is not None and p.x.size]
    return _relabel_segments(concatenate_tables(parts, method, md))


def _forbidden_tables(L: BoundLayout, D=1.0):
    s = L.setup
    out = []
    if L.forbidden_left.size:
        out.append(wkb1_forbidden(s, L.forbidden_left, L.left, D))
    if L.forbidden_right.size:
        out.append(wkb1_forbidden(s, L.forbidden_right, L.right, D))
    return out


def bound_method_table(cfg: ScenarioConfig, L: BoundLayout, method: str) -> WaveTable:
    s = L.setup
    md = {"x_ref": L.midpoint, "delta": L.delta, "turning_points": [L.left, L.right]}
    if method == "wkb1":
        parts = [
            wkb1_allowed(s, L.allowed_left, L.left, delta=L.delta) if L.allowed_left.size else None,
            wkb1_allowed(s, L.allowed_right, L.right, delta=L.delta) if L.allowed_right.size else None,
        ]
        return _composite(parts + _forbidden_tables(L), "wkb1", md)
    if method == "wkb2":
        parts = [
            wkb2_wavefunction(s, L.allowed_left, L.left, x_mid=L.midpoint, delta=L.delta) if L.allowed_left.size else None,
            wkb2_wavefunction(s, L.allowed_right, L.right, x_mid=L.midpoint, delta=L.delta) if L.allowed_right.size else None,
        ]
        md["connection"] = "first-order pi/4 phases reused"
        return _composite(parts + _forbidden_tables(L), "wkb2", md)
    if method == "awkb":
        tol = _tol(cfg, "reflection")
        parts = []
        for grid, x0 in ((L.allowed_left, L.left), (L.allowed_right, L.right)):
            if grid.size:
                parts.append(
                    awkb_wavefunction_bound(s, grid, None, x0, L.midpoint, cfg.bremmer_order, tol=tol, delta=L.delta)
                )
        md.update(order=cfg.bremmer_order, phase_convention="theta toward turning point; reflection phase from x_ref")
        return _composite(parts + _forbidden_tables(L), "awkb", md)
    if method == "exact":
        pot = s.potential
        if not isinstance(pot, Harmonic):
            raise ConfigError("method 'exact' for bound problems needs the harmonic model")
        level = s.energy / (s.hbar * pot.omega) - 0.5
        n = int(round(level))
        if abs(level - n) > 1e-9 or n < 0:
            raise ConfigError("method 'exact' needs an oscillator eigenenergy (n + 1/2) hbar omega")
        ref = ho_exact_eigenstate(n, pot.mass, pot.omega, s.hbar, L.x)
        return _with_layout(ref, L, {"n": n})
    if method == "numerov":
        return _bound_numerov(cfg, L)
    raise ConfigError(f"unknown method {method!r}")


def _with_layout(table: WaveTable, L: BoundLayout, md):
    regs = (
        ("forbidden",) * L.forbidden_left.size
        + ("allowed",) * (L.allowed_left.size + L.allowed_right.size)
        + ("forbidden",) * L.forbidden_right.size
    )
    return _relabel_segments(WaveTable(table.x, table.psi, table.method, md, regs))


def _bound_numerov(cfg, L: BoundLayout):
    """Outward Numerov solve from the grid start with decaying first-order seeds."""
    s = L.setup
    x = _grid(cfg)
    if momentum_squared(s, x[0]) >= 0:
        raise ConfigError("numerov needs the grid to start in a forbidden region")
    seeds = wkb1_forbidden(s, x[:2], L.left).psi.real
    sol = numerov_solve(s, x, seeds[0], seeds[1], "outward")
    idx = np.searchsorted(x, L.x)
    return _with_layout(WaveTable(L.x, sol.psi[idx], "numerov"), L, dict(sol.metadata))


# ---------------------------------------------------------------------------
# helpers shared by the table builders


def _normalized(cfg, table, reference=None):
    norm = cfg.normalization
    if norm["policy"] == "unit-L2":
        return normalize(table, "unit-L2", norm["window"])
    if reference is None:
        raise ConfigError("amplitude-match normalization needs the 'exact' reference")
    return normalize(table, "amplitude-match", norm["window"], reference)


def _pair_metrics(tables: dict, windows):
    rows = []
    for (na, ta), (nb, tb) in itertools.combinations(tables.items(), 2):
        for w in windows:
            m = compare(ta, tb, w)
            rows.append([na, nb, m.window[0], m.window[1], m.l2, m.sup, m.sup_location, m.policy])
    return Table("metrics", ["method_a", "method_b", "window_lo", "window_hi", "l2", "sup", "sup_location", "policy"], rows)


def _meta(table: WaveTable):
    md = dict(table.metadata)
    md["max_abs_imag"] = float(np.max(np.abs(table.psi.imag))) if table.psi.size else 0.0
    return md


# ---------------------------------------------------------------------------
# runners


def run_bound(cfg: ScenarioConfig) -> ScenarioResult:
    timings = {}
    L = bound_layout(cfg)
    tables = {}
    for m in cfg.methods:
        with _Timer(timings, m):
            tables[m] = bound_method_table(cfg, L, m)
    ref = tables.get("exact")
    normed = {m: _normalized(cfg, t, ref) for m, t in tables.items() if m in REFERENCE_METHODS}
    # the semiclassical methods share one constant D, so awkb and wkb1 agree at x_ref
    semi = [m for m in cfg.methods if m not in REFERENCE_METHODS]
    if semi:
        lead = _normalized(cfg, tables[semi[0]], ref)
        norm = dict(lead.metadata["normalization"], shared_with=semi[0])
        for m in semi:
            normed[m] = tables[m].scaled(norm["factor"], normalization=norm)
    normed = {m: normed[m] for m in cfg.methods}
    x = L.x
    regions = normed[cfg.methods[0]].regions
    cols = ["x"] + list(cfg.methods) + ["region"]
    rows = [[float(x[i])] + [float(normed[m].psi[i].real) for m in cfg.methods] + [regions[i]] for i in range(x.size)]
    windows = cfg.windows or [[float(x[0]), float(x[-1])]]
    metrics = _pair_metrics(normed, windows)
    summary = {"turning_points": [L.left, L.right], "x_ref": L.midpoint, "delta": L.delta}
    return ScenarioResult(
        "bound", [Table("bound", cols, rows), metrics], {m: _meta(t) for m, t in normed.items()}, summary, timings
    )


def _series_side(s, grid):
    tps = scan_turning_points(s)
    if len(tps) == 0:
        raise ConfigError("series needs a turning point")
    q = momentum_squared(s, grid)
    if np.any(q <= 0):
        raise RegionError("series grid must lie strictly inside the allowed region")
    right = [r for r in tps if r > grid[-1]]
    left = [r for r in tps if r < grid[0]]
    if right and left:
        mid = 0.5 * (left[-1] + right[0])
        return right[0] if grid.mean() >= mid else left[-1]
    if right:
        return right[0]
    return left[-1]


def run_series(cfg: ScenarioConfig, ratio=3.0) -> ScenarioResult:
    # the series grid stops short of the turning point, so scan beyond it
    lo, hi = cfg.grid["min"], cfg.grid["max"]
    s = cfg.setup(domain=(lo - (hi - lo), hi + (hi - lo)))
    grid = _grid(cfg)
    x0 = _series_side(s, grid)
    timings = {}
    with _Timer(timings, "series"):
        terms = wkb_series(s, grid, x0, cfg.x_ref)
        rep = asymptoticity_report(terms, s.hbar, ratio)
    cols = ["x", "S0_over_hbar", "abs_S1", "hbar_abs_S2", "flag_S0_S1", "flag_S1_S2", "flag_S2_small"]
    rows = []
    for i in range(grid.size):
        rows.append(
            [
                float(grid[i]),
                float(abs(terms.S0[i]) / s.hbar),
                float(abs(terms.S1[i])),
                float(s.hbar * abs(terms.S2[i])),
            ]
            + [int(f) for f in rep.flags[i]]
        )
    crossing = series_crossing(terms, s.hbar)
    summary = {"turning_point": x0, "x_mid": terms.x_mid, "ratio": ratio, "crossing": crossing}
    return ScenarioResult("series", [Table("series", cols, rows)], {}, summary, timings)


def run_scatter(cfg: ScenarioConfig) -> ScenarioResult:
    if cfg.problem["type"] != "centrifugal":
        raise ConfigError("scatter needs problem.type = 'centrifugal'")
    s = cfg.setup()
    pot = s.potential
    tps = scan_turning_points(s)
    if len(tps) != 1:
        raise ConfigError(f"scatter expects one turning point, found {len(tps)}")
    r0 = tps[0]
    delta = cfg.delta_tp * max(abs(r0), 1.0)
    r = _grid(cfg)
    r = r[r >= r0 + delta]
    if r.size < 16:
        raise ConfigError("fewer than 16 grid points beyond the turning-point standoff")
    k = math.sqrt(2 * s.mass * s.energy) / s.hbar
    exact = WaveTable(r, riccati_bessel_regular(pot.l, k * r), "exact", {"l": pot.l, "k": k, "potential": "l(l+1) unmodified"})
    timings, tables = {}, {}
    for m in cfg.methods:
        with _Timer(timings, m):
            if m == "wkb1":
                tables[m] = wkb1_allowed(s, r, r0, delta=delta)
            elif m == "awkb":
                tables[m] = awkb_wavefunction_scattering(s, r, r0, tol=_tol(cfg, "reflection"), delta=delta)
            elif m == "exact":
                tables[m] = exact
            elif m == "numerov":
                tables[m] = _scatter_numerov(cfg, pot, r)
            else:
                raise ConfigError(f"method {m!r} is not available for scattering")
    normed = {}
    for m, t in tables.items():
        normed[m] = t if m == "exact" else _normalized(cfg, t, exact)
    if pot.langer_modified:
        p_eff = effective_momentum_langer(pot.l, s, r).real
    else:
        p_eff = classical_momentum(s, r).real
    cols = ["r", "p_eff"] + list(cfg.methods)
    rows = [[float(r[i]), float(p_eff[i])] + [float(normed[m].psi[i].real) for m in cfg.methods] for i in range(r.size)]
    windows = cfg.windows or [[float(r[0]), float(r[-1])]]
    metrics = _pair_metrics(normed, windows)
    summary = {"turning_point": r0, "delta": delta, "langer": pot.langer_modified}
    return ScenarioResult(
        "scatter", [Table("scatter", cols, rows), metrics], {m: _meta(t) for m, t in normed.items()}, summary, timings
    )


def _scatter_numerov(cfg, pot: Centrifugal, r):
    s = cfg.setup(langer=False, domain=(1e-3, float(r[-1])))
    k = math.sqrt(2 * s.mass * s.energy) / s.hbar
    h = float(r[1] - r[0])
    n0 = int(math.ceil((r[0] - 0.01) / h))
    start = r[0] - n0 * h
    x = start + h * np.arange(n0 + r.size)
    sol = numerov_solve(s, x, riccati_bessel_regular(pot.l, k * x[0]), riccati_bessel_regular(pot.l, k * x[1]))
    return WaveTable(r, sol.psi[n0:], "numerov", dict(sol.metadata))


def run_quantize(cfg: ScenarioConfig, n_max=None) -> ScenarioResult:
    s = cfg.setup()
    n_max = cfg.n_max if n_max is None else n_max
    orders = list(range(1, cfg.bremmer_order + 1))
    cols = ["n", "energy", "action", "action_residual", "winding_re", "winding_im", "winding_bound"]
    for k in orders:
        cols += [f"refl{k}_re", f"refl{k}_im", f"refl{k}_bound"]
    cols += ["ratio1_re", "ratio1_im", "residual"]
    rows, timings = [], {}
    for n in range(n_max + 1):
        with _Timer(timings, f"n={n}"):
            E = eigenenergy(s, n)
            sE = s.with_energy(E)
            action = action_integral(sE)
            path = default_contour(sE)
            wind = winding_contribution(sE, path)
            row = [n, E, action, action - 2 * math.pi * s.hbar * (n + 0.5)]
            row += [wind.value.real, wind.value.imag, wind.error_bound]
            ratio = None
            for k in orders:
                rc = reflection_correction_contour(sE, path, k)
                row += [rc.value.value.real, rc.value.value.imag, rc.value.error_bound]
                if k == 1:
                    ratio = rc.ratio.value
            row += [ratio.real, ratio.imag] if ratio is not None else [math.nan, math.nan]
            row.append(action + wind.value.real - 2 * math.pi * s.hbar * n)
            rows.append(row)
    summary = {"winding_target": 2 * math.pi * s.hbar, "contour": "ellipse, semi-axes 1.25 and 0.1 of the half-width"}
    return ScenarioResult("quantize", [Table("quantize", cols, rows)], {}, summary, timings)


def convergence_study(s: ProblemSetup, grid, x_ref, orders, eps_values=(1.0,), tol=1e-12, ode_tol=1e-13, delta=None):
    """Sup deviation of each partial sum from the ODE oracle, per coupling scale.

    Deviations are measured on the unscaled amplitude ``a`` (not
    ``sqrt(p) a``).  Returns ``{eps: [dev(order 1), ...]}``.
    """
    grid = np.asarray(grid, dtype=float)
    n = max(orders)
    out = {}
    p = classical_momentum(s, grid).real
    for eps in eps_values:
        ex = bremmer_iterate(s, grid, x_ref, n, tol=tol, eps=eps, delta=delta)
        md = ex.metadata
        big_theta, sigma = md["Theta"], md["sigma"]
        r_ref = math.sqrt(float(classical_momentum(s, x_ref).real))
        sides = []
        for part in (grid[grid <= x_ref], grid[grid >= x_ref]):
            if part.size == 0 or (part.size == 1 and part[0] == x_ref):
                continue
            end = part[0] if part[-1] <= x_ref else part[-1]
            pair = solve_coupled_ode(
                s, x_ref, end, E_MINUS / r_ref, E_PLUS / r_ref, ode_tol, eps, part, big_theta, -sigma
            )
            sides.append((part, pair.a))
        a_ode = np.empty(grid.size, dtype=complex)
        for part, a in sides:
            a_ode[np.searchsorted(grid, part)] = a
        out[eps] = [float(np.max(np.abs(ex.partial_sums[k - 1] - a_ode * np.sqrt(p)) / np.sqrt(p))) for k in orders]
    return out


def fitted_slopes(study, orders):
    eps = np.array(sorted(study))
    slopes = []
    for j, _ in enumerate(orders):
        d = np.array([study[e][j] for e in eps])
        if np.any(d <= 0):
            slopes.append(math.nan)
        else:
            slopes.append(float(np.polyfit(np.log(eps), np.log(d), 1)[0]))
    return slopes


def run_convergence(cfg: ScenarioConfig) -> ScenarioResult:
    s = cfg.setup()
    grid = _grid(cfg)
    if cfg.x_ref is not None:
        x_ref = float(cfg.x_ref)
    elif cfg.problem["type"] == "centrifugal":
        x_ref = float(grid[-1])
    else:
        tps = scan_turning_points(s)
        lefts = [r for r in tps if r < grid[0]]
        rights = [r for r in tps if r > grid[-1]]
        if lefts and rights:
            x_ref = 0.5 * (lefts[-1] + rights[0])
        else:
            x_ref = float(grid[0])
    orders = list(range(1, cfg.bremmer_order + 1))
    timings = {}
    with _Timer(timings, "order_table"):
        base = convergence_study(s, grid, x_ref, orders, (1.0,), ode_tol=cfg.tolerances["ode"])[1.0]
    with _Timer(timings, "eps_table"):
        study = convergence_study(s, grid, x_ref, orders, tuple(cfg.eps), ode_tol=cfg.tolerances["ode"])
    slopes = fitted_slopes(study, orders)
    t1 = Table("convergence", ["order", "sup_deviation"], [[k, base[k - 1]] for k in orders])
    rows = [[k, float(e), study[e][k - 1]] for k in orders for e in sorted(study)]
    t2 = Table("convergence_eps", ["order", "eps", "sup_deviation"], rows)
    t3 = Table("convergence_slopes", ["order", "slope", "expected"], [[k, slopes[k - 1], k + 1] for k in orders])
    summary = {"x_ref": x_ref}
    return ScenarioResult("convergence", [t1, t2, t3], {}, summary, timings)


def contour_family(s: ProblemSetup):
    """Three distinct closed paths around the well: ellipse, rectangle, stadium."""
    tps = scan_turning_points(s)
    if len(tps) != 2:
        raise ConfigError("contour-check needs two turning points")
    c = 0.5 * (tps[0] + tps[1])
    h = 0.5 * (tps[1] - tps[0])
    return {
        "ellipse": ellipse(2 * h, h, center=c),
        "rectangle": rectangle(c - 2 * h, c + 2 * h, -h, h),
        "stadium": stadium(c - 1.5 * h, c + 1.5 * h, h),
    }


def run_contour_check(cfg: ScenarioConfig) -> ScenarioResult:
    s = cfg.setup()
    orders = list(range(1, cfg.bremmer_order + 1))
    cols = ["contour", "winding_re", "winding_im", "winding_bound", "winding_target"]
    for k in orders:
        cols += [f"refl{k}_abs", f"refl{k}_bound"]
    cols += ["ratio1_re", "ratio1_im"]
    rows, timings, windings = [], {}, []
    for name, path in contour_family(s).items():
        with _Timer(timings, name):
            wind = winding_contribution(s, path)
            windings.append(wind.value)
            row = [name, wind.value.real, wind.value.imag, wind.error_bound, 2 * math.pi * s.hbar]
            ratio = None
            for k in orders:
                rc = reflection_correction_contour(s, path, k)
                row += [abs(rc.value.value), rc.value.error_bound]
                if k == 1:
                    ratio = rc.ratio.value
            row += [ratio.real, ratio.imag] if ratio is not None else [math.nan, math.nan]
            rows.append(row)
    spread = max(abs(a - b) for a, b in itertools.combinations(windings, 2))
    summary = {"winding_spread": spread}
    return ScenarioResult("contour-check", [Table("contour_check", cols, rows)], {}, summary, timings)


RUNNERS = {
    "bound": run_bound,
    "series": run_series,
    "scatter": run_scatter,
    "quantize": run_quantize,
    "convergence": run_convergence,
    "contour-check": run_contour_check,
}
