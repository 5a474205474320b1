"""Scenario configuration: a JSON document describing one CLI run."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field

from .errors import ConfigError
from .potential import Centrifugal, CustomPolynomial, Harmonic, ProblemSetup
from .wkb import METHODS

COMMANDS = ("bound", "series", "scatter", "quantize", "convergence", "contour-check")
POLICIES = ("unit-L2", "amplitude-match")
FORMATS = ("csv", "json")

_PARAMS = {
    "harmonic": {"mass", "omega"},
    "centrifugal": {"l", "mass", "langer"},
    "custom": {"coefficients", "mass"},
}


@dataclass
class ScenarioConfig:
    problem: dict = field(default_factory=lambda: {"type": "harmonic", "parameters": {}})
    energy: float = 0.5
    hbar: float = 1.0
    grid: dict = field(default_factory=lambda: {"min": -4.0, "max": 4.0, "count": 801})
    delta_tp: float = 0.02
    tolerances: dict = field(default_factory=lambda: {"phase": 1e-9, "reflection": 1e-7, "ode": 1e-11})
    bremmer_order: int = 1
    methods: list = field(default_factory=lambda: ["wkb1", "awkb", "exact"])
    normalization: dict = field(default_factory=lambda: {"policy": "unit-L2", "window": None})
    windows: list = field(default_factory=list)
    n_max: int = 5
    eps: list = field(default_factory=lambda: [0.1, 0.2, 0.4])
    x_ref: float | None = None
    output: dict = field(default_factory=lambda: {"format": "csv", "path": None})

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------

    def validate(self):
        prob = self.problem
        if not isinstance(prob, dict) or prob.get("type") not in _PARAMS:
            raise ConfigError(f"problem.type: expected one of {sorted(_PARAMS)}")
        params = prob.setdefault("parameters", {})
        if not isinstance(params, dict):
            raise ConfigError("problem.parameters: expected an object")
        extra = set(params) - _PARAMS[prob["type"]]
        if extra:
            raise ConfigError(f"problem.parameters: unknown field(s) {sorted(extra)}")
        if set(prob) - {"type", "parameters"}:
            raise ConfigError(f"problem: unknown field(s) {sorted(set(prob) - {'type', 'parameters'})}")
        _number("energy", self.energy)
        _number("hbar", self.hbar, positive=True)
        g = self.grid
        if not isinstance(g, dict) or set(g) != {"min", "max", "count"}:
            raise ConfigError("grid: expected exactly the fields min, max, count")
        _number("grid.min", g["min"])
        _number("grid.max", g["max"])
        if not g["min"] < g["max"]:
            raise ConfigError("grid: min must be below max")
        if not isinstance(g["count"], int) or isinstance(g["count"], bool) or g["count"] < 16:
            raise ConfigError("grid.count: expected an integer >= 16")
        _number("delta_tp", self.delta_tp)
        if not 0 < self.delta_tp < 0.2:
            raise ConfigError("delta_tp: expected 0 < delta_tp < 0.2")
        tol = self.tolerances
        if not isinstance(tol, dict) or set(tol) - {"phase", "reflection", "ode"}:
            raise ConfigError("tolerances: allowed fields are phase, reflection, ode")
        for k in ("phase", "reflection", "ode"):
            tol.setdefault(k, ScenarioConfig.__dataclass_fields__["tolerances"].default_factory()[k])
            _number(f"tolerances.{k}", tol[k], positive=True)
        if not isinstance(self.bremmer_order, int) or isinstance(self.bremmer_order, bool) or not 1 <= self.bremmer_order <= 8:
            raise ConfigError("bremmer_order: expected an integer in 1..8")
        if not isinstance(self.methods, list) or not self.methods:
            raise ConfigError("methods: expected a non-empty list")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"methods: unknown method {m!r}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods: duplicate entries")
        norm = self.normalization
        if not isinstance(norm, dict) or set(norm) - {"policy", "window"}:
            raise ConfigError("normalization: allowed fields are policy, window")
        norm.setdefault("window", None)
        if norm.get("policy") not in POLICIES:
            raise ConfigError(f"normalization.policy: expected one of {list(POLICIES)}")
        if norm["window"] is not None:
            _window("normalization.window", norm["window"])
        if not isinstance(self.windows, list):
            raise ConfigError("windows: expected a list of [lo, hi] pairs")
        for i, w in enumerate(self.windows):
            _window(f"windows[{i}]", w)
        if not isinstance(self.n_max, int) or isinstance(self.n_max, bool) or self.n_max < 0:
            raise ConfigError("n_max: expected a non-negative integer")
        if not isinstance(self.eps, list) or not self.eps:
            raise ConfigError("eps: expected a non-empty list")
        for i, e in enumerate(self.eps):
            _number(f"eps[{i}]", e, positive=True)
        if self.x_ref is not None:
            _number("x_ref", self.x_ref)
        out = self.output
        if not isinstance(out, dict) or set(out) - {"format", "path"}:
            raise ConfigError("output: allowed fields are format, path")
        out.setdefault("format", "csv")
        out.setdefault("path", None)
        if out["format"] not in FORMATS:
            raise ConfigError(f"output.format: expected one of {list(FORMATS)}")
        if out["path"] is not None and not isinstance(out["path"], str):
            raise ConfigError("output.path: expected a string or null")

    # -- conversion ---------------------------------------------------------

    def to_dict(self):
        return copy.deepcopy(asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config root: expected an object")
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"config root: unknown field(s) {sorted(extra)}")
        return cls(**copy.deepcopy(data))

    @classmethod
    def from_json(cls, text, source="<config>"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        try:
            return cls.from_dict(data)
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        except TypeError as exc:
            raise ConfigError(f"{source}: {exc}") from exc

    # -- problem construction ----------------------------------------------

    def potential(self, langer=None):
        t, prm = self.problem["type"], self.problem["parameters"]
        try:
            if t == "harmonic":
                return Harmonic(prm.get("mass", 1.0), prm.get("omega", 1.0))
            if t == "centrifugal":
                lm = prm.get("langer", True) if langer is None else langer
                return Centrifugal(prm.get("l", 1), prm.get("mass", 1.0), bool(lm))
            return CustomPolynomial(tuple(prm.get("coefficients", (0.0,))), prm.get("mass", 1.0))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"problem.parameters: {exc}") from exc

    def setup(self, langer=None, domain=None) -> ProblemSetup:
        pot = self.potential(langer)
        if domain is None:
            lo, hi = self.grid["min"], self.grid["max"]
            if isinstance(pot, Centrifugal):
                lo = min(lo, 1e-3 * hi) if lo > 0 else 1e-3 * hi
            domain = (lo, hi)
        try:
            return ProblemSetup(pot, float(self.energy), float(self.hbar), domain)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _number(name, v, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name}: expected a finite number")
    if positive and not v > 0:
        raise ConfigError(f"{name}: expected a positive number")


def _window(name, w):
    if not isinstance(w, (list, tuple)) or len(w) != 2:
        raise ConfigError(f"{name}: expected [lo, hi]")
    _number(f"{name}[0]", w[0])
    _number(f"{name}[1]", w[1])
    if not w[0] < w[1]:
        raise ConfigError(f"{name}: lo must be below hi")


def default_config(command: str) -> ScenarioConfig:
    """Built-in scenario for each subcommand."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if command == "bound":
        return ScenarioConfig(windows=[[0.0, 0.95], [-4.0, 4.0]])
    if command == "series":
        return ScenarioConfig(grid={"min": 0.0, "max": 0.999, "count": 1000}, methods=["wkb1", "wkb2"])
    if command == "scatter":
        return ScenarioConfig(
            problem={"type": "centrifugal", "parameters": {"l": 1, "langer": True}},
            grid={"min": 1.6, "max": 20.0, "count": 1841},
            normalization={"policy": "amplitude-match", "window": [10.0, 20.0]},
            windows=[[1.6, 3.0], [10.0, 20.0]],
        )
    if command == "quantize":
        return ScenarioConfig(grid={"min": -10.0, "max": 10.0, "count": 2001}, bremmer_order=2, methods=["awkb"])
    if command == "convergence":
        return ScenarioConfig(grid={"min": 0.0, "max": 0.9, "count": 181}, bremmer_order=5, methods=["awkb"])
    return ScenarioConfig(grid={"min": -4.0, "max": 4.0, "count": 801}, bremmer_order=2, methods=["awkb"])
