import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from awkb.config import COMMANDS, ScenarioConfig, default_config
from awkb.errors import ConfigError
from awkb.potential import Centrifugal, CustomPolynomial, Harmonic


class TestValidation:
    @pytest.mark.parametrize(
        "override, field",
        [
            ({"grid": {"min": 0.0, "max": 1.0, "count": 15}}, "grid.count"),
            ({"grid": {"min": 1.0, "max": 0.0, "count": 20}}, "grid"),
            ({"grid": {"min": 0.0, "max": 1.0}}, "grid"),
            ({"delta_tp": 0.0}, "delta_tp"),
            ({"delta_tp": 0.2}, "delta_tp"),
            ({"methods": []}, "methods"),
            ({"methods": ["wkb1", "magic"]}, "methods"),
            ({"methods": ["wkb1", "wkb1"]}, "methods"),
            ({"hbar": 0.0}, "hbar"),
            ({"energy": float("nan")}, "energy"),
            ({"energy": True}, "energy"),
            ({"bremmer_order": 0}, "bremmer_order"),
            ({"problem": {"type": "morse"}}, "problem.type"),
            ({"problem": {"type": "harmonic", "parameters": {"l": 1}}}, "problem.parameters"),
            ({"normalization": {"policy": "max-abs"}}, "normalization.policy"),
            ({"windows": [[1.0, 0.0]]}, "windows[0]"),
            ({"tolerances": {"phase": -1.0}}, "tolerances.phase"),
            ({"output": {"format": "xml"}}, "output.format"),
            ({"eps": [0.1, 0.0]}, "eps[1]"),
        ],
    )
    def test_rejects(self, override, field):
        with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
            ScenarioConfig.from_dict(override)

    def test_unknown_root_field(self):
        with pytest.raises(ConfigError, match="unknown field"):
            ScenarioConfig.from_dict({"grids": {}})

    def test_defaults_are_valid(self):
        for command in COMMANDS:
            assert isinstance(default_config(command), ScenarioConfig)
        with pytest.raises(ConfigError):
            default_config("plot")

    def test_partial_tolerances_filled(self):
        cfg = ScenarioConfig.from_dict({"tolerances": {"ode": 1e-10}})
        assert cfg.tolerances == {"phase": 1e-9, "reflection": 1e-7, "ode": 1e-10}


class TestJson:
    def test_syntax_error_has_location(self):
        text = '{\n  "energy": 0.5,\n  "hbar": ,\n}'
        with pytest.raises(ConfigError, match=r"cfg\.json:3:\d+"):
            ScenarioConfig.from_json(text, source="cfg.json")

    def test_field_error_names_source(self):
        with pytest.raises(ConfigError, match=r"cfg\.json: delta_tp"):
            ScenarioConfig.from_json('{"delta_tp": 0.5}', source="cfg.json")

    @pytest.mark.parametrize("command", COMMANDS)
    def test_round_trip(self, command):
        cfg = default_config(command)
        again = ScenarioConfig.from_json(cfg.to_json())
        assert again == cfg and again.to_json() == cfg.to_json()

    @settings(max_examples=30, deadline=None)
    @given(
        st.floats(0.01, 10.0),
        st.floats(0.1, 3.0),
        st.integers(16, 5000),
        st.floats(1e-3, 0.19),
        st.lists(st.sampled_from(["wkb1", "wkb2", "awkb", "numerov", "exact"]), min_size=1, max_size=5, unique=True),
    )
    def test_round_trip_property(self, energy, hbar, count, delta, methods):
        cfg = ScenarioConfig(
            energy=energy, hbar=hbar, grid={"min": -2.0, "max": 2.0, "count": count}, delta_tp=delta, methods=methods
        )
        assert ScenarioConfig.from_json(cfg.to_json()) == cfg
        assert json.loads(cfg.to_json())["methods"] == methods


class TestProblemConstruction:
    def test_harmonic(self):
        cfg = ScenarioConfig(problem={"type": "harmonic", "parameters": {"omega": 2.0}})
        assert cfg.potential() == Harmonic(1.0, 2.0)

    def test_centrifugal_langer_override(self):
        cfg = default_config("scatter")
        assert cfg.potential() == Centrifugal(1, 1.0, True)
        assert cfg.potential(langer=False).langer_modified is False
        lo, hi = cfg.setup().domain
        assert 0 < lo <= 1.6 and hi == 20.0

    def test_custom(self):
        cfg = ScenarioConfig(problem={"type": "custom", "parameters": {"coefficients": [0.0, 0.0, 0.5]}})
        assert cfg.potential() == CustomPolynomial((0.0, 0.0, 0.5))

    def test_bad_parameter_value(self):
        cfg = ScenarioConfig(problem={"type": "harmonic", "parameters": {"mass": -1.0}})
        with pytest.raises(ConfigError):
            cfg.potential()
