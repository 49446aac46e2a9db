import json

import numpy as np
import pytest

from relosc.config import (ConfigError, dumps, expression_perturbation, instance_from_dict,
                           load_instance, load_instance_text, to_jsonable)
from relosc.functional import total_energy
from relosc.model import preset
from relosc.path import random_feasible

COMPOSED = {
    "name": "composed", "n": 1, "T": 1.0,
    "kinetic": {"family": "relativistic", "L": 1.0},
    "potential": {"family": "power", "p": 2, "mu": 1},
    "growth": {"family": "power", "p": 2},
    "perturbation": {"family": "two-well", "shift": 0.0},
    "witnesses": [[0.5], [-0.5]],
}


def test_preset_form_matches_preset():
    inst = instance_from_dict({"preset": "example-3.1", "params": {"z": [2.0]}})
    assert inst.name == "example-3.1"
    assert inst.perturbation.G(np.array([[1.5]]))[0] == pytest.approx(3.0)


def test_composed_form_matches_two_minima_preset():
    a = instance_from_dict(COMPOSED)
    b = preset("two-minima-symmetric")
    for seed in range(3):
        p = random_feasible(16, 1.0, 1.0, 0.5, seed, base=[0.8])
        assert total_energy(a, p, 1.7) == pytest.approx(total_energy(b, p, 1.7), rel=1e-14)


def test_unknown_field_rejected_with_line():
    text = json.dumps({**COMPOSED, "colour": 1}, indent=1)
    with pytest.raises(ConfigError) as exc:
        load_instance_text(text, "x.json")
    assert "colour" in str(exc.value)
    assert exc.value.line == next(i + 1 for i, ln in enumerate(text.splitlines()) if "colour" in ln)


def test_malformed_json_reports_line():
    with pytest.raises(ConfigError) as exc:
        load_instance_text('{\n  "preset": \n}', "bad.json")
    assert exc.value.line is not None


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_instance(tmp_path / "nope.json")


def test_load_instance_file(tmp_path):
    f = tmp_path / "i.json"
    f.write_text(json.dumps({"preset": "theorem-3.2"}))
    assert load_instance(f).plateau_radius == 0.8


def test_expression_perturbation_values_and_gradient():
    pert = expression_perturbation("exp(-r**2) - 0.1*x1", 2, 1.0)
    x = np.array([[0.3, -0.4], [1.0, 2.0]])
    r2 = (x ** 2).sum(axis=1)
    assert np.allclose(pert.G(x), np.exp(-r2) - 0.1 * x[:, 0], atol=1e-14)
    g = pert.gradG(x)
    assert np.allclose(g[:, 0], -2 * x[:, 0] * np.exp(-r2) - 0.1, atol=1e-14)
    assert np.allclose(g[:, 1], -2 * x[:, 1] * np.exp(-r2), atol=1e-14)


@pytest.mark.parametrize("expr", ["__import__('os')", "x1.__class__", "open('f')", "x3", "lambda: 1",
                                  "x1; x1", "[x1]"])
def test_expression_whitelist(expr):
    with pytest.raises(ValueError):
        expression_perturbation(expr, 2, None)


def test_jsonable_and_dumps():
    obj = {"b": np.float64(1.5), "a": [np.inf, -np.inf, np.nan], "c": np.arange(2)}
    out = to_jsonable(obj)
    assert out["a"] == ["inf", "-inf", "nan"] and out["c"] == [0, 1]
    text = dumps(obj)
    assert text.endswith("\n") and text.index('"a"') < text.index('"b"')
    json.loads(text)
