import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relosc.wellposed import (BisectionStall, LevelOptions, ScalarizedProblem, alpha_beta,
                              box_minimize, continuity_probe, level_minimize, minimize_scalarized,
                              project_to_level, quadratic_lab, symmetric_lab, wellposedness_probe)


def test_problem_validation():
    with pytest.raises(ValueError):
        ScalarizedProblem(0, None, None, None, None)
    with pytest.raises(ValueError):
        ScalarizedProblem(1, None, None, None, None, a=1.0, b=1.0)


@given(st.floats(0.05, 20.0))
def test_quadratic_scalarized_minimizer(lam):
    res = minimize_scalarized(quadratic_lab(), lam, starts=4)
    assert res.unique
    assert np.allclose(res.x, [-1 / (2 * lam), 0.0], atol=1e-7)


def test_box_minimize_detects_unbounded():
    res = box_minimize(lambda x: float(x[0]), lambda x: np.array([1.0]), 1, 1.0, starts=4)
    assert res.unbounded and res.x is None
    edge = box_minimize(lambda x: float(x[0]), lambda x: np.array([1.0]), 1, 1.0, starts=4,
                        doublings=0)
    assert not edge.unbounded and edge.x[0] == pytest.approx(-1.0)


def test_box_minimize_finds_both_symmetric_minima():
    f = lambda x: float((x[0] ** 2 - 1) ** 2 + x[1] ** 2)
    g = lambda x: np.array([4 * x[0] * (x[0] ** 2 - 1), 2 * x[1]])
    res = box_minimize(f, g, 2, 3.0, starts=16)
    assert len(res.minimizers) == 2 and not res.unique


def test_alpha_beta_conventions():
    ab = alpha_beta(quadratic_lab())
    assert ab.alpha == 0.0 and ab.beta == math.inf
    assert ab.meta["M_a_empty"] and ab.meta["M_b_empty"]
    assert ab.to_dict()["beta"] == "inf"
    # J = Psi = |x|^2: at lam = a = 0 the minimizer is the origin, so beta = 0
    sq = ScalarizedProblem(2, lambda x: float(x @ x), lambda x: 2 * x,
                           lambda x: float(x @ x), lambda x: 2 * x)
    assert alpha_beta(sq).beta == pytest.approx(0.0, abs=1e-12)


def test_level_minimize_exact_values():
    prob = quadratic_lab()
    ab = alpha_beta(prob)
    for r in (0.25, 1.0, 4.0):
        lm = level_minimize(prob, r, LevelOptions(), ab)
        assert np.allclose(lm.x_hat, [-math.sqrt(r), 0.0], atol=1e-6)
        assert lm.lambda_hat == pytest.approx(1 / (2 * math.sqrt(r)), abs=1e-6)
    with pytest.raises(ValueError):
        level_minimize(prob, -1.0, LevelOptions(), ab)


def test_symmetric_lab_stalls():
    prob = symmetric_lab()
    ab = alpha_beta(prob)
    with pytest.raises(BisectionStall) as exc:
        level_minimize(prob, 1.0, LevelOptions(), ab)
    assert exc.value.lam_lo < exc.value.lam_hi
    rep = continuity_probe(prob, [0.5, 1.0], LevelOptions(), ab)
    assert rep.discontinuity and rep.rows[0]["status"].startswith("stall")
    assert "stall" in rep.to_csv()


def test_continuity_csv():
    rep = continuity_probe(quadratic_lab(), [1.0, 2.0])
    lines = rep.to_csv().splitlines()
    assert lines[0] == "r,x_1,x_2,J,lambda_hat,jump_x,jump_J,status"
    assert len(lines) == 3 and not rep.discontinuity


def test_project_to_level():
    prob = quadratic_lab()
    y = project_to_level(prob, np.array([3.0, 4.0]), 1.0)
    assert float(y @ y) == pytest.approx(1.0, abs=1e-12)
    assert project_to_level(prob, np.zeros(2), 1.0) is None


def test_wellposedness_probe_quadratic():
    rep = wellposedness_probe(quadratic_lab(), 1.0, trial_count=8)
    assert rep.well_posed and rep.source == "level_minimize"
    assert rep.max_distance[-1] <= 0.1 * rep.max_distance[0]
    assert rep.to_csv().startswith("eps,max_distance,median_distance")
