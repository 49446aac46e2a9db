import numpy as np
import pytest
from hypothesis import given, strategies as st

from relosc.path import (PeriodicPath, ProjectionError, path_distance, project_feasible,
                         random_feasible)


def test_constructor_validation():
    with pytest.raises(ValueError):
        PeriodicPath(np.zeros((3, 1)), 1.0)
    with pytest.raises(ValueError):
        PeriodicPath(np.zeros((8, 1)), 0.0)
    p = PeriodicPath(np.arange(8.0), 2.0)
    assert p.nodes.shape == (8, 1) and p.h == 0.25
    with pytest.raises(ValueError):
        p.nodes[0, 0] = 1.0


def test_increments_wrap_around():
    p = PeriodicPath(np.array([0.0, 1.0, 2.0, 3.0]), 4.0)
    assert p.increments[:, 0].tolist() == [1.0, 1.0, 1.0, -3.0]
    assert p.speeds.tolist() == [1.0, 1.0, 1.0, 3.0]


def test_evaluate_interpolates_and_wraps():
    p = PeriodicPath(np.array([0.0, 2.0, 0.0, -2.0]), 1.0)
    assert p.evaluate(0.125)[0] == pytest.approx(1.0)
    assert p.evaluate(0.875)[0] == pytest.approx(-1.0)
    assert p.evaluate(1.125)[0] == pytest.approx(1.0)
    assert p.resample(8).resample(4).nodes.tolist() == p.nodes.tolist()


@given(st.integers(4, 64), st.integers(1, 3), st.floats(0.2, 3.0), st.floats(0.2, 3.0),
       st.integers(0, 2**31 - 1), st.floats(0.01, 10.0))
def test_projection_is_feasible_and_mean_preserving(N, n, T, L, seed, scale):
    rng = np.random.default_rng(seed)
    raw = rng.normal(0, scale, (N, n))
    eps = 1e-6
    p = project_feasible(raw, T, L, eps)
    assert np.all(p.speeds <= (1 - eps) * L * (1 + 1e-12))
    assert np.allclose(p.nodes.mean(axis=0), raw.mean(axis=0), atol=1e-9 * (1 + scale))


def test_projection_idempotent_on_feasible_input():
    p = random_feasible(32, 1.0, 1.0, 0.3, seed=3)
    q = project_feasible(p.nodes, 1.0, 1.0)
    assert np.array_equal(p.nodes, q.nodes)


def test_projection_is_nearest_in_increment_space():
    # a single over-long jump is spread evenly: the closest zero-sum feasible increments
    N, T, L = 8, 1.0, 1.0
    raw = np.zeros((N, 1))
    raw[4:] = 10.0
    p = project_feasible(raw, T, L, 1e-6)
    d = p.increments[:, 0]
    cap = (1 - 1e-6) * L * T / N
    assert np.max(np.abs(d)) <= cap * (1 + 1e-12)
    assert abs(d.sum()) < 1e-12


def test_projection_rejects_bad_eps():
    with pytest.raises(ValueError):
        project_feasible(np.zeros((8, 1)), 1.0, 1.0, eps_bd=0.0)


def test_projection_error_reports_residual(monkeypatch):
    import relosc.path as path_module
    monkeypatch.setattr(path_module, "_dual_newton", lambda d, cap, mu: d + 1.0)
    rng = np.random.default_rng(0)
    with pytest.raises(ProjectionError) as exc:
        project_feasible(rng.normal(0, 5, (64, 2)), 1.0, 1.0, max_iter=1)
    assert exc.value.residual > 0


@given(st.integers(4, 128), st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(0, 10),
       st.integers(0, 2**31 - 1))
def test_random_feasible_respects_bound(N, T, L, amp, seed):
    p = random_feasible(N, T, L, amp, seed, base=[1.0, -2.0])
    assert p.n == 2 and p.is_feasible(L, 1e-6)
    norms = np.linalg.norm(p.nodes, axis=1)
    assert norms.max() - norms.min() <= L * T + 1e-12


def test_random_feasible_zero_amplitude_and_validation():
    p = random_feasible(8, 1.0, 1.0, 0.0, seed=0, base=[3.0])
    assert np.all(p.nodes == 3.0)
    with pytest.raises(ValueError):
        random_feasible(8, 1.0, 1.0, -1.0, seed=0)


def test_path_distance():
    a = PeriodicPath(np.zeros((8, 1)), 1.0)
    b = PeriodicPath(np.ones((16, 1)), 1.0)
    assert path_distance(a, b) == 1.0
    assert path_distance(b, a) == 1.0
    with pytest.raises(ValueError):
        path_distance(a, PeriodicPath(np.zeros((8, 1)), 2.0))


def test_csv_round_trip():
    p = random_feasible(16, 1.5, 1.0, 0.4, seed=5, n=2)
    text = p.to_csv({"seed": 5})
    assert text.startswith("# config: ")
    q = PeriodicPath.from_csv(text)
    assert q.T == pytest.approx(1.5) and np.array_equal(p.nodes, q.nodes)
    with pytest.raises(ValueError):
        PeriodicPath.from_csv("x,y\n0,1\n")


@given(st.integers(4, 40), st.integers(1, 3), st.integers(0, 2**31 - 1), st.floats(0.05, 5.0))
def test_projection_non_expansive_on_increments(N, n, seed, scale):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(0, scale, (2, N, n))
    da, db = (np.roll(x, -1, axis=0) - x for x in (a, b))
    pa, pb = project_feasible(a, 1.0, 1.0), project_feasible(b, 1.0, 1.0)
    before = np.linalg.norm(da - db)
    after = np.linalg.norm(pa.increments - pb.increments)
    assert after <= before + 1e-9


def test_projection_square_wave_example():
    p = project_feasible(np.array([0.0, 10.0, 0.0, 10.0]), 1.0, 1.0, 1e-6)
    d = p.increments[:, 0]
    assert np.all(np.abs(d) <= 0.25 * (1 - 1e-6) * (1 + 1e-12))
    assert abs(d.sum()) <= 1e-15
    assert p.nodes.mean() == pytest.approx(5.0)


def test_projection_constant_path_unchanged():
    raw = np.full((6, 2), 1.5)
    assert np.array_equal(project_feasible(raw, 1.0, 1.0).nodes, raw)


def test_projection_finisher_matches_long_run():
    # a short Dykstra budget hands over to the multiplier solve; the limit is the same
    rng = np.random.default_rng(276)
    for n in (1, 2, 3):
        raw = rng.normal(0, 3.0, (40, n))
        full = project_feasible(raw, 0.4, 1.0)
        short = project_feasible(raw, 0.4, 1.0, max_iter=30)
        cap = (1 - 1e-6) * 0.4 / 40
        assert np.abs(full.increments - short.increments).max() <= 1e-9 * cap
