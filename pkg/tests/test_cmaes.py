import numpy as np
import pytest

from monoped_codesign.cmaes import CmaConfig, default_population, optimize, rosenbrock, sphere


def _cfg(n, lo, hi, mean, **kw):
    return CmaConfig(n, (lo,) * n, (hi,) * n, mean, **kw)


def test_default_population():
    assert default_population(5) == 8
    assert default_population(13) == 11
    assert _cfg(2, -1, 1, (0, 0)).lam == 6


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sphere_5d(seed):
    r = optimize(_cfg(5, -5.0, 5.0, (3.0,) * 5, max_generations=200, seed=seed), sphere)
    assert r.best_cost < 1e-8


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_rosenbrock_2d(seed):
    r = optimize(_cfg(2, -5.0, 5.0, (-2.0, 2.0), max_generations=500, seed=seed), rosenbrock)
    assert r.best_cost < 1e-4
    assert r.best_vector == pytest.approx((1.0, 1.0), abs=1e-2)


def test_benchmark_oracles():
    assert sphere([1.0, 2.0]) == 5.0
    assert rosenbrock([1.0, 1.0, 1.0]) == 0.0
    assert rosenbrock([0.0, 0.0]) == 1.0


def test_deterministic():
    cfg = _cfg(4, -2.0, 3.0, (1.0, 0.5, -1.0, 2.0), max_generations=40, seed=123)
    a, b = optimize(cfg, rosenbrock), optimize(cfg, rosenbrock)
    assert np.array_equal(a.best_vector, b.best_vector)
    assert a.best_cost == b.best_cost and a.history == b.history
    c = optimize(CmaConfig(**{**cfg.__dict__, "seed": 124}), rosenbrock)
    assert c.history != a.history


def test_constant_cost():
    r = optimize(_cfg(3, 0.0, 1.0, (0.5,) * 3, max_generations=50), lambda x: 1.0)
    assert r.best_cost == 1.0
    assert r.best_vector == pytest.approx((0.5,) * 3)
    assert r.history[-1].sigma <= 5 * 0.3


def test_history_monotone_and_vectors_in_bounds():
    lo, hi = np.array([0.0, -1.0, 2.0]), np.array([1.0, 0.0, 5.0])
    seen = []

    def cost(x):
        seen.append(np.array(x))
        return float(np.sum((x - np.array([3.0, 3.0, -3.0])) ** 2))  # optimum outside the box
    r = optimize(CmaConfig(3, tuple(lo), tuple(hi), (0.5, -0.5, 3.0), max_generations=60), cost)
    bests = [g.best for g in r.history]
    assert all(a >= b for a, b in zip(bests, bests[1:]))
    for x in seen + [r.best_vector]:
        assert np.all(x >= lo) and np.all(x <= hi)
    assert r.best_vector == pytest.approx((1.0, 0.0, 2.0), abs=1e-6)
    target = np.array([3.0, 3.0, -3.0])
    assert r.best_cost == min(float(np.sum((x - target) ** 2)) for x in seen)


def test_failures_become_penalties():
    def cost(x):
        if x[0] > 0.5:
            return float("nan")
        return float(np.sum(x**2))
    r = optimize(_cfg(2, -1.0, 1.0, (0.9, 0.9), max_generations=30), cost)
    assert np.isfinite(r.best_cost) and r.best_vector[0] <= 0.5


@pytest.mark.parametrize("kw", [
    dict(population=3), dict(initial_sigma=0.0), dict(max_generations=0),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        _cfg(2, 0.0, 1.0, (0.5, 0.5), **kw)


def test_config_bounds_validation():
    with pytest.raises(ValueError):
        CmaConfig(2, (0.0, 1.0), (1.0, 1.0), (0.5, 1.0))
    with pytest.raises(ValueError):
        CmaConfig(2, (0.0, 0.0), (1.0, 1.0), (0.5, 1.5))
    with pytest.raises(ValueError):
        CmaConfig(2, (0.0,), (1.0,), (0.5,))


def test_history_csv(tmp_path):
    r = optimize(_cfg(2, -1.0, 1.0, (0.5, 0.5), max_generations=5), sphere)
    r.write_history_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "generation,best,mean,sigma" and len(lines) == 6
