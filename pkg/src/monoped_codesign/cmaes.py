"""(mu/mu_w, lambda)-CMA-ES over a box, run in unit-box coordinates.

Weighted recombination, cumulative step-size adaptation and the combined
rank-one/rank-mu covariance update follow Hansen's tutorial formulation.
Samples leaving the box are projected onto it; the projected points are both
evaluated and used in the update, so the mean never leaves the box.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

FAILURE_PENALTY = 1e6


def default_population(dimension: int) -> int:
    return 4 + int(math.floor(3 * math.log(dimension)))


@dataclass(frozen=True)
class CmaConfig:
    dimension: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    initial_mean: tuple[float, ...]
    initial_sigma: float = 0.3  # in unit-box coordinates
    population: int | None = None
    max_generations: int = 150
    seed: int = 0

    def __post_init__(self):
        for name in ("lower", "upper", "initial_mean"):
            value = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, value)
            if len(value) != self.dimension:
                raise ValueError(f"{name} has length {len(value)}, expected {self.dimension}")
        if self.dimension < 1:
            raise ValueError("dimension must be at least 1")
        if any(not lo < hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("lower must be strictly below upper in every coordinate")
        if any(not lo <= m <= hi for lo, m, hi in zip(self.lower, self.initial_mean, self.upper)):
            raise ValueError("initial mean outside the bounds")
        if not self.initial_sigma > 0:
            raise ValueError("initial_sigma must be positive")
        if self.population is not None and self.population < 4:
            raise ValueError("population must be at least 4")
        if self.max_generations < 1:
            raise ValueError("max_generations must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def lam(self) -> int:
        return self.population if self.population is not None else default_population(self.dimension)


@dataclass(frozen=True)
class Generation:
    index: int
    best: float  # best so far
    mean: float  # mean cost of this generation's samples
    sigma: float


@dataclass
class CmaResult:
    best_vector: np.ndarray
    best_cost: float
    history: list[Generation] = field(default_factory=list)
    evaluations: int = 0
    stop_reason: str = "max_generations"

    def write_history_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("generation", "best", "mean", "sigma"))
            for g in self.history:
                w.writerow((g.index, repr(g.best), repr(g.mean), repr(g.sigma)))


def _safe(cost) -> float:
    try:
        value = float(cost)
    except (TypeError, ValueError):
        return FAILURE_PENALTY
    return value if math.isfinite(value) else FAILURE_PENALTY


def optimize(config: CmaConfig, cost_fn: Callable[[np.ndarray], float],
             map_fn: Callable[[Callable, Iterable], Iterable] = map) -> CmaResult:
    """Minimise ``cost_fn`` over the box.  ``map_fn`` may be a parallel map;
    results are consumed in candidate order so the run stays deterministic."""
    n = config.dimension
    lam = config.lam
    mu = lam // 2
    lo = np.asarray(config.lower)
    span = np.asarray(config.upper) - lo

    w = math.log((lam + 1) / 2) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w**2)
    cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
    cs = (mueff + 2) / (n + mueff + 5)
    c1 = 2 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

    rng = np.random.default_rng(config.seed)
    mean = (np.asarray(config.initial_mean) - lo) / span
    sigma = config.initial_sigma
    C = np.eye(n)
    B = np.eye(n)
    D = np.ones(n)
    pc = np.zeros(n)
    ps = np.zeros(n)

    def physical(u):
        return lo + span * u

    best_u = mean.copy()
    best_cost = _safe(cost_fn(physical(best_u)))
    result = CmaResult(physical(best_u), best_cost, evaluations=1)

    for gen in range(config.max_generations):
        z = rng.standard_normal((lam, n))
        X = np.clip(mean + sigma * (z * D) @ B.T, 0.0, 1.0)
        costs = np.array([_safe(c) for c in map_fn(cost_fn, [physical(x) for x in X])])
        result.evaluations += lam

        order = np.argsort(costs, kind="stable")
        if costs[order[0]] < best_cost:
            best_cost = float(costs[order[0]])
            best_u = X[order[0]].copy()

        old = mean
        sel = X[order[:mu]]
        mean = w @ sel
        Y = (sel - old) / sigma
        yw = (mean - old) / sigma

        inv_sqrt_c = B @ np.diag(1 / D) @ B.T
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (inv_sqrt_c @ yw)
        ps_norm = np.linalg.norm(ps)
        hsig = ps_norm / math.sqrt(1 - (1 - cs) ** (2 * (gen + 1))) < (1.4 + 2 / (n + 1)) * chi_n
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * yw
        C = ((1 - c1 - cmu) * C
             + c1 * (np.outer(pc, pc) + (not hsig) * cc * (2 - cc) * C)
             + cmu * (Y.T * w) @ Y)
        sigma *= math.exp(min(1.0, (cs / damps) * (ps_norm / chi_n - 1)))

        C = np.triu(C) + np.triu(C, 1).T
        evals, B = np.linalg.eigh(C)
        D = np.sqrt(np.maximum(evals, 1e-300))

        result.history.append(Generation(gen, best_cost, float(np.mean(costs)), float(sigma)))
        if sigma * D.max() < 1e-15:
            result.stop_reason = "step_size_collapse"
            break

    result.best_vector = physical(best_u)
    result.best_cost = best_cost
    return result


def sphere(x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ x)


def rosenbrock(x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))
