"""Empirical lab for subset-sum approximation of targets by random
weight pools.

The question measured here: given n weights drawn i.i.d. uniform on
[-1, 1], how well can the best subset sum approximate every target in
[-0.5, 0.5]?  The universal quantifier is discretized on a grid (default
step 0.01); since the best achievable error is piecewise constant in the
target between midpoints of adjacent subset sums, a grid at resolution r
bounds the true supremum within r/2.

All exact searches run on a meet-in-the-middle split; every result is
cross-checkable against full 2**n enumeration (`naive_best_error`),
which the tests and acceptance suite do.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._kernels import min_gap_closest, min_gap_grid, subset_sums
from .errors import ContractError
from .rng import Rng

MAX_EXACT_N = 30
DEFAULT_GRID_STEP = 0.01


@dataclass(frozen=True)
class SubsetInstance:
    """One pool of i.i.d. uniform[-1, 1] weights."""

    weights: tuple

    @property
    def n(self) -> int:
        return len(self.weights)

    @staticmethod
    def draw(n: int, rng: Rng) -> "SubsetInstance":
        return SubsetInstance(weights=tuple(rng.uniform(-1.0, 1.0, n)))


def _halves(weights: np.ndarray):
    h = weights.size // 2
    sums_a = subset_sums(weights[:h])
    sums_b = subset_sums(weights[h:])
    order = np.argsort(sums_b, kind="stable")
    return h, sums_a, sums_b[order], order


def _as_weights(instance) -> np.ndarray:
    w = np.asarray(instance.weights if isinstance(instance, SubsetInstance)
                   else instance, dtype=np.float64)
    if w.size > MAX_EXACT_N:
        raise ContractError(
            f"exact search supports n <= {MAX_EXACT_N}, got {w.size}; "
            "use a sampled estimate for larger pools"
        )
    return w


def best_subset_error(instance, target: float):
    """Exact min over all 2**n subsets (empty included) of
    |target - subset sum|.  Returns (error, subset) where subset is a
    sorted tuple of chosen indices achieving the minimum."""
    w = _as_weights(instance)
    if w.size == 0:
        return abs(float(target)), ()
    h, sums_a, sorted_b, order = _halves(w)
    err, a_idx, b_pos = min_gap_closest(sums_a, sorted_b, float(target))
    b_idx = int(order[b_pos])
    subset = tuple(i for i in range(h) if a_idx >> i & 1) + tuple(
        h + i for i in range(w.size - h) if b_idx >> i & 1)
    return float(err), subset


def naive_best_error(instance, target: float) -> float:
    """Full-enumeration oracle: scans the entire 2**n cross product with
    no sorting or searching.  Gap arithmetic matches best_subset_error
    exactly: |(target - a) - b|."""
    w = _as_weights(instance)
    if w.size == 0:
        return abs(float(target))
    h = w.size // 2
    sums_a = subset_sums(w[:h])
    sums_b = subset_sums(w[h:])
    gaps = np.abs((float(target) - sums_a)[:, None] - sums_b[None, :])
    return float(gaps.min())


def default_grid(step: float = DEFAULT_GRID_STEP) -> np.ndarray:
    if step <= 0:
        raise ContractError(f"grid step must be positive, got {step}")
    count = int(round(1.0 / step))
    return -0.5 + step * np.arange(count + 1)


def coverage_epsilon(instance, grid: np.ndarray | None = None) -> float:
    """Worst best-subset error over a grid of targets in [-0.5, 0.5] (the
    discrete surrogate for 'every target')."""
    w = _as_weights(instance)
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=np.float64)
    if w.size == 0:
        return float(np.abs(grid).max())
    _, sums_a, sorted_b, _ = _halves(w)
    return float(min_gap_grid(sums_a, sorted_b, grid).max())


@dataclass
class BoundReport:
    """Outcome of a failure-rate estimate at one (n, epsilon)."""

    n: int
    epsilon: float
    trials: int
    failures: int
    grid_step: float
    seed: int

    @property
    def delta_hat(self) -> float:
        return self.failures / self.trials

    @property
    def implied_c(self) -> float | None:
        """n / log(2 / delta_hat): the constant the pool size would need
        for the observed failure rate.  None when no trial failed."""
        if self.failures == 0:
            return None
        return self.n / float(np.log(2.0 / self.delta_hat))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "trials": self.trials,
            "failures": self.failures,
            "delta_hat": self.delta_hat,
            "grid_step": self.grid_step,
            "seed": self.seed,
            "implied_c": self.implied_c,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def failure_rate(n: int, epsilon: float, trials: int, seed: int,
                 grid_step: float = DEFAULT_GRID_STEP) -> BoundReport:
    """Fraction of random pools whose worst grid error exceeds epsilon.

    Trial k draws its weights from the stream (seed, k), so trials are
    reproducible independently of evaluation order.
    """
    if trials < 1:
        raise ContractError(f"need at least one trial, got {trials}")
    grid = default_grid(grid_step)
    failures = 0
    for trial in range(trials):
        inst = SubsetInstance.draw(n, Rng(seed, stream=trial))
        if coverage_epsilon(inst, grid) > epsilon:
            failures += 1
    return BoundReport(n=n, epsilon=epsilon, trials=trials, failures=failures,
                       grid_step=grid_step, seed=seed)


def delta_sweep(ns, epsilon: float, trials: int, seed: int,
                grid_step: float = DEFAULT_GRID_STEP):
    """failure_rate across pool sizes; rows back the (n, eps, delta) CSV."""
    return [failure_rate(n, epsilon, trials, seed, grid_step) for n in ns]


def sweep_csv(reports) -> str:
    lines = ["n,epsilon,trials,failures,delta_hat,implied_c"]
    for r in reports:
        c = "" if r.implied_c is None else repr(r.implied_c)
        lines.append(f"{r.n},{repr(r.epsilon)},{r.trials},{r.failures},"
                     f"{repr(r.delta_hat)},{c}")
    return "\n".join(lines) + "\n"


def seq1_value_report(out_dim: int, pool_size: int, epsilon: float,
                      trials: int, seed: int) -> dict:
    """Single-token attention reduction: with one token the attention
    output is exactly the value projection, so matching the teacher's
    per-coordinate output map is a subset-sum search over the student's
    weight pool.  Per trial, each of `out_dim` teacher coefficients in
    [-0.5, 0.5] is approximated by the best subset of a fresh
    uniform[-1, 1] pool of `pool_size` weights; the trial's gap is the
    worst coordinate error, which bounds |teacher(x) - student(x)| for
    unit scalar inputs."""
    gaps = []
    for trial in range(trials):
        rng = Rng(seed, stream=trial)
        targets = rng.uniform(-0.5, 0.5, out_dim)
        worst = 0.0
        for c in range(out_dim):
            pool = SubsetInstance.draw(pool_size, rng.derive(10_000 + trial * out_dim + c))
            err, _ = best_subset_error(pool, targets[c])
            worst = max(worst, err)
        gaps.append(worst)
    gaps = np.array(gaps)
    return {
        "out_dim": out_dim,
        "pool_size": pool_size,
        "epsilon": epsilon,
        "trials": trials,
        "seed": seed,
        "max_gap": float(gaps.max()),
        "mean_gap": float(gaps.mean()),
        "within_epsilon_rate": float(np.mean(gaps <= epsilon)),
    }
