"""Monte Carlo checks of the exact tree-level identities.

Write ``Z(v) = tau(v)**-rho`` and ``W_n = sum_{|v|=n} Z(v)``. The checks are

* level moments: ``E sum_{|v|=n} tau(v)**-lam = (rho/lam)**n``;
* martingale: ``E W_n = 1`` and ``E W_n**2 = 2 - 2**-n``;
* level counts: ``E #{|v|=n : rho log tau(v) <= x} = x**n / n!``;
* telescoping: ``sum_{|v|=n} Z(v) W_{N-n}(v) = W_N`` on every tree.

Level sums need every vertex of the level, and a simulated tree only holds
vertices born by its horizon ``T``. Runs used here are therefore truncated by
time, never by vertex count, and ``horizon_for_levels`` picks ``T`` so that the
mass lost beyond ``T`` is a negligible fraction of each target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .branching import BranchingTree, generate_replicas, growth_exponent
from .errors import HorizonTooSmallError, IncompleteLevelError, ParameterError
from .profiles import ProcessParams, params_from_rho


@dataclass(frozen=True)
class LevelStats:
    level: int
    weight_sum: float
    count_below: int


@dataclass(frozen=True)
class MartingaleTrace:
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]


@dataclass(frozen=True)
class Estimate:
    """Summary of per-replica values. Heavy tails make the median informative."""

    mean: float
    stderr: float
    median: float
    trimmed_mean: float
    replicas: int

    def __float__(self):
        return self.mean

    @classmethod
    def of(cls, values) -> "Estimate":
        v = np.asarray(values, dtype=float)
        n = len(v)
        if n == 0:
            raise ParameterError("no replica values")
        se = float(np.std(v, ddof=1)) / math.sqrt(n) if n > 1 else math.inf
        return cls(mean=math.fsum(v) / n, stderr=se, median=float(np.median(v)),
                   trimmed_mean=float(stats.trim_mean(v, 0.1)), replicas=n)


def deepest_complete_level(tree: BranchingTree) -> int:
    _require_time_truncated(tree)
    if tree.max_depth is not None:
        return tree.max_depth
    return int(tree.depth.max())


def _require_time_truncated(tree):
    if tree.stop_reason not in ("time", "exhausted"):
        raise IncompleteLevelError(
            "tree was stopped by its vertex budget; level sums need a time-truncated tree")


def _require_level(tree, n):
    if n < 0:
        raise ParameterError("level must be non-negative")
    _require_time_truncated(tree)
    if tree.max_depth is not None and n > tree.max_depth:
        raise IncompleteLevelError(f"level {n} lies below the depth cap {tree.max_depth}")


def level_weight_sum(tree: BranchingTree, n: int, lam: float) -> float:
    """``sum_{|v|=n} tau(v)**-lam`` over the vertices born by the horizon."""
    _require_level(tree, n)
    return math.fsum(tree.tau[tree.depth == n] ** (-lam))


def level_count_below(tree: BranchingTree, n: int, x: float) -> int:
    """``#{v : |v| = n, rho log tau(v) <= x}``."""
    _require_level(tree, n)
    rho = tree.params.rho
    if x > rho * math.log(tree.horizon):
        raise HorizonTooSmallError(
            f"x={x} exceeds rho*log(horizon)={rho * math.log(tree.horizon):.4g}")
    return int(np.count_nonzero(rho * np.log(tree.tau[tree.depth == n]) <= x))


def level_stats(tree: BranchingTree, n: int, lam: float, x: float) -> LevelStats:
    return LevelStats(level=n, weight_sum=level_weight_sum(tree, n, lam),
                      count_below=level_count_below(tree, n, x))


def martingale_trace(tree: BranchingTree, n_max: int) -> MartingaleTrace:
    """``W_0 .. W_{n_max}`` with ``W_k = sum_{|v|=k} tau(v)**-rho``."""
    _require_level(tree, n_max)
    z = tree.tau ** (-tree.params.rho)
    vals = [math.fsum(z[tree.depth == k]) for k in range(n_max + 1)]
    return MartingaleTrace(np.asarray(vals))


def _ancestor_at(tree, ids, level):
    anc = ids.copy()
    steps = tree.depth[ids] - level
    for _ in range(int(steps.max()) if steps.size else 0):
        move = tree.depth[anc] > level
        anc[move] = tree.parent[anc[move]]
    return anc


def subtree_martingales(tree: BranchingTree, n: int, m: int):
    """``W_m(v)`` for every vertex ``v`` at level ``n``.

    ``W_m(v) = sum Z(z) / Z(v)`` over descendants ``z`` of ``v`` exactly ``m``
    levels below. Returns ``(ids, values)`` with ids ascending.
    """
    if m < 0:
        raise ParameterError("lookahead must be non-negative")
    _require_level(tree, n + m)
    rho = tree.params.rho
    ids = np.flatnonzero(tree.depth == n)
    if m == 0:
        return ids, np.ones(len(ids))
    deep = np.flatnonzero(tree.depth == n + m)
    anc = _ancestor_at(tree, deep, n)
    slot = np.searchsorted(ids, anc)
    ratio = (tree.tau[deep] / tree.tau[anc]) ** (-rho)
    sums = np.zeros(len(ids))
    np.add.at(sums, slot, ratio)
    return ids, sums


def limit_uniform_weights(tree: BranchingTree, n: int, m: int | None = None):
    """Approximate limit-measure weights ``Z(v) W_m(v)`` of the level-``n`` vertices.

    ``m`` defaults to the lookahead reaching the deepest complete level.
    Returns ``(ids, weights, m)``.
    """
    if m is None:
        m = deepest_complete_level(tree) - n
        if m < 1:
            raise IncompleteLevelError(f"no complete level below level {n}")
    ids, w = subtree_martingales(tree, n, m)
    return ids, tree.tau[ids] ** (-tree.params.rho) * w, m


def telescoping_gap(tree: BranchingTree, n: int, deepest: int) -> float:
    """Absolute gap between ``sum_{|v|=n} Z(v) W_{N-n}(v)`` and ``W_N``."""
    ids, w = subtree_martingales(tree, n, deepest - n)
    lhs = math.fsum(tree.tau[ids] ** (-tree.params.rho) * w)
    rhs = martingale_trace(tree, deepest)[deepest]
    return abs(lhs - rhs)


def level_moment(rho: float, lam: float, n: int) -> float:
    return (rho / lam) ** n


def truncated_level_moment(rho: float, lam: float, n: int, horizon: float) -> float:
    """Expected level-``n`` sum of ``tau**-lam`` restricted to ``tau <= horizon``.

    Level-``n`` values of ``rho log tau`` have intensity ``x**(n-1)/(n-1)!``.
    """
    if n == 0:
        return 1.0
    c = lam / rho
    return c ** (-n) * float(stats.gamma.cdf(rho * math.log(horizon), n, scale=1.0 / c))


def second_moment(n: int) -> float:
    """``E W_n**2`` from ``E W_n**2 = 3/2 + (E W_{n-1}**2 - 1)/2`` with ``E W_0**2 = 1``."""
    m = 1.0
    for _ in range(n):
        m = 1.5 + 0.5 * (m - 1.0)
    return m


def level_count_mean(n: int, x: float) -> float:
    return x ** n / math.factorial(n)


def horizon_for_levels(rho: float, n_max: int, lam_min: float, rel_tol: float = 1e-4) -> float:
    """Smallest ``T`` losing at most ``rel_tol`` of every level moment up to ``n_max``.

    The worst case is the deepest level and the smallest exponent.
    """
    if n_max < 1:
        return math.e
    c = lam_min / rho
    x = float(stats.gamma.isf(rel_tol, n_max, scale=1.0 / c))
    return math.exp(x / rho)


# ----------------------------------------------------------------------------
# batch checks, as reported by the `diagnose` command


@dataclass
class CheckResult:
    identity: str
    theoretical: float
    empirical: float
    stderr: float
    passed: bool
    tolerance: str = "3se"
    detail: str = ""

    def to_dict(self):
        return asdict(self)


def _within(est: Estimate, target: float, k: float = 3.0) -> bool:
    return abs(est.mean - target) <= k * est.stderr


def diagnostic_trees(rho: float, replicas: int, levels: int, lam_min: float | None = None,
                     seed: int = 0, rel_tol: float = 1e-4, profile="gaussian", d: int = 2):
    """Depth-capped, time-truncated replicas suitable for level statistics."""
    params = params_from_rho(d, rho, profile, seed=seed)
    horizon = horizon_for_levels(rho, levels, rho if lam_min is None else lam_min, rel_tol)
    for tree, _ in generate_replicas(params, replicas, max_vertices=10**9, max_time=horizon,
                                     max_depth=levels):
        yield tree


def check_moments(trees: Sequence[BranchingTree], lams: Iterable[float],
                  levels: Iterable[int]) -> list[CheckResult]:
    out = []
    rho = trees[0].params.rho
    for lam in lams:
        for n in levels:
            est = Estimate.of([level_weight_sum(t, n, lam) for t in trees])
            target = level_moment(rho, lam, n)
            out.append(CheckResult(f"moment(rho={rho:g},lam={lam:g},n={n})", target, est.mean,
                                   est.stderr, _within(est, target)))
    return out


def check_martingale(trees: Sequence[BranchingTree], levels: int,
                     telescoping_tol: float = 1e-10) -> list[CheckResult]:
    traces = np.array([martingale_trace(t, levels).values for t in trees])
    out = []
    for n in range(1, levels + 1):
        est = Estimate.of(traces[:, n])
        out.append(CheckResult(f"martingale_mean(n={n})", 1.0, est.mean, est.stderr,
                               _within(est, 1.0)))
        est = Estimate.of(traces[:, n] ** 2)
        target = second_moment(n)
        out.append(CheckResult(f"martingale_second_moment(n={n})", target, est.mean,
                               est.stderr, _within(est, target)))
    worst = 0.0
    for t in trees:
        for n in range(levels):
            worst = max(worst, telescoping_gap(t, n, levels))
    out.append(CheckResult("telescoping", 0.0, worst, 0.0, worst <= telescoping_tol,
                           tolerance=f"abs<={telescoping_tol:g}"))
    return out


def check_level_counts(trees: Sequence[BranchingTree], levels: Iterable[int],
                       xs: Iterable[float]) -> list[CheckResult]:
    out = []
    for x in xs:
        for n in levels:
            est = Estimate.of([level_count_below(t, n, x) for t in trees])
            target = level_count_mean(n, x)
            out.append(CheckResult(f"levelcount(n={n},x={x:g})", target, est.mean, est.stderr,
                                   _within(est, target)))
    return out


def check_growth(rho: float, replicas: int, vertices: int = 10_000, seed: int = 0,
                 rel_tol: float = 0.10, profile="gaussian", d: int = 2) -> CheckResult:
    params = params_from_rho(d, rho, profile, seed=seed)
    traces = [tr for _, tr in generate_replicas(params, replicas, vertices)]
    fit = growth_exponent(traces, rho)
    return CheckResult(f"growth(rho={rho:g})", rho, fit.slope, fit.stderr,
                       abs(fit.slope - rho) <= rel_tol * rho, tolerance=f"rel<={rel_tol:g}")


def run_identity(identity: str, rho: float = 1.0, replicas: int = 5000, levels: int = 3,
                 seed: int = 0) -> list[CheckResult]:
    """Run one named identity check: moment, martingale, levelcount or growth."""
    if identity == "growth":
        return [check_growth(rho, replicas, seed=seed)]
    if identity == "moment":
        trees = list(diagnostic_trees(rho, replicas, levels, seed=seed))
        return check_moments(trees, [rho, 2 * rho], range(1, levels + 1))
    if identity == "martingale":
        trees = list(diagnostic_trees(rho, replicas, levels, seed=seed))
        return check_martingale(trees, levels)
    if identity == "levelcount":
        trees = list(diagnostic_trees(rho, replicas, levels, seed=seed))
        return check_level_counts(trees, range(1, levels + 1), [0.5, 1.0])
    raise ParameterError(f"unknown identity {identity!r}")
