"""Discrete-time agoraphobic point processes.

Both variants grow a rooted tree of points one accepted point at a time. The
root sits at the origin and never takes part in distance computations. When
the tree holds ``n`` points (root included), a Bernoulli trial with success
probability ``theta / (theta + n - 1)`` (``0/0 = 1``) decides whether the next
point is a seed: a uniform point of the unit ball attached to the root.
Otherwise proposals are drawn until one is accepted:

* smooth: ``X`` uniform in the unit ball, accepted with probability
  ``exp(-Delta * n**(1/alpha))`` where ``Delta`` is the distance to the nearest
  non-root point, which becomes the parent;
* hard threshold: ``z`` uniform among non-root points, ``Y`` uniform in the
  ball of radius ``n**(-1/alpha)`` around ``z``, accepted with probability
  ``1/k`` where ``k`` counts non-root points within the count radius of ``Y``;
  ``z`` becomes the parent.

The seeding trial is made once per point; only the spatial proposal is
repeated on rejection. The number of seeds after ``n`` points then grows like
``theta * log((n + theta) / theta)``, as for tables in a Chinese restaurant
process.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from numba import njit

from .errors import InsufficientDataError, ParameterError, RejectionLimitError
from .spatial_index import (PointIndex, distances_rows, grid_count, grid_insert, grid_nearest,
                            grid_rebuild)

ROOT_PARENT = -1


class Model(enum.Enum):
    SMOOTH = "smooth"
    HARD = "hard"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ParameterError(f"unknown model {value!r}; expected smooth or hard") from None


class CountRadius(enum.Enum):
    PROPOSAL = "proposal"    # n**(-1/alpha), same as the proposal radius
    INVERSE_N = "inverse-n"  # 1/n

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ParameterError(f"unknown count radius {value!r}") from None


@dataclass(frozen=True)
class AgoraConfig:
    d: int = 2
    alpha: float = 1.5
    theta: float = 1.0
    n_points: int = 1000
    model: Model = Model.HARD
    max_rejections_per_point: int = 10**6
    seed: int = 0
    count_radius: CountRadius = CountRadius.PROPOSAL

    def __post_init__(self):
        object.__setattr__(self, "model", Model.parse(self.model))
        object.__setattr__(self, "count_radius", CountRadius.parse(self.count_radius))
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 2:
            raise ParameterError(f"d must be an integer >= 2, got {self.d!r}")
        if not 0 < self.alpha < self.d:
            raise ParameterError(f"alpha must satisfy 0 < alpha < d, got {self.alpha!r}")
        if not (self.theta >= 0 and math.isfinite(self.theta)):
            raise ParameterError(f"theta must be non-negative, got {self.theta!r}")
        if self.n_points < 0:
            raise ParameterError("n_points must be non-negative")
        if self.max_rejections_per_point < 1:
            raise ParameterError("max_rejections_per_point must be positive")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["model"] = self.model.value
        out["count_radius"] = self.count_radius.value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "AgoraConfig":
        keys = cls.__dataclass_fields__
        return cls(**{k: v for k, v in data.items() if k in keys})


@dataclass
class AgoraStats:
    proposals: int = 0
    rejections: int = 0
    seeds: int = 0


class PointTree:
    """Points in arrival order; point 0 is the origin root."""

    def __init__(self, index: PointIndex, parent=None, stats: AgoraStats | None = None):
        self.index = index
        self._parent = np.full(max(len(index.pts), 1), ROOT_PARENT, dtype=np.int64)
        if parent is not None:
            parent = np.asarray(parent, dtype=np.int64)
            if len(parent) != len(index):
                raise ParameterError("parent array length differs from the number of points")
            self._parent[: len(parent)] = parent
        self.stats = stats or AgoraStats()
        self.model: str | None = None

    @classmethod
    def root_only(cls, d: int, capacity: int = 1024) -> "PointTree":
        index = PointIndex(d, capacity=capacity)
        index.insert(np.zeros(d))
        return cls(index=index)

    @classmethod
    def from_arrays(cls, points, parent, stats: AgoraStats | None = None) -> "PointTree":
        points = np.asarray(points, dtype=float)
        index = PointIndex(points.shape[1], capacity=len(points))
        for p in points:
            index.insert(p)
        return cls(index=index, parent=parent, stats=stats)

    def __len__(self) -> int:
        return len(self.index)

    @property
    def d(self) -> int:
        return self.index.d

    @property
    def points(self) -> np.ndarray:
        return self.index.points

    @property
    def parents(self) -> np.ndarray:
        return self._parent[: len(self)]

    parent = parents

    @property
    def is_seed(self) -> np.ndarray:
        return self.parents == 0

    def copy(self) -> "PointTree":
        out = PointTree.from_arrays(self.points, self.parents, AgoraStats(**asdict(self.stats)))
        out.model = self.model
        return out

    def reserve(self, capacity: int) -> None:
        self.index.reserve(capacity)
        if len(self._parent) < len(self.index.pts):
            grown = np.full(len(self.index.pts), ROOT_PARENT, dtype=np.int64)
            grown[: len(self)] = self.parents
            self._parent = grown

    def append(self, x, parent: int) -> int:
        self.reserve(len(self) + 1)
        i = self.index.insert(x)
        self._parent[i] = int(parent)
        if parent == 0:
            self.stats.seeds += 1
        return i

    def check(self) -> None:
        par = self.parents
        assert par[0] == ROOT_PARENT and np.all(self.points[0] == 0.0)
        ids = np.arange(1, len(par))
        assert np.all((par[1:] >= 0) & (par[1:] < ids))
        assert int(np.count_nonzero(par == 0)) == self.stats.seeds


def min_dist(x, tree: PointTree) -> tuple[float, int]:
    """Distance from ``x`` to the nearest non-root point, and that point's id."""
    if len(tree) < 2:
        raise InsufficientDataError("tree has no non-root points")
    i, dist = tree.index.nearest(x, exclude_root=True)
    return dist, i


def seed_probability(theta: float, n: int) -> float:
    """Chance that the point added to an ``n``-point tree is a seed."""
    denom = theta + n - 1
    return 1.0 if denom == 0 else theta / denom


def count_radius(cfg: AgoraConfig, n: int) -> float:
    if cfg.count_radius is CountRadius.INVERSE_N:
        return 1.0 / n
    return n ** (-1.0 / cfg.alpha)


# ---------------------------------------------------------------------------
# compiled growth loop

_OK, _LIMIT, _EMPTY = 0, 1, 2


@njit(cache=True)
def _ball(rng, d, out):
    # normal direction scaled by U**(1/d); redrawn if rounding leaves the ball
    while True:
        s = 0.0
        for k in range(d):
            out[k] = rng.standard_normal()
            s += out[k] * out[k]
        if s == 0.0:
            continue
        scale = rng.random() ** (1.0 / d) / math.sqrt(s)
        s = 0.0
        for k in range(d):
            out[k] *= scale
            s += out[k] * out[k]
        if math.sqrt(s) <= 1.0:
            return


@njit(cache=True)
def _hard_accept(pts, nxt, keys, head, ist, fst, y, r_count, u):
    """Accept with probability 1/k given a uniform ``u``; k counts non-root points near ``y``."""
    k = grid_count(pts, nxt, keys, head, ist, fst, y, r_count, 1)
    return u * max(k, 1) < 1.0


@njit(cache=True)
def _acceptance_runs(pts, nxt, keys, head, ist, fst, y, r_count, rng, draws):
    hits = 0
    for _ in range(draws):
        if _hard_accept(pts, nxt, keys, head, ist, fst, y, r_count, rng.random()):
            hits += 1
    return hits


@njit(cache=True)
def _grow(pts, nxt, keys, head, ist, fst, parent, counters, rng, n_target,
          smooth, alpha, theta, inverse_n, max_rej):
    """Append points until the tree holds ``n_target`` of them.

    ``counters`` holds (proposals, rejections, seeds). Returns a status code
    and leaves the state consistent after every accepted point.
    """
    d = pts.shape[1]
    x = np.empty(d)
    y = np.empty(d)
    while ist[0] < n_target:
        n = ist[0]
        radius = n ** (-1.0 / alpha)
        if radius < 0.5 * fst[0]:
            grid_rebuild(pts, nxt, keys, head, ist, fst, radius)
        denom = theta + n - 1
        p_seed = 1.0 if denom == 0 else theta / denom
        if rng.random() < p_seed:
            _ball(rng, d, x)
            i = grid_insert(pts, nxt, keys, head, ist, fst, x)
            parent[i] = 0
            counters[0] += 1
            counters[2] += 1
            continue
        if n < 2:
            return _EMPTY
        tried = 0
        while True:
            if tried >= max_rej:
                return _LIMIT
            tried += 1
            counters[0] += 1
            if smooth:
                _ball(rng, d, x)
                u = rng.random()
                # only points within -log(u) / n**(1/alpha) can pass the test
                sharp = n ** (1.0 / alpha)
                reach = -math.log(u) / sharp if u > 0.0 else math.inf
                j, dist = grid_nearest(pts, nxt, keys, head, ist, fst, x,
                                       reach * (1.0 + 1e-9), 1)
                if j >= 0 and u < math.exp(-dist * sharp):
                    i = grid_insert(pts, nxt, keys, head, ist, fst, x)
                    parent[i] = j
                    break
            else:
                z = rng.integers(1, n)
                _ball(rng, d, x)
                s = 0.0
                for k in range(d):
                    y[k] = pts[z, k] + radius * x[k]
                    t = y[k] - pts[z, k]
                    s += t * t
                u = rng.random()
                # rounding may carry Y a hair past the proposal radius; such draws are void
                if math.sqrt(s) <= radius:
                    r_count = 1.0 / n if inverse_n else radius
                    if _hard_accept(pts, nxt, keys, head, ist, fst, y, r_count, u):
                        i = grid_insert(pts, nxt, keys, head, ist, fst, y)
                        parent[i] = z
                        break
            counters[1] += 1
    return _OK


def _advance(tree: PointTree, cfg: AgoraConfig, rng: np.random.Generator, n_target: int) -> None:
    tree.reserve(n_target)
    counters = np.array([tree.stats.proposals, tree.stats.rejections, tree.stats.seeds],
                        dtype=np.int64)
    status = _grow(*tree.index.state, tree._parent, counters, rng, n_target,
                   cfg.model is Model.SMOOTH, float(cfg.alpha), float(cfg.theta),
                   cfg.count_radius is CountRadius.INVERSE_N, int(cfg.max_rejections_per_point))
    tree.stats = AgoraStats(*(int(c) for c in counters))
    if status == _EMPTY:
        raise InsufficientDataError("proposal needs a non-root point but only the root exists")
    if status == _LIMIT:
        raise RejectionLimitError(
            f"no acceptance after {cfg.max_rejections_per_point} proposals at n={len(tree)}",
            stats=AgoraStats(**asdict(tree.stats)), tree=tree)


def step_smooth(tree: PointTree, cfg: AgoraConfig, rng: np.random.Generator) -> PointTree:
    """Append one point under the smooth minimum-distance rule."""
    if cfg.model is not Model.SMOOTH:
        cfg = replace(cfg, model=Model.SMOOTH)
    _advance(tree, cfg, rng, len(tree) + 1)
    return tree


def step_hard(tree: PointTree, cfg: AgoraConfig, rng: np.random.Generator) -> PointTree:
    """Append one point under the hard-threshold rule."""
    if cfg.model is not Model.HARD:
        cfg = replace(cfg, model=Model.HARD)
    _advance(tree, cfg, rng, len(tree) + 1)
    return tree


def hard_acceptance_probability(tree: PointTree, y, cfg: AgoraConfig) -> float:
    """``1/k`` for a hard-threshold proposal ``y`` against the current tree."""
    k = tree.index.count_within(y, count_radius(cfg, len(tree)), exclude_root=True)
    return 1.0 / max(k, 1)


def acceptance_frequency(tree: PointTree, y, cfg: AgoraConfig, draws: int,
                         rng: np.random.Generator) -> float:
    """Fraction of ``draws`` hard-threshold acceptance trials that accept the fixed proposal ``y``.

    Uses the same compiled decision as the generator.
    """
    y = tree.index._query_point(y)
    hits = _acceptance_runs(*tree.index.state, y, count_radius(cfg, len(tree)), rng, int(draws))
    return hits / draws


def generate_discrete(cfg: AgoraConfig, rng: np.random.Generator | None = None) -> PointTree:
    """Grow ``cfg.n_points`` accepted points beyond the root."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    tree = PointTree.root_only(cfg.d, capacity=cfg.n_points + 1)
    tree.model = cfg.model.value
    if cfg.n_points:
        _advance(tree, cfg, rng, cfg.n_points + 1)
    return tree


def expected_seeds(theta: float, n: int) -> float:
    """Exact mean seed count after ``n`` points: ``sum_k theta/(theta+k-1)``."""
    return math.fsum(seed_probability(theta, k) for k in range(1, n + 1))


def seed_growth(theta: float, n: int) -> float:
    """Asymptotic seed count ``theta * log((n + theta) / theta)``."""
    if theta == 0:
        return 1.0
    return theta * math.log((n + theta) / theta)


def distance_to_parent(tree: PointTree) -> np.ndarray:
    pts = tree.points
    par = tree.parents
    out = np.zeros(len(tree))
    out[1:] = distances_rows(pts[1:], pts[par[1:]])
    return out
