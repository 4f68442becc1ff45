"""Box-counting and correlation-sum dimension estimates for point clouds.

Both estimators reduce a point set to a statistic per scale and fit a line in
log-log coordinates. Box counting gives the number of occupied grid cells
``N(eps)`` (slope of ``log N`` against ``log(1/eps)``); the correlation sum gives
the fraction ``C(eps)`` of ordered pairs within ``eps`` (slope of ``log C``
against ``log eps``). On a finite sample both only see a band of scales: above
it the whole set fits in a few cells, below it every point is alone. The
default scale grid and fit window are chosen to stay inside that band.

These are surrogates for Hausdorff dimension, not measurements of it. Box
dimension can exceed Hausdorff dimension and the correlation dimension is at
most it, so agreement is only expected up to finite-size bands.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist

from .errors import DegenerateFitError, InsufficientDataError, ParameterError

SUBSAMPLE_ABOVE = 20_000
DEFAULT_ANCHORS = 20_000
DEFAULT_STEPS = 12
MIN_OCCUPANCY = 10.0


class Method(enum.Enum):
    BOXCOUNT = "boxcount"
    CORRSUM = "corrsum"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ParameterError(f"unknown method {value!r}; expected boxcount or corrsum") from None


@dataclass
class DimFit:
    method: Method
    eps_values: np.ndarray
    stats: np.ndarray
    slope: float
    intercept: float
    stderr: float
    residuals: np.ndarray
    fit_window: tuple[int, int]
    subsample_seed: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "eps_values": [float(e) for e in self.eps_values],
            "stats": [float(s) for s in self.stats],
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "residuals": [float(r) for r in self.residuals],
            "fit_window": list(self.fit_window),
            "subsample_seed": self.subsample_seed,
            **self.extra,
        }


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or len(pts) == 0:
        raise InsufficientDataError("need a non-empty (n, d) array of points")
    if not np.all(np.isfinite(pts)):
        raise ParameterError("points must have finite coordinates")
    return pts


def _cells(pts, eps, shift):
    anchor = pts.min(axis=0) - shift * eps
    return np.floor((pts - anchor) / eps).astype(np.int64)


def box_count(points, eps: float, shift: float = 0.0) -> int:
    """Occupied cells of the grid of side ``eps`` anchored at the minimum corner.

    ``shift`` moves the anchor to ``min - shift * eps`` so the count can be
    repeated on an offset grid.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps!r}")
    cells = _cells(_as_points(points), eps, shift)
    width = cells.max(axis=0) + 1
    if float(np.prod(width.astype(float))) < 2.0**62:
        # flatten to one integer key per cell, much faster than unique rows
        return len(np.unique(np.ravel_multi_index(cells.T, width)))
    return len(np.unique(cells, axis=0))


def box_counts(points, eps_values, shift: float = 0.0) -> np.ndarray:
    pts = _as_points(points)
    return np.array([box_count(pts, e, shift) for e in eps_values], dtype=np.int64)


def diameter(points) -> float:
    """Largest pairwise distance, exact (convex hull vertices for large sets)."""
    pts = _as_points(points)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 2000 and pts.shape[1] >= 2:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    if len(pts) > 5000:
        # degenerate hull; the bounding-box diagonal bounds the diameter within sqrt(d)
        span = pts.max(axis=0) - pts.min(axis=0)
        return float(np.sqrt((span * span).sum()))
    return float(pdist(pts).max())


def saturation_scale(points, occupancy: float = MIN_OCCUPANCY) -> float:
    """Smallest grid side at which occupied boxes still hold ``occupancy`` points on average.

    Below this scale most boxes hold a single point and ``N(eps)`` flattens
    towards ``n`` whatever the dimension, which biases box-count slopes low.
    """
    pts = _as_points(points)
    n = len(pts)
    target = n / occupancy
    hi = diameter(pts)
    if hi == 0 or target <= 1:
        raise DegenerateFitError("too few distinct points for a box-count scale range")
    lo = hi
    while box_count(pts, lo) < target:
        lo /= 2
        if lo < hi * 1e-15:
            raise DegenerateFitError("point set never reaches the requested occupancy")
    # bisect in log scale; N(eps) is close to monotone, and 40 halvings are plenty
    a, b = math.log(lo), math.log(hi)
    for _ in range(40):
        m = 0.5 * (a + b)
        if box_count(pts, math.exp(m)) >= target:
            a = m
        else:
            b = m
    return math.exp(b)


def default_eps_grid(points, steps: int = DEFAULT_STEPS, lower: str = "occupancy") -> np.ndarray:
    """Log-spaced scales from diameter/4 down to a lower cutoff.

    ``lower="occupancy"`` stops at ``saturation_scale`` (the box-count default);
    ``lower="nn"`` stops at the 1st-percentile nearest-neighbour distance.
    """
    pts = _as_points(points)
    if len(pts) < 2:
        raise InsufficientDataError("need at least two points for a scale grid")
    diam = diameter(pts)
    if diam == 0:
        raise DegenerateFitError("all points coincide; no scale range")
    hi = diam / 4
    if lower == "occupancy":
        lo = saturation_scale(pts)
    elif lower == "nn":
        dist, _ = cKDTree(pts).query(pts, k=2)
        nn = dist[:, 1]
        nn = nn[nn > 0]
        if nn.size == 0:
            raise DegenerateFitError("all points coincide; no scale range")
        lo = float(np.percentile(nn, 1))
    else:
        raise ParameterError(f"unknown lower cutoff {lower!r}")
    if not lo < hi:
        raise DegenerateFitError("lower cutoff is not below diameter/4")
    return np.geomspace(hi, lo, steps)


def default_window(n_scales: int) -> tuple[int, int]:
    cut = int(0.2 * n_scales)
    return cut, n_scales - cut


def fit_dimension(eps_values, stats, method="boxcount",
                  window: tuple[int, int] | None = None) -> DimFit:
    """Least-squares slope of the log statistic against log scale.

    ``window`` is a half-open index range into the scales; the default drops
    the largest and smallest 20%.
    """
    method = Method.parse(method)
    eps = np.asarray(eps_values, dtype=float)
    y_all = np.asarray(stats, dtype=float)
    if eps.shape != y_all.shape or eps.ndim != 1:
        raise ParameterError("eps_values and stats must be 1-d and of equal length")
    if np.any(~(eps > 0)):
        raise ParameterError("eps values must be positive")
    if np.any(np.diff(eps) >= 0):
        raise ParameterError("eps values must be strictly decreasing")
    lo, hi = default_window(len(eps)) if window is None else window
    if not 0 <= lo < hi <= len(eps):
        raise ParameterError(f"window {(lo, hi)} outside 0..{len(eps)}")
    if hi - lo < 4:
        raise InsufficientDataError(f"fit window holds {hi - lo} scales; need at least 4")
    e, s = eps[lo:hi], y_all[lo:hi]
    if np.any(~(s > 0)):
        raise DegenerateFitError("statistic vanishes inside the fit window; cannot take logs")
    x = -np.log(e) if method is Method.BOXCOUNT else np.log(e)
    y = np.log(s)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0:
        raise DegenerateFitError("scales are not distinct")
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    stderr = math.sqrt(float(resid @ resid) / (len(x) - 2) / sxx)
    return DimFit(method=method, eps_values=eps, stats=y_all, slope=slope, intercept=intercept,
                  stderr=stderr, residuals=resid, fit_window=(int(lo), int(hi)))


def _anchors(n: int, anchors: int | None, seed: int):
    if n <= SUBSAMPLE_ABOVE and anchors is None:
        return None
    s = min(n, DEFAULT_ANCHORS if anchors is None else anchors)
    return np.sort(np.random.default_rng(seed).choice(n, size=s, replace=False))


def correlation_sums(points, eps_values, seed: int = 0, anchors: int | None = None) -> np.ndarray:
    """``C(eps)`` for each scale; see ``correlation_sum``."""
    pts = _as_points(points)
    n = len(pts)
    if n < 2:
        raise InsufficientDataError("need at least two points")
    eps = np.asarray(eps_values, dtype=float)
    if np.any(~(eps > 0)):
        raise ParameterError("eps values must be positive")
    tree = cKDTree(pts)
    idx = _anchors(n, anchors, seed)
    if idx is None:
        other, rows = tree, n
    else:
        other, rows = cKDTree(pts[idx]), len(idx)
    # count_neighbors includes each point with itself; zero-distance pairs are removed too
    zero = other.count_neighbors(tree, 0.0)
    if zero == rows * n:
        raise DegenerateFitError("all points coincide")
    counts = np.asarray(other.count_neighbors(tree, eps), dtype=float)
    return (counts - zero) / (rows * (n - 1))


def correlation_sum(points, eps: float, seed: int = 0, anchors: int | None = None) -> float:
    """Fraction of ordered pairs ``i != j`` with ``0 < |p_i - p_j| <= eps``.

    Above 20000 points the pairs are restricted to a seeded uniform subsample
    of anchor points, each paired with every other point.
    """
    return float(correlation_sums(points, [eps], seed=seed, anchors=anchors)[0])


@njit(cache=True)
def _energy_sums(pts, rows, a, symmetric):
    # sum of d**-a and count over pairs (rows[i], j) at positive distance;
    # with ``symmetric`` only j > i is visited and both orders are counted
    n, d = pts.shape
    total = 0.0
    pairs = 0
    for ii in range(rows.shape[0]):
        i = rows[ii]
        start = i + 1 if symmetric else 0
        for j in range(start, n):
            s = 0.0
            for k in range(d):
                t = pts[i, k] - pts[j, k]
                s += t * t
            if s > 0.0:
                total += s ** (-0.5 * a)
                pairs += 1
    if symmetric:
        return 2.0 * total, 2 * pairs
    return total, pairs


def energy_estimate(points, a: float, seed: int = 0, anchors: int | None = None) -> float:
    """Mean of ``|p_i - p_j|**-a`` over ordered pairs at positive distance.

    Above 20000 points only pairs with a seeded subsample of anchors are used.
    """
    if not a > 0:
        raise ParameterError(f"exponent must be positive, got {a!r}")
    pts = np.ascontiguousarray(_as_points(points))
    if len(pts) < 2:
        raise InsufficientDataError("need at least two points")
    idx = _anchors(len(pts), anchors, seed)
    if idx is None:
        total, pairs = _energy_sums(pts, np.arange(len(pts)), float(a), True)
    else:
        total, pairs = _energy_sums(pts, idx, float(a), False)
    if pairs == 0:
        raise DegenerateFitError("all points coincide")
    return total / pairs


def estimate_dimension(points, method="boxcount", eps_values=None, window=None,
                       seed: int = 0, shift: float = 0.0) -> DimFit:
    """Scale sweep plus fit; ``eps_values`` defaults to ``default_eps_grid``."""
    method = Method.parse(method)
    pts = _as_points(points)
    if eps_values is None:
        eps = default_eps_grid(pts, lower="occupancy" if method is Method.BOXCOUNT else "nn")
    else:
        eps = np.asarray(eps_values, dtype=float)
    if method is Method.BOXCOUNT:
        stats = box_counts(pts, eps, shift=shift)
        used_seed = None
    else:
        stats = correlation_sums(pts, eps, seed=seed)
        used_seed = seed if len(pts) > SUBSAMPLE_ABOVE else None
    fit = fit_dimension(eps, stats, method, window)
    fit.subsample_seed = used_seed
    fit.extra["n_points"] = len(pts)
    return fit
