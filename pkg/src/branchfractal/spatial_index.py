"""Exact nearest-neighbour and closed-ball counting over a growing point set.

Points are kept in insertion order and bucketed in a hashed uniform grid.
Queries scan the rectangle of cells that can hold a point within the query
radius and fall back to a linear scan when that rectangle has more cells than
there are points. Results are exact: distances are always computed as
``sqrt(sum((p - q)**2))`` in coordinate order, the ball is closed and ties go
to the lowest id.

The cell size only affects speed. Callers whose query radius shrinks over
time (the discrete generators) shrink the grid with ``set_cell_size``; the
grid is rebuilt once the radius has halved.

The compiled kernels take the grid state as plain arrays so the generators in
``agora`` can call them from their own compiled loops.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import InsufficientDataError, ParameterError

# relative padding of the scanned rectangle, absorbing rounding in (q +- r) / h
_PAD = 1e-12
# absolute padding: offsets below this square to (sub)normal zero, so a point
# that far away can have computed distance 0
_TINY = 1e-150
_H_MUL = np.int64(0x9E3779B97F4A7C15 - (1 << 64))


def distances(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Euclidean distances from each row of ``points`` to ``q``."""
    diff = points - q
    return np.sqrt((diff * diff).sum(axis=-1))


def distances_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise distances between two equally shaped arrays."""
    diff = a - b
    return np.sqrt((diff * diff).sum(axis=-1))


# ---------------------------------------------------------------------------
# compiled grid kernels
#
# state: pts (cap, d), nxt (cap,), keys (M, d), head (M,), ist = [n, M],
# fst = [h, lo_0 .. lo_{d-1}, hi_0 .. hi_{d-1}] (bounding box of the points)


@njit(cache=True, inline="always")
def _dist(pts, i, q):
    s = 0.0
    for k in range(q.shape[0]):
        t = pts[i, k] - q[k]
        s += t * t
    return math.sqrt(s)


@njit(cache=True)
def _slot(keys, head, cell, mask):
    h = np.int64(0)
    for k in range(cell.shape[0]):
        h = (h ^ cell[k]) * _H_MUL
    s = (h ^ (h >> 31)) & mask
    d = cell.shape[0]
    while True:
        if head[s] < 0:
            return s
        same = True
        for k in range(d):
            if keys[s, k] != cell[k]:
                same = False
                break
        if same:
            return s
        s = (s + 1) & mask


@njit(cache=True)
def _link(pts, nxt, keys, head, ist, fst, i):
    d = pts.shape[1]
    h = fst[0]
    cell = np.empty(d, dtype=np.int64)
    for k in range(d):
        c = math.floor(pts[i, k] / h)
        # far-out points only ever turn up in full scans, so any key will do
        cell[k] = np.int64(c) if abs(c) < 4e18 else np.int64(0)
    s = _slot(keys, head, cell, ist[1] - 1)
    if head[s] < 0:
        for k in range(d):
            keys[s, k] = cell[k]
    nxt[i] = head[s]
    head[s] = i


@njit(cache=True)
def grid_insert(pts, nxt, keys, head, ist, fst, p):
    n = ist[0]
    d = pts.shape[1]
    for k in range(d):
        pts[n, k] = p[k]
        if n == 0 or p[k] < fst[1 + k]:
            fst[1 + k] = p[k]
        if n == 0 or p[k] > fst[1 + d + k]:
            fst[1 + d + k] = p[k]
    _link(pts, nxt, keys, head, ist, fst, n)
    ist[0] = n + 1
    return n


@njit(cache=True)
def grid_rebuild(pts, nxt, keys, head, ist, fst, h):
    fst[0] = h
    head[:] = -1
    for i in range(ist[0]):
        _link(pts, nxt, keys, head, ist, fst, i)


@njit(cache=True)
def _scan(pts, nxt, keys, head, ist, fst, q, r, lo, count_only):
    """Closed-ball scan. Returns (count, best_id, best_dist) over ids >= lo."""
    n = ist[0]
    d = pts.shape[1]
    h = fst[0]
    clo = np.empty(d, dtype=np.int64)
    chi = np.empty(d, dtype=np.int64)
    cells = 1.0
    for k in range(d):
        pad = _PAD * (abs(q[k]) + r) + _TINY
        a = q[k] - r - pad
        b = q[k] + r + pad
        # clip to the bounding box of the stored points
        if a < fst[1 + k]:
            a = fst[1 + k]
        if b > fst[1 + d + k]:
            b = fst[1 + d + k]
        if a > b:
            return 0, -1, math.inf
        if max(abs(a), abs(b)) / h > 4e18:
            # cell indices would overflow int64; scan everything instead
            cells = math.inf
            break
        clo[k] = np.int64(math.floor(a / h))
        chi[k] = np.int64(math.floor(b / h))
        cells *= chi[k] - clo[k] + 1
    count = 0
    best = math.inf
    best_id = -1
    if cells * 4.0 > n - lo:
        for i in range(lo, n):
            dist = _dist(pts, i, q)
            if dist <= r:
                count += 1
                if not count_only and (dist < best or (dist == best and i < best_id)):
                    best = dist
                    best_id = i
        return count, best_id, best
    mask = ist[1] - 1
    cell = clo.copy()
    while True:
        s = _slot(keys, head, cell, mask)
        i = head[s]
        while i >= 0:
            if i >= lo:
                dist = _dist(pts, i, q)
                if dist <= r:
                    count += 1
                    if not count_only and (dist < best or (dist == best and i < best_id)):
                        best = dist
                        best_id = i
            i = nxt[i]
        k = 0
        while k < d:
            cell[k] += 1
            if cell[k] <= chi[k]:
                break
            cell[k] = clo[k]
            k += 1
        if k == d:
            break
    return count, best_id, best


@njit(cache=True)
def grid_count(pts, nxt, keys, head, ist, fst, q, r, lo):
    return _scan(pts, nxt, keys, head, ist, fst, q, r, lo, True)[0]


@njit(cache=True)
def grid_nearest(pts, nxt, keys, head, ist, fst, q, rmax, lo):
    """Nearest point with id >= lo within ``rmax`` (may be inf); (-1, inf) if none."""
    if ist[0] <= lo:
        return -1, math.inf
    if rmax < math.inf:
        _, j, dist = _scan(pts, nxt, keys, head, ist, fst, q, rmax, lo, False)
        return j, dist
    d = pts.shape[1]
    # distance from q to the bounding box bounds how far the search must reach
    # (per-axis bounds, so tiny offsets cannot underflow when squared)
    gap = 0.0
    span = 0.0
    for k in range(d):
        gap = max(gap, fst[1 + k] - q[k], q[k] - fst[1 + d + k])
        span = max(span, abs(q[k] - fst[1 + k]), abs(q[k] - fst[1 + d + k]))
    r = max(fst[0], gap)
    reach = math.sqrt(d) * span * (1.0 + 1e-9) + _TINY
    while True:
        if r >= reach:
            r = reach
        _, j, dist = _scan(pts, nxt, keys, head, ist, fst, q, r, lo, False)
        if j >= 0 or r >= reach:
            return j, dist
        r *= 2.0


@njit(cache=True)
def grid_within(pts, nxt, keys, head, ist, fst, q, r, lo):
    n = ist[0]
    out = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(lo, n):
        if _dist(pts, i, q) <= r:
            out[m] = i
            m += 1
    return out[:m]


def _table_size(cap):
    m = 64
    while m < 2 * cap:
        m *= 2
    return m


class PointIndex:
    """Insertion-ordered point store with exact ball queries."""

    def __init__(self, d: int, capacity: int = 1024, cell_size: float = 1.0):
        if d < 1:
            raise ParameterError("dimension must be positive")
        if not cell_size > 0:
            raise ParameterError("cell size must be positive")
        self.d = d
        cap = max(int(capacity), 1)
        self.pts = np.zeros((cap, d))
        self.nxt = np.full(cap, -1, dtype=np.int64)
        m = _table_size(cap)
        self.keys = np.zeros((m, d), dtype=np.int64)
        self.head = np.full(m, -1, dtype=np.int64)
        self.ist = np.array([0, m], dtype=np.int64)
        self.fst = np.zeros(1 + 2 * d)
        self.fst[0] = cell_size

    @property
    def state(self):
        return self.pts, self.nxt, self.keys, self.head, self.ist, self.fst

    def __len__(self) -> int:
        return int(self.ist[0])

    @property
    def cell_size(self) -> float:
        return float(self.fst[0])

    @property
    def points(self) -> np.ndarray:
        return self.pts[: len(self)]

    def __getitem__(self, i: int) -> np.ndarray:
        if not 0 <= i < len(self):
            raise IndexError(i)
        return self.pts[i]

    def reserve(self, capacity: int) -> None:
        """Grow storage so ``capacity`` points fit without reallocation."""
        cap = len(self.pts)
        if capacity <= cap:
            return
        new_cap = max(capacity, 2 * cap)
        n = len(self)
        pts = np.zeros((new_cap, self.d))
        pts[:n] = self.pts[:n]
        self.pts = pts
        self.nxt = np.full(new_cap, -1, dtype=np.int64)
        m = _table_size(new_cap)
        self.keys = np.zeros((m, self.d), dtype=np.int64)
        self.head = np.full(m, -1, dtype=np.int64)
        self.ist[1] = m
        grid_rebuild(*self.state, self.fst[0])

    def set_cell_size(self, h: float) -> None:
        if not h > 0:
            raise ParameterError("cell size must be positive")
        grid_rebuild(*self.state, float(h))

    def insert(self, p) -> int:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.d,):
            raise ParameterError(f"expected a point of dimension {self.d}, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ParameterError("point has non-finite coordinates")
        self.reserve(len(self) + 1)
        return int(grid_insert(*self.state, p))

    def nearest(self, q, exclude_root: bool = True) -> tuple[int, float]:
        """Exact nearest point to ``q``; ties go to the lowest id."""
        q = self._query_point(q)
        j, dist = grid_nearest(*self.state, q, math.inf, 1 if exclude_root else 0)
        if j < 0:
            raise InsufficientDataError("index is empty after exclusion")
        return int(j), float(dist)

    def count_within(self, q, r: float, exclude_root: bool = True) -> int:
        """Number of points in the closed ball of radius ``r`` around ``q``."""
        if not r > 0:
            raise ParameterError(f"radius must be positive, got {r!r}")
        q = self._query_point(q)
        if not len(self):
            return 0
        return int(grid_count(*self.state, q, float(r), 1 if exclude_root else 0))

    def within(self, q, r: float, exclude_root: bool = True) -> np.ndarray:
        """Ids of points in the closed ball, ascending (linear scan)."""
        q = self._query_point(q)
        return grid_within(*self.state, q, float(r), 1 if exclude_root else 0)

    def _query_point(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.d,):
            raise ParameterError(f"expected a query of dimension {self.d}, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ParameterError("query has non-finite coordinates")
        return q
