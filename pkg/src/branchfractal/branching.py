"""Continuous-time spatial branching process driven by a next-birth event queue.

Every vertex born at time ``s`` gives birth at the points of a Poisson process
with intensity ``rho / t`` on ``(s, inf)``. In log-time that process has
constant rate ``rho``, so given the current time ``t`` the next point is
``t * exp(E / rho)`` with ``E`` a unit exponential. The simulation keeps only
the next pending birth of each live vertex in a min-heap, which yields the
exact tree of all vertices born by the stopping time.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import InsufficientDataError, ParameterError, ResourceLimitError
from .profiles import ProcessParams, sample_displacements

ROOT_PARENT = -1
TIME_CAP = 1e300
# log-time increments above this overflow float64 once exponentiated
_MAX_LOG_STEP = 700.0
_EXP_CHUNK = 4096


class Vertex(NamedTuple):
    id: int
    parent: int
    tau: float
    chi: np.ndarray
    depth: int


@dataclass
class BranchingTree:
    """Vertices of the realized tree in birth order (root has id 0).

    ``stop_reason`` is ``"time"`` when the tree is exactly the set of
    vertices born by ``horizon``, ``"vertices"`` when the vertex budget ran
    out first (then ``horizon`` is the last birth time) and ``"exhausted"``
    when no vertex could reproduce any more. ``max_depth`` is set when
    vertices at that depth were not allowed to reproduce.
    """

    params: ProcessParams
    parent: np.ndarray
    tau: np.ndarray
    chi: np.ndarray
    depth: np.ndarray
    horizon: float
    stop_reason: str = "vertices"
    max_depth: int | None = None

    def __len__(self) -> int:
        return len(self.tau)

    def __getitem__(self, i: int) -> Vertex:
        return Vertex(int(i), int(self.parent[i]), float(self.tau[i]), self.chi[i], int(self.depth[i]))

    def __iter__(self) -> Iterator[Vertex]:
        return (self[i] for i in range(len(self)))

    @property
    def vertices(self) -> list[Vertex]:
        return list(self)

    @property
    def d(self) -> int:
        return self.chi.shape[1]

    @property
    def is_seed(self) -> np.ndarray:
        return self.parent == 0

    def displacements(self) -> np.ndarray:
        out = np.zeros_like(self.chi)
        out[1:] = self.chi[1:] - self.chi[self.parent[1:]]
        return out

    def check(self) -> None:
        """Raise ``AssertionError`` unless the tree is well formed."""
        n = len(self)
        assert self.parent[0] == ROOT_PARENT and self.tau[0] == 1.0 and self.depth[0] == 0
        assert np.all(self.chi[0] == 0.0)
        if n > 1:
            ids = np.arange(1, n)
            par = self.parent[1:]
            assert np.all((par >= 0) & (par < ids))
            assert np.all(np.diff(self.tau) > 0)
            assert np.all(self.tau[1:] > self.tau[par])
            assert np.all(self.depth[1:] == self.depth[par] + 1)
            if self.stop_reason == "time":
                assert self.tau[-1] <= self.horizon


@dataclass
class GrowthTrace:
    """Population size after each birth; the root contributes ``(1.0, 1)``."""

    times: np.ndarray
    sizes: np.ndarray = field(default=None)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.sizes is None:
            self.sizes = np.arange(1, len(self.times) + 1)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def births(self) -> int:
        return len(self.times) - 1


def next_child_time(tau_current: float, rho: float, rng: np.random.Generator) -> float:
    """Next birth time of a vertex whose clock currently reads ``tau_current``."""
    if not tau_current >= 1.0:
        raise ParameterError(f"tau_current must be >= 1, got {tau_current!r}")
    step = rng.standard_exponential() / rho
    return tau_current * math.exp(step) if step < _MAX_LOG_STEP else math.inf


def _split_rng(rng: np.random.Generator):
    time_rng, space_rng = rng.spawn(2)
    return time_rng, space_rng


def generate_tree(params: ProcessParams, max_vertices: int, max_time: float | None = None,
                  rng: np.random.Generator | None = None, max_depth: int | None = None):
    """Simulate the process until ``max_vertices`` exist or time exceeds ``max_time``.

    With ``max_depth`` set, vertices at that depth never reproduce; the result
    is then exactly the time-``T`` tree restricted to depths ``<= max_depth``.

    Returns ``(tree, trace)``.
    """
    if isinstance(max_vertices, bool) or int(max_vertices) != max_vertices or max_vertices < 1:
        raise ParameterError(f"max_vertices must be a positive integer, got {max_vertices!r}")
    max_vertices = int(max_vertices)
    if max_time is not None and not max_time >= 1.0:
        raise ParameterError(f"max_time must be >= 1, got {max_time!r}")
    if max_depth is not None and max_depth < 0:
        raise ParameterError("max_depth must be non-negative")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    time_rng, space_rng = _split_rng(rng)

    t_stop = math.inf if max_time is None else float(max_time)
    depth_cap = math.inf if max_depth is None else max_depth
    inv_rho = 1.0 / params.rho
    exp_ = math.exp
    push, replace = heapq.heappush, heapq.heapreplace

    exps = time_rng.standard_exponential(_EXP_CHUNK).tolist()
    k = 0

    parent = [ROOT_PARENT]
    tau = [1.0]
    depth = [0]
    heap = []
    try:
        if depth_cap > 0:
            heap.append((exp_(exps[0] * inv_rho), 0))
            k = 1
        n = 1
        while n < max_vertices and heap:
            t, p = heap[0]
            if t > t_stop:
                break
            if t >= TIME_CAP:
                raise ResourceLimitError(
                    f"birth time reached {t:.3g}; rho={params.rho} is too small for this budget")
            dep = depth[p] + 1
            parent.append(p)
            tau.append(t)
            depth.append(dep)
            if k + 2 > _EXP_CHUNK:
                exps = time_rng.standard_exponential(_EXP_CHUNK).tolist()
                k = 0
            s = exps[k] * inv_rho
            replace(heap, (t * exp_(s) if s < _MAX_LOG_STEP else math.inf, p))
            if dep < depth_cap:
                s = exps[k + 1] * inv_rho
                push(heap, (t * exp_(s) if s < _MAX_LOG_STEP else math.inf, n))
            k += 2
            n += 1
    except MemoryError:
        parent = tau = depth = heap = None
        raise ResourceLimitError("out of memory while generating tree; partial result discarded")

    if heap and heap[0][0] > t_stop:
        stop_reason, horizon = "time", t_stop
    elif not heap:
        stop_reason, horizon = "exhausted", t_stop
    else:
        stop_reason, horizon = "vertices", tau[-1]

    tau_arr = np.asarray(tau, dtype=float)
    parent_arr = np.asarray(parent, dtype=np.int64)
    depth_arr = np.asarray(depth, dtype=np.int64)
    chi = _place(params, parent_arr, tau_arr, depth_arr, space_rng)
    tree = BranchingTree(params=params, parent=parent_arr, tau=tau_arr, chi=chi, depth=depth_arr,
                         horizon=horizon, stop_reason=stop_reason, max_depth=max_depth)
    return tree, GrowthTrace(tau_arr.copy())


def _place(params, parent, tau, depth, rng) -> np.ndarray:
    # displacements depend only on birth times, so they are drawn in one batch
    n = len(tau)
    chi = np.zeros((n, params.d))
    if n == 1:
        return chi
    disp = sample_displacements(params.profile, params.d, tau[1:], rng, beta=params.beta)
    order = np.argsort(depth[1:], kind="stable") + 1
    bounds = np.searchsorted(depth[order], np.arange(1, depth.max() + 2))
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        ids = order[lo:hi]
        chi[ids] = chi[parent[ids]] + disp[ids - 1]
    return chi


def generate_replicas(params: ProcessParams, replicas: int, max_vertices: int,
                      max_time: float | None = None, max_depth: int | None = None,
                      seed: int | None = None):
    """Independent trees from child streams of one seed. Yields ``(tree, trace)``."""
    root = np.random.SeedSequence(params.seed if seed is None else seed)
    for child in root.spawn(replicas):
        yield generate_tree(params, max_vertices, max_time, np.random.default_rng(child), max_depth)


@dataclass
class GrowthFit:
    slope: float
    stderr: float
    w_hat: np.ndarray
    window: float


def growth_exponent(traces: Sequence[GrowthTrace], rho_hint: float, window: float = 0.8,
                    min_births: int = 100) -> GrowthFit:
    """Pooled slope of log n(t) against log t and per-trace ``n(T) T**-rho_hint``.

    Each trace contributes its births in the last ``window`` fraction of its
    log-time range. Trace-specific intercepts are removed before pooling, since
    the limit ``n(t) t**-rho`` differs between replicas.
    """
    if not 0 < window <= 1:
        raise ParameterError("window must lie in (0, 1]")
    if not traces:
        raise InsufficientDataError("no traces given")
    xs, ys, w_hat = [], [], []
    for tr in traces:
        if tr.births < min_births:
            raise InsufficientDataError(f"trace has {tr.births} births; need at least {min_births}")
        lt = np.log(tr.times)
        keep = lt >= (1.0 - window) * lt[-1]
        x = lt[keep]
        y = np.log(tr.sizes[keep])
        xs.append(x - x.mean())
        ys.append(y - y.mean())
        w_hat.append(tr.sizes[-1] * tr.times[-1] ** (-rho_hint))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    sxx = float(x @ x)
    slope = float(x @ y) / sxx
    resid = y - slope * x
    dof = max(len(x) - len(xs) - 1, 1)
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return GrowthFit(slope=slope, stderr=stderr, w_hat=np.asarray(w_hat), window=window)
