import math

import numpy as np
import pytest
from scipy import integrate

from branchfractal.dimension import (box_count, box_counts, correlation_sum, correlation_sums,
                                     default_eps_grid, diameter, energy_estimate, estimate_dimension,
                                     fit_dimension, saturation_scale)
from branchfractal.errors import DegenerateFitError, InsufficientDataError, ParameterError


def test_box_count_single_point():
    assert box_count([[0.3, 0.4]], 0.01) == 1
    assert box_count([[0.3, 0.4]], 100.0) == 1


def test_box_count_regular_grid():
    g = (np.arange(64) + 0.5) / 64
    pts = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    assert len(pts) == 4096
    # anchored at the minimum corner 1/128; cells of side 1/8 hold 8x8 points each
    assert box_count(pts, 1 / 8) == 64


def test_uniform_square_box_dimension(rng):
    pts = rng.random((100_000, 2))
    eps = 2.0 ** -np.arange(2, 8)
    fit = fit_dimension(eps, box_counts(pts, eps), "boxcount", window=(0, 6))
    assert fit.slope == pytest.approx(2.0, abs=0.1)


def test_uniform_square_default_grid(rng):
    fit = estimate_dimension(rng.random((100_000, 2)))
    assert fit.slope == pytest.approx(2.0, abs=0.1)


def test_box_count_monotone(rng):
    pts = rng.normal(size=(5000, 2)) ** 3
    eps = np.geomspace(1.0, 1e-4, 30)
    counts = box_counts(pts, eps)
    assert np.all(np.diff(counts) >= 0)


def test_exact_power_law_fit():
    eps = np.geomspace(1, 1e-4, 12)
    fit = fit_dimension(eps, eps ** -1.5, "boxcount")
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    assert fit.fit_window == (2, 10)
    fit = fit_dimension(eps, 3 * eps ** 0.7, "corrsum", window=(0, 12))
    assert fit.slope == pytest.approx(0.7, abs=1e-12)


def test_single_point_slope_zero():
    eps = np.geomspace(1, 1e-3, 8)
    counts = box_counts([[0.1, 0.2]], eps)
    assert fit_dimension(eps, counts).slope == 0.0


def test_fit_errors():
    eps = np.geomspace(1, 1e-3, 8)
    with pytest.raises(InsufficientDataError):
        fit_dimension(eps, eps ** -1, window=(0, 3))
    with pytest.raises(ParameterError):
        fit_dimension(eps[::-1], eps ** -1)
    with pytest.raises(DegenerateFitError):
        fit_dimension(eps, np.zeros(8), "corrsum")


def test_correlation_sum_two_points():
    pts = [[0.0, 0.0], [1.0, 0.0]]
    assert correlation_sum(pts, 0.5) == 0.0
    assert correlation_sum(pts, 2.0) == 1.0
    assert correlation_sum(pts, 1.0) == 1.0


def test_correlation_sum_matches_pair_count(rng):
    pts = rng.random((300, 3))
    diff = pts[:, None] - pts[None]
    d = np.sqrt((diff ** 2).sum(-1))
    for eps in (0.05, 0.2, 0.7):
        expected = (np.count_nonzero(d <= eps) - 300) / (300 * 299)
        assert correlation_sum(pts, eps) == pytest.approx(expected, rel=1e-12)


def test_correlation_sum_excludes_coincident_pairs():
    pts = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]
    assert correlation_sum(pts, 0.5) == 0.0


def test_correlation_sum_monotone(rng):
    sums = correlation_sums(rng.random((2000, 2)), np.geomspace(1e-3, 2, 25))
    assert np.all(np.diff(sums) >= 0)


def test_uniform_correlation_dimension(rng):
    fit = estimate_dimension(rng.random((10_000, 2)), "corrsum")
    assert fit.slope == pytest.approx(2.0, abs=0.15)


def test_subsampling_records_seed(rng):
    pts = rng.random((25_000, 2))
    fit = estimate_dimension(pts, "corrsum", seed=17)
    assert fit.subsample_seed == 17
    assert fit.slope == pytest.approx(2.0, abs=0.15)
    a = correlation_sum(pts, 0.05, seed=3)
    assert a == correlation_sum(pts, 0.05, seed=3)
    # fraction of the square within 0.05 of a point, ignoring edges: pi * 0.05**2
    assert a == pytest.approx(math.pi * 0.05 ** 2, rel=0.1)


def test_all_coincident_rejected():
    pts = np.ones((10, 2))
    with pytest.raises(DegenerateFitError):
        correlation_sum(pts, 1.0)
    with pytest.raises(DegenerateFitError):
        energy_estimate(pts, 1.0)
    with pytest.raises(DegenerateFitError):
        default_eps_grid(pts)


def test_energy_two_points():
    for a in (0.5, 1.0, 3.0):
        assert energy_estimate([[0.0, 0.0], [1.0, 0.0]], a) == 1.0


def _square_energy(a):
    # E|X - Y|**-a for X, Y uniform on the unit square, via the difference density
    # (1 - |u|)(1 - |v|) on [-1, 1]^2 in polar coordinates
    def inner(phi):
        c, s = math.cos(phi), math.sin(phi)
        rmax = min(1 / c, 1 / s) if c > 0 and s > 0 else 1.0
        val, _ = integrate.quad(lambda r: r ** (1 - a) * (1 - r * c) * (1 - r * s), 0, rmax)
        return val
    val, _ = integrate.quad(inner, 0, math.pi / 2, epsabs=1e-12)
    return 4 * val


def test_energy_quadrature_oracle(rng):
    exact = _square_energy(1.0)
    assert exact == pytest.approx(2.9732, abs=1e-3)
    small = energy_estimate(rng.random((1000, 2)), 1.0)
    large = energy_estimate(rng.random((10_000, 2)), 1.0)
    assert small == pytest.approx(large, rel=0.1)
    assert large == pytest.approx(exact, rel=0.05)


def test_energy_diverges_above_dimension(rng):
    # the estimate is dominated by the closest pairs, so compare medians of replicas;
    # its typical size grows like n**(a/2 - 1)
    med = [np.median([energy_estimate(rng.random((n, 2)), 2.5) for _ in range(5)])
           for n in (200, 1600, 12800)]
    assert med[0] < med[1] < med[2]
    assert med[2] > 3 * med[0]


def test_default_grid_bounds(rng):
    pts = rng.random((5000, 2))
    eps = default_eps_grid(pts)
    assert len(eps) == 12 and eps[0] == pytest.approx(diameter(pts) / 4)
    assert eps[-1] == pytest.approx(saturation_scale(pts))
    assert box_count(pts, eps[-1]) <= 5000 / 10 < box_count(pts, 0.99 * eps[-1])
    nn = default_eps_grid(pts, lower="nn")
    assert nn[-1] < eps[-1]


def test_diameter_exact(rng):
    pts = rng.normal(size=(3000, 2))
    diff = pts[:, None] - pts[None]
    assert diameter(pts) == pytest.approx(np.sqrt((diff ** 2).sum(-1)).max(), rel=1e-12)


def test_shift_changes_little(rng):
    pts = rng.random((50_000, 2))
    a = estimate_dimension(pts).slope
    b = estimate_dimension(pts, shift=0.5).slope
    assert abs(a - b) < 0.1
