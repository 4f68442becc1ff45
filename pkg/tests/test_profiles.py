import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, stats

from branchfractal.errors import ParameterError
from branchfractal.profiles import (ProcessParams, SpatialProfile, compute_cd, derive_params,
                                    params_from_rho, sample_displacement, sample_displacements,
                                    unit_ball_volume)

PROFILES = list(SpatialProfile)


@pytest.mark.parametrize("d,expected", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)])
def test_unit_ball_volume(d, expected):
    assert unit_ball_volume(d) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("profile,d,expected", [
    ("exponential", 2, 2 * math.pi),
    ("gaussian", 3, (2 * math.pi) ** 1.5),
    ("hardcutoff", 2, math.pi),
])
def test_compute_cd_examples(profile, d, expected):
    assert compute_cd(profile, d) == pytest.approx(expected, rel=1e-14)


def _radial_mass(profile, d):
    # integral of f(|x|) over R^d in polar form: surface area times int f(r) r^(d-1) dr
    surface = d * unit_ball_volume(d)
    upper = 1.0 if profile is SpatialProfile.HARDCUTOFF else np.inf
    val, _ = integrate.quad(lambda r: float(profile.f(r)) * r ** (d - 1), 0, upper,
                            epsabs=0, epsrel=1e-12, limit=200)
    return surface * val


@pytest.mark.parametrize("profile", PROFILES)
@pytest.mark.parametrize("d", [1, 2, 3])
def test_compute_cd_matches_quadrature(profile, d):
    assert compute_cd(profile, d) == pytest.approx(_radial_mass(profile, d), rel=1e-6)


def test_derive_params_examples():
    p = derive_params(2, 1, "exponential")
    assert p.rho == 0.5 and p.theta == pytest.approx(4 * math.pi, rel=1e-14)
    p = derive_params(2, 2, "hardcutoff")
    assert p.rho == 1 and p.theta == pytest.approx(math.pi, rel=1e-14)
    p = derive_params(1, 1, "hardcutoff")
    assert p.rho == 1 and p.theta == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize("profile", PROFILES)
@pytest.mark.parametrize("alpha", [0.3, 1.0, Fraction(10, 9), 2.5])
def test_derive_params_round_trip(profile, alpha):
    p = derive_params(2, alpha, profile)
    assert p.rho * p.theta / p.beta == pytest.approx(compute_cd(profile, 2), rel=1e-15)
    assert p.alpha == pytest.approx(2 * p.rho, rel=1e-15)


def test_rho_and_alpha_entry_points_agree():
    assert derive_params(2, 1.5, "gaussian") == params_from_rho(2, 0.75, "gaussian")


@pytest.mark.parametrize("alpha", [0, -1, float("nan"), float("inf")])
def test_derive_params_rejects_bad_alpha(alpha):
    with pytest.raises(ParameterError):
        derive_params(2, alpha, "gaussian")


@pytest.mark.parametrize("d", [0, -1, 1.5, True])
def test_bad_dimension(d):
    with pytest.raises(ParameterError):
        derive_params(d, 1.0, "gaussian")


def test_params_dict_round_trip():
    p = derive_params(3, 1.2, "exponential", seed=11)
    assert ProcessParams.from_dict(p.to_dict()) == p


def test_profile_parse():
    assert SpatialProfile.parse("Gaussian") is SpatialProfile.GAUSSIAN
    with pytest.raises(ParameterError):
        SpatialProfile.parse("cauchy")


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_hardcutoff_never_exceeds_radius(d, rng):
    t = np.exp(rng.uniform(0, 30, size=20000))
    out = sample_displacements("hardcutoff", d, t, rng)
    assert np.all(np.sqrt((out * out).sum(axis=1)) <= t ** (-1.0 / d))


def test_gaussian_unit_variance(rng):
    out = sample_displacements("gaussian", 2, np.ones(100_000), rng)
    assert out.var(axis=0) == pytest.approx([1.0, 1.0], rel=0.02)


def test_exponential_mean_radius_d1(rng):
    expected, _ = integrate.quad(lambda r: r * math.exp(-r), 0, np.inf)
    out = sample_displacements("exponential", 1, np.ones(100_000), rng)
    assert np.abs(out).mean() == pytest.approx(expected, rel=0.02)


@pytest.mark.parametrize("profile", PROFILES)
def test_scaled_law_independent_of_time(profile, rng):
    d = 2
    a = sample_displacements(profile, d, np.full(10_000, 1.0), rng)
    b = sample_displacements(profile, d, np.full(10_000, 100.0), rng) * 100.0 ** (1 / d)
    ra, rb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    assert stats.ks_2samp(ra, rb).pvalue > 0.01


def test_single_displacement_shape(rng):
    assert sample_displacement("gaussian", 3, 2.0, rng).shape == (3,)


def test_nonpositive_time_rejected(rng):
    with pytest.raises(ParameterError):
        sample_displacements("gaussian", 2, [0.0], rng)
