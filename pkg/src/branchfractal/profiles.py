"""Spatial decay profiles, their normalizing constants and process parameters.

A profile ``f`` shapes the displacement of a child from its parent. At birth
time ``t`` the displacement density is proportional to ``f(t**(1/d) * |y|)``,
so the typical step shrinks like ``t**(-1/d)``. The total mass of ``f(|x|)``
over R^d is ``c_d``; together with the intensity divisor ``theta`` it fixes the
growth exponent ``rho = c_d * beta / theta``.

Only the three closed-form profiles are supported. A custom profile would
need a radial sampler and a (numerically integrated) ``c_d``; ``SpatialProfile``
is the place to add one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ParameterError


class SpatialProfile(enum.Enum):
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"
    HARDCUTOFF = "hardcutoff"

    @classmethod
    def parse(cls, value: "str | SpatialProfile") -> "SpatialProfile":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise ParameterError(f"unknown profile {value!r}; expected one of {names}") from None

    @property
    def description(self) -> str:
        return {
            SpatialProfile.EXPONENTIAL: "f(r) = exp(-r)",
            SpatialProfile.GAUSSIAN: "f(r) = exp(-r^2/2)",
            SpatialProfile.HARDCUTOFF: "f(r) = 1{r <= 1}",
        }[self]

    def f(self, r):
        """Evaluate the radial profile at ``r >= 0``."""
        r = np.asarray(r, dtype=float)
        if self is SpatialProfile.EXPONENTIAL:
            return np.exp(-r)
        if self is SpatialProfile.GAUSSIAN:
            return np.exp(-0.5 * r * r)
        return (r <= 1.0).astype(float)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def compute_cd(profile: SpatialProfile | str, d: int) -> float:
    """Total mass of ``f(|x|)`` over R^d, in closed form."""
    profile = SpatialProfile.parse(profile)
    _check_dim(d)
    if profile is SpatialProfile.EXPONENTIAL:
        return math.factorial(d) * unit_ball_volume(d)
    if profile is SpatialProfile.GAUSSIAN:
        return (2 * math.pi) ** (d / 2)
    return unit_ball_volume(d)


def _check_dim(d):
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d < 1:
        raise ParameterError(f"dimension must be a positive integer, got {d!r}")


@dataclass(frozen=True)
class ProcessParams:
    """Parameters of the continuous-time branching process.

    ``alpha`` is always ``d * rho``; the euclidean dimension of the limit set
    is ``d * min(1, rho)``.
    """

    d: int
    rho: float
    theta: float
    alpha: float
    profile: SpatialProfile = SpatialProfile.GAUSSIAN
    seed: int = 0
    beta: float = field(default=1.0, repr=False)

    def __post_init__(self):
        _check_dim(self.d)
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise ParameterError(f"theta must be positive, got {self.theta!r}")
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ParameterError(f"rho must be positive, got {self.rho!r}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive, got {self.beta!r}")

    @property
    def cd(self) -> float:
        return compute_cd(self.profile, self.d)

    @property
    def euclidean_dimension(self) -> float:
        return self.d * min(1.0, self.rho)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "rho": self.rho,
            "theta": self.theta,
            "alpha": self.alpha,
            "beta": self.beta,
            "profile": self.profile.value,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProcessParams":
        return cls(
            d=int(data["d"]),
            rho=float(data["rho"]),
            theta=float(data["theta"]),
            alpha=float(data["alpha"]),
            beta=float(data.get("beta", 1.0)),
            profile=SpatialProfile.parse(data["profile"]),
            seed=int(data.get("seed", 0)),
        )


def _as_float(x) -> float:
    return float(Fraction(x)) if isinstance(x, Fraction) else float(x)


def derive_params(d: int, alpha, profile: SpatialProfile | str = SpatialProfile.GAUSSIAN,
                  seed: int = 0, beta: float = 1.0) -> ProcessParams:
    """Parameters hitting target dimension ``alpha`` in R^d."""
    _check_dim(d)
    alpha = _as_float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ParameterError(f"alpha must be positive, got {alpha!r}")
    return params_from_rho(d, alpha / d, profile, seed=seed, beta=beta)


def params_from_rho(d: int, rho, profile: SpatialProfile | str = SpatialProfile.GAUSSIAN,
                    seed: int = 0, beta: float = 1.0) -> ProcessParams:
    _check_dim(d)
    rho = _as_float(rho)
    if not (rho > 0 and math.isfinite(rho)):
        raise ParameterError(f"rho must be positive, got {rho!r}")
    profile = SpatialProfile.parse(profile)
    theta = compute_cd(profile, d) * beta / rho
    return ProcessParams(d=d, rho=rho, theta=theta, alpha=d * rho, profile=profile,
                         seed=seed, beta=beta)


def uniform_in_ball(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """``n`` points uniform in the closed unit ball of R^d, shape ``(n, d)``.

    The computed norm of every returned row is at most 1.
    """
    g = rng.standard_normal((n, d))
    norms = np.sqrt((g * g).sum(axis=1))
    out = g * (rng.random(n) ** (1.0 / d) / norms)[:, None]
    bad = ~(np.sqrt((out * out).sum(axis=1)) <= 1.0)
    if not bad.any():
        return out
    todo = np.flatnonzero(bad)
    while todo.size:
        g = rng.standard_normal((todo.size, d))
        norms = np.sqrt(np.sum(g * g, axis=1))
        ok = norms > 0
        radius = rng.random(todo.size) ** (1.0 / d)
        pts = g[ok] * (radius[ok] / norms[ok])[:, None]
        out[todo[ok]] = pts
        good = np.sqrt(np.sum(pts * pts, axis=1)) <= 1.0
        done = todo[ok][good]
        todo = np.setdiff1d(todo, done, assume_unique=True)
    return out


def _unit_scale(profile: SpatialProfile, rng, n, d) -> np.ndarray:
    """Displacements at ``t = beta`` (unit scale), shape ``(n, d)``."""
    if profile is SpatialProfile.GAUSSIAN:
        return rng.standard_normal((n, d))
    if profile is SpatialProfile.HARDCUTOFF:
        return uniform_in_ball(rng, n, d)
    g = rng.standard_normal((n, d))
    norms = np.sqrt(np.sum(g * g, axis=1))
    norms[norms == 0] = 1.0
    radius = rng.standard_gamma(d, size=n)
    return g * (radius / norms)[:, None]


def sample_displacements(profile: SpatialProfile | str, d: int, t, rng: np.random.Generator,
                         beta: float = 1.0) -> np.ndarray:
    """Isotropic displacements for children born at times ``t``.

    The radius has density proportional to ``f(r * s) r**(d-1)`` with
    ``s = (t/beta)**(1/d)``. Returns shape ``(len(t), d)``.
    """
    profile = SpatialProfile.parse(profile)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(~(t > 0)):
        raise ParameterError("birth times must be positive")
    scale = (t / beta) ** (-1.0 / d)
    out = _unit_scale(profile, rng, t.size, d) * scale[:, None]
    if profile is SpatialProfile.HARDCUTOFF:
        # rounding in the product may push |out| a hair past the cutoff
        bad = np.flatnonzero(np.sqrt(np.sum(out * out, axis=1)) > scale)
        while bad.size:
            out[bad] = uniform_in_ball(rng, bad.size, d) * scale[bad, None]
            norms = np.sqrt(np.sum(out[bad] * out[bad], axis=1))
            bad = bad[norms > scale[bad]]
    return out


def sample_displacement(profile: SpatialProfile | str, d: int, t: float,
                        rng: np.random.Generator, beta: float = 1.0) -> np.ndarray:
    return sample_displacements(profile, d, [t], rng, beta=beta)[0]
