"""
Single-bubble statistics: generation time, horizontal offset, radius,
rising velocity and the resulting distance from the beam centre.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError
from .geometry import BeamSpec

# radius breakpoints of the three rising-velocity regimes [m]
STOKES_LIMIT = 0.08015e-3
INERTIAL_LIMIT = 0.575e-3


@dataclass(frozen=True)
class FluidConstants:
    """Liquid properties in SI units. Defaults: pure water at 20 C."""

    rho: float = 998.0
    mu_visc: float = 1.002e-3
    sigma_s: float = 0.0728
    g: float = 9.81

    def __post_init__(self):
        if min(self.rho, self.mu_visc, self.sigma_s, self.g) <= 0:
            raise ParameterError("fluid constants must be strictly positive")


@dataclass(frozen=True)
class BubbleEnvironment:
    """Everything that determines the bubble population around the beam.

    ``L`` is the generation interval [s] (one bubble per interval), ``mu_R``
    the mean radius parameter of the truncated Rayleigh law [m], ``sigma_x``
    the horizontal spread [m] and ``window`` the look-back duration [s].
    """

    L: float
    mu_R: float
    sigma_x: float = 5e-3
    R_max: float = 0.01
    window: float = 10.0
    fluid: FluidConstants = field(default_factory=FluidConstants)
    beam: BeamSpec = field(default_factory=BeamSpec)

    def __post_init__(self):
        if not self.L > 0:
            raise ParameterError("L must be positive")
        if not 0 < self.mu_R < self.R_max:
            raise ParameterError("need 0 < mu_R < R_max")
        if not self.sigma_x > 0:
            raise ParameterError("sigma_x must be positive")
        if self.window < 0:
            raise ParameterError("window must be non-negative")
        ratio = self.window / self.L
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ParameterError(f"window/L = {ratio} is not an integer bubble count")

    @property
    def n_bubbles(self):
        return int(round(self.window / self.L))

    @property
    def rate(self):
        return 1.0 / self.L


@dataclass(frozen=True)
class BubbleSample:
    x: float
    R: float
    t: float
    H: float
    D: float


def generation_time_pdf(t, i, L):
    if i < 1:
        raise ParameterError("interval index starts at 1")
    t = np.asarray(t, dtype=float)
    out = np.where(((i - 1) * L <= t) & (t <= i * L), 1.0 / L, 0.0)
    return float(out) if out.ndim == 0 else out


def horizontal_pdf(x, sigma_x):
    if not sigma_x > 0:
        raise ParameterError("sigma_x must be positive")
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * (x / sigma_x) ** 2) / (math.sqrt(2 * math.pi) * sigma_x)
    return float(out) if out.ndim == 0 else out


def _rayleigh_scale(mu_R):
    # exp(-pi r^2 / 4 mu^2) = exp(-r^2 / (2 s^2)) with s^2 = 2 mu^2 / pi
    return 4.0 * mu_R**2 / math.pi


def radius_normaliser(mu_R, R_max):
    """Probability mass of the untruncated Rayleigh law on [0, R_max]."""
    return -math.expm1(-R_max**2 / _rayleigh_scale(mu_R))


def radius_pdf(r, mu_R, R_max=0.01):
    r = np.asarray(r, dtype=float)
    q = radius_normaliser(mu_R, R_max)
    dens = math.pi * r / (2 * mu_R**2) * np.exp(-r * r / _rayleigh_scale(mu_R)) / q
    out = np.where((r >= 0) & (r <= R_max), dens, 0.0)
    return float(out) if out.ndim == 0 else out


def radius_cdf(r, mu_R, R_max=0.01):
    r = np.clip(np.asarray(r, dtype=float), 0.0, R_max)
    out = -np.expm1(-r * r / _rayleigh_scale(mu_R)) / radius_normaliser(mu_R, R_max)
    return float(out) if out.ndim == 0 else out


def radius_quantile(u, mu_R, R_max=0.01):
    """Inverse CDF of the truncated Rayleigh radius law."""
    q = radius_normaliser(mu_R, R_max)
    u = np.asarray(u, dtype=float)
    return np.sqrt(-_rayleigh_scale(mu_R) * np.log1p(-u * q))


def rising_velocity(R, fluid=None):
    """Terminal rise speed [m/s] of a bubble of radius ``R`` [m].

    Viscous (Stokes) regime, then an intermediate R^1.5 law, then a
    capillary-gravity law sqrt(1.07 sigma_s/(rho R) + 1.01 g R).
    """
    fluid = fluid or FluidConstants()
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0):
        raise DomainError("bubble radius must be positive")
    rho, mu, sig, g = fluid.rho, fluid.mu_visc, fluid.sigma_s, fluid.g
    stokes = g * rho * R * R / (3 * mu)
    inertial = 0.408 * g ** (5 / 6) * (rho / mu) ** (2 / 3) * R**1.5
    capillary = np.sqrt(1.07 * sig / (rho * R) + 1.01 * g * R)
    out = np.where(R < STOKES_LIMIT, stokes, np.where(R < INERTIAL_LIMIT, inertial, capillary))
    return float(out) if out.ndim == 0 else out


def center_distance(sample, beam):
    return math.hypot(sample.x, sample.H - beam.center_height)


def draw_population(env, rng, intervals=None):
    """Draw (x, R, t) arrays, one bubble per generation interval.

    ``intervals`` are 1-based interval indices (default: all of them).
    Draw order per call: times, offsets, radii.
    """
    idx = np.arange(1, env.n_bubbles + 1) if intervals is None else np.asarray(intervals)
    n = idx.size
    t = (idx - 1 + rng.random(n)) * env.L
    x = rng.normal(0.0, env.sigma_x, n)
    R = radius_quantile(rng.random(n), env.mu_R, env.R_max)
    return x, R, t


def sample_bubble(i, env, rng):
    if not 1 <= i <= env.n_bubbles:
        raise ParameterError(f"interval index {i} outside 1..{env.n_bubbles}")
    x, R, t = draw_population(env, rng, [i])
    x, R, t = float(x[0]), float(R[0]), float(t[0])
    # R = 0 has probability zero but guard the velocity domain anyway
    H = rising_velocity(R, env.fluid) * t if R > 0 else 0.0
    D = math.hypot(x, H - env.beam.center_height)
    return BubbleSample(x=x, R=R, t=t, H=H, D=D)
