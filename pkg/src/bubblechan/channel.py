"""
Composite bubble x Gamma-Gamma channel: received-power and SNR statistics,
ergodic capacity and average bit error rate.

The bubble part is the normalized mixture model (aperture power m = 1):
mass ``c`` at 0, mass ``a`` at 1 and density ``b f_W(1 - y)`` on (0, 1).
Gauss-Legendre nodes turn the continuous part into a finite mixture of
Gamma-Gamma laws scaled by gains ``y_i`` in (0, 1); together with the
unscaled ``a`` component this gives ``H_ab = H_a H_b`` as a weighted
sum of scaled Gamma-Gamma densities. Metrics are computed by adaptive
quadrature over ``log x``, which handles both the power-law behaviour at
the origin and the slowly decaying tail.
"""

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import ParameterError
from .specfun import AdaptiveSettings, bessel_k, gauss_legendre, integrate_adaptive, ln_gamma, q_function

# checkpoint spacing in log x for the Gamma-Gamma CDF
_LOG_STEP = 0.25
_TAIL_EPS = 1e-17
_METRIC_SETTINGS = AdaptiveSettings(abs_tol=1e-13, rel_tol=1e-10, max_subdivisions=4000)


def gamma_gamma_pdf(x, alpha, beta):
    """Unit-mean Gamma-Gamma density; 0 for x <= 0."""
    if not (alpha > 0 and beta > 0):
        raise ParameterError("alpha and beta must be positive")
    x = np.asarray(x, dtype=float)
    pos = x > 0
    xs = np.where(pos, x, 1.0)
    ab = alpha * beta
    log_norm = math.log(2.0) + 0.5 * (alpha + beta) * math.log(ab) - ln_gamma(alpha) - ln_gamma(beta)
    z = 2.0 * np.sqrt(ab * xs)
    with np.errstate(over="ignore", under="ignore"):
        k = bessel_k(alpha - beta, z)
        dens = np.exp(log_norm + (0.5 * (alpha + beta) - 1.0) * np.log(xs)) * k
    out = np.where(pos, np.nan_to_num(dens, nan=0.0, posinf=0.0), 0.0)
    return float(out) if out.ndim == 0 else out


def _small_x_cdf(x, alpha, beta):
    """Leading term of the CDF as x -> 0 (used below the first checkpoint)."""
    lo, nu = min(alpha, beta), abs(alpha - beta)
    if nu == 0:
        # K_0 gives an extra log factor; this bound is only used where it is tiny
        nu = 1e-3
    log_c = lo * math.log(alpha * beta) + ln_gamma(nu) - ln_gamma(alpha) - ln_gamma(beta) - math.log(lo)
    return np.exp(log_c + lo * np.log(x))


class _GammaGammaCdf:
    """CDF checkpoints on a uniform grid in log x, refined by fixed quadrature."""

    def __init__(self, alpha, beta):
        self.alpha, self.beta = alpha, beta
        lo = min(alpha, beta)
        # start where the leading-order mass is below 1e-18
        s0 = (math.log(1e-18) - float(np.log(_small_x_cdf(1.0, alpha, beta)))) / lo
        s0 = min(s0, -2.0)
        self.s0 = math.floor(s0 / _LOG_STEP) * _LOG_STEP
        base = float(_small_x_cdf(math.exp(self.s0), alpha, beta))

        def g(s):
            x = np.exp(s)
            return gamma_gamma_pdf(x, alpha, beta) * x

        values = [base]
        s = self.s0
        settings = AdaptiveSettings(abs_tol=1e-19, rel_tol=1e-14, max_subdivisions=200)
        while True:
            piece = integrate_adaptive(g, s, s + _LOG_STEP, settings)
            values.append(values[-1] + piece)
            s += _LOG_STEP
            if s > 0 and piece < _TAIL_EPS:
                break
        self.values = np.array(values)
        self.s_max = s
        self.rule = gauss_legendre(24)

    @property
    def x_max(self):
        return math.exp(self.s_max)

    @property
    def x_min(self):
        return math.exp(self.s0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        tiny = (x > 0) & (x <= self.x_min)
        out[tiny] = _small_x_cdf(x[tiny], self.alpha, self.beta)
        out[x >= self.x_max] = self.values[-1]
        mid = (x > self.x_min) & (x < self.x_max)
        if mid.any():
            s = np.log(x[mid])
            j = np.floor((s - self.s0) / _LOG_STEP).astype(np.intp)
            j = np.clip(j, 0, self.values.size - 2)
            s_lo = self.s0 + j * _LOG_STEP
            nodes, w = self.rule.on_interval(s_lo, s)
            e = np.exp(nodes)
            out[mid] = self.values[j] + np.sum(w * gamma_gamma_pdf(e, self.alpha, self.beta) * e, axis=-1)
        return np.minimum(out, 1.0)


@lru_cache(maxsize=32)
def _gg_cdf_table(alpha, beta):
    return _GammaGammaCdf(float(alpha), float(beta))


def gamma_gamma_cdf(x, alpha, beta):
    if not (alpha > 0 and beta > 0):
        raise ParameterError("alpha and beta must be positive")
    out = _gg_cdf_table(float(alpha), float(beta))(x)
    return float(out) if out.ndim == 0 else out


def sample_gamma_gamma(n, alpha, beta, rng):
    """Product of independent unit-mean Gamma(alpha) and Gamma(beta) draws."""
    return rng.gamma(alpha, 1.0 / alpha, n) * rng.gamma(beta, 1.0 / beta, n)


@dataclass(frozen=True)
class CompositeChannelParams:
    """Turbulence, path loss, average SNR and modulation settings.

    ``turbulence=False`` replaces the Gamma-Gamma factor by the constant 1.
    ``node_rule`` selects where the quadrature nodes for the bubble density
    sit (see ``_mixture``).
    """

    alpha: float = 2.21
    beta: float = 3.31
    h_l: float = 1.0
    avg_snr: float = 1.0
    p: float = 1.0
    q: float = 2.0
    gl_order: int = 32
    turbulence: bool = True
    node_rule: str = "weibull"

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterError("alpha and beta must be positive")
        if not self.h_l > 0:
            raise ParameterError("path loss h_l must be positive")
        if not self.avg_snr > 0:
            raise ParameterError("average SNR must be positive")
        if not (self.p > 0 and self.q > 0):
            raise ParameterError("modulation parameters p, q must be positive")
        if self.gl_order < 8:
            raise ParameterError("gl_order must be at least 8")
        if self.node_rule not in ("weibull", "uniform"):
            raise ParameterError("node_rule must be 'weibull' or 'uniform'")

    @property
    def avg_snr_db(self):
        return 10.0 * math.log10(self.avg_snr)

    def with_snr_db(self, snr_db):
        return replace(self, avg_snr=10.0 ** (snr_db / 10.0))


# largest Weibull variable (z / lam)^k kept in the node range; exp(-40) ~ 4e-18
_V_CAP = 40.0


def _mixture(model, order, node_rule="weibull"):
    """Gains and weights of the discretised bubble model (m = 1).

    ``uniform`` places Gauss-Legendre nodes uniformly in the gain y on (0, 1).
    ``weibull`` places them in v = ((1 - y) / lam)^k, where the partial
    obstruction mass is b exp(-v) dv; this stays accurate for k < 1, where
    f_W is singular at the unobstructed end.
    """
    rule = gauss_legendre(order)
    x, w = rule.nodes, rule.weights
    if node_rule == "uniform":
        gains = 0.5 * (x + 1.0)
        weights = 0.5 * model.b * w * model.weibull_pdf(0.5 * (1.0 - x))
    elif node_rule == "weibull":
        V = min((model.m / model.lam) ** model.k, _V_CAP)
        v = 0.5 * V * (x + 1.0)
        gains = model.m - model.lam * v ** (1.0 / model.k)
        weights = 0.5 * V * model.b * w * np.exp(-v)
    else:
        raise ParameterError(f"unknown node rule {node_rule!r}")
    return np.append(gains, 1.0), np.append(weights, model.a)


def _as_unit_model(model):
    return model if model.m == 1.0 else model.normalized()


def composite_cdf_Hab(x, model, params):
    """CDF of H_a H_b with the bubble model normalized to m = 1."""
    model = _as_unit_model(model)
    x = np.asarray(x, dtype=float)
    gains, weights = _mixture(model, params.gl_order, params.node_rule)
    scaled = np.maximum(x, 0.0)[..., None] / gains
    if params.turbulence:
        inner = gamma_gamma_cdf(scaled, params.alpha, params.beta)
    else:
        inner = (scaled >= 1.0).astype(float)
    out = np.where(x < 0, 0.0, model.c + np.sum(weights * inner, axis=-1))
    return float(out) if out.ndim == 0 else out


def composite_pdf_Hab(x, model, params):
    """Continuous part of the density of H_a H_b (needs turbulence)."""
    model = _as_unit_model(model)
    x = np.asarray(x, dtype=float)
    gains, weights = _mixture(model, params.gl_order, params.node_rule)
    dens = gamma_gamma_pdf(np.maximum(x, 0.0)[..., None] / gains, params.alpha, params.beta)
    out = np.sum(weights / gains * dens, axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SnrDistribution:
    """Distribution of gamma = (h_l h_a h_b)^2 * avg_snr."""

    model: object
    params: CompositeChannelParams

    def __post_init__(self):
        object.__setattr__(self, "model", _as_unit_model(self.model))

    @property
    def point_mass_at_zero(self):
        return self.model.c

    @property
    def scale(self):
        # gamma = (scale * h_ab)^2
        return self.params.h_l * math.sqrt(self.params.avg_snr)

    def with_snr_db(self, snr_db):
        return SnrDistribution(self.model, self.params.with_snr_db(snr_db))


def snr_cdf(x, dist):
    x = np.asarray(x, dtype=float)
    u = np.sqrt(np.maximum(x, 0.0)) / dist.scale
    out = np.where(x < 0, 0.0, composite_cdf_Hab(u, dist.model, dist.params))
    return float(out) if out.ndim == 0 else out


def snr_pdf(x, dist):
    """Returns ``(point_mass, density)``: mass ``c`` at 0 and the continuous density."""
    x = np.asarray(x, dtype=float)
    mass = np.where(x == 0, dist.point_mass_at_zero, 0.0)
    pos = x > 0
    xs = np.where(pos, x, 1.0)
    u = np.sqrt(xs) / dist.scale
    dens = np.where(pos, composite_pdf_Hab(u, dist.model, dist.params) / (2.0 * dist.scale * np.sqrt(xs)), 0.0)
    if mass.ndim == 0:
        return float(mass), float(dens)
    return mass, dens


def _expect_continuous(phi, dist):
    """E[phi(h_ab)] over the continuous and unit-gain parts of H_ab."""
    params = dist.params
    gains, weights = _mixture(dist.model, params.gl_order, params.node_rule)
    if not params.turbulence:
        return float(np.sum(weights * phi(gains)))
    table = _gg_cdf_table(float(params.alpha), float(params.beta))
    # every component lives on [gain * x_min, gain * x_max]
    s_lo = table.s0 + math.log(gains.min())
    s_hi = max(table.s_max, math.log(math.sqrt(40.0) / params.h_l) + 1.0)

    def integrand(s):
        x = np.exp(s)
        return phi(x) * composite_pdf_Hab(x, dist.model, params) * x

    return integrate_adaptive(integrand, s_lo, s_hi, _METRIC_SETTINGS)


def ergodic_capacity(dist):
    """Mean of log2(1 + gamma) in bits per channel use."""
    s2 = dist.scale**2
    return _expect_continuous(lambda h: np.log1p(s2 * h * h) / math.log(2.0), dist)


def average_ber(dist):
    """c/2 from complete blockage plus the average of Q(p sqrt(q gamma))."""
    k = dist.params.p * math.sqrt(dist.params.q) * dist.scale
    return 0.5 * dist.point_mass_at_zero + _expect_continuous(lambda h: q_function(k * h), dist)


def parse_snr_grid(spec):
    """Parse ``LO:HI:STEP`` (dB, inclusive of HI when it lies on the grid)."""
    try:
        lo, hi, step = (float(v) for v in spec.split(":"))
    except ValueError as exc:
        raise ParameterError(f"SNR grid must be LO:HI:STEP, got {spec!r}") from exc
    if not step > 0 or hi < lo:
        raise ParameterError(f"empty SNR grid {spec!r}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    capacity_bpcu: float
    avg_ber: float
    model_id: str


SWEEP_HEADER = ("snr_db", "capacity_bpcu", "avg_ber", "model_id")


def sweep(models, params, snr_grid_db):
    """Capacity and BER for each ``(model_id, model)`` over an SNR grid (dB)."""
    grid = list(snr_grid_db)
    if not grid:
        raise ParameterError("SNR grid is empty")
    if isinstance(models, dict):
        models = list(models.items())
    rows = []
    for model_id, model in models:
        base = SnrDistribution(model, params)
        for snr_db in grid:
            dist = base.with_snr_db(snr_db)
            rows.append(SweepRow(float(snr_db), ergodic_capacity(dist), average_ber(dist), str(model_id)))
    return rows


def write_sweep_csv(rows, path):
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SWEEP_HEADER)
        for r in rows:
            out.writerow([repr(r.snr_db), repr(r.capacity_bpcu), repr(r.avg_ber), r.model_id])
