"""
Analytical moments of the blocked power, method-of-moments Weibull fit,
the mixed point-mass/Weibull received-power model and fit scores.

Moment integrals run over bubble radius ``R``, lateral offset ``x`` and
generation time ``t``. For a fixed radius the blocked power depends on the
distance ``D = hypot(x, y)`` only, with ``y = v(R) t - h_c`` the height
offset, so the time integral becomes an integral over ``y``:

    E[B_i^k] = int f_R(R) / (v L) int_{y_(i-1)}^{y_i} beta_k(y; R) dy dR,
    beta_k(y; R) = int f_X(x) b(hypot(x, y), R)^k dx.

Per radius node ``b(D)`` is Chebyshev-interpolated on kink-aligned panels,
``beta_k`` is evaluated on Chebyshev nodes in ``y`` and integrated into a
Chebyshev antiderivative, so every interval's moment is a difference of
two antiderivative values.
"""

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import special

from .bubbles import INERTIAL_LIMIT, STOKES_LIMIT, radius_pdf, rising_velocity
from .errors import DegenerateDataError, FitError, ParameterError
from .geometry import aperture_power, obstructed_power
from .specfun import find_root_bracketed, gauss_legendre, ln_gamma

K_BRACKET = (0.05, 50.0)


@dataclass(frozen=True)
class MomentResolution:
    """Quadrature resolution of the moment integrals."""

    radius_panels: int = 320
    radius_order: int = 6
    offset_order: int = 40
    lateral_order: int = 24
    distance_order: int = 48


@dataclass
class MomentSummary:
    e_b: float
    e_b2: float
    per_bubble: list = field(default_factory=list)

    def __post_init__(self):
        if self.e_b < 0 or self.e_b2 < self.e_b**2 * (1 - 1e-12):
            raise ParameterError("moments violate E[B^2] >= E[B]^2 >= 0")


@dataclass
class IntervalProfile:
    """Per-interval first and second moments and blocking probabilities."""

    mean: np.ndarray
    second: np.ndarray
    p_block: np.ndarray

    @property
    def p_clear(self):
        return float(np.exp(np.sum(np.log1p(-np.clip(self.p_block, 0.0, 1.0)))))


def _cheb_nodes(n):
    # Chebyshev points of the first kind on [-1, 1] and the DCT matrix
    theta = np.pi * (np.arange(n) + 0.5) / n
    return np.cos(theta), np.cos(np.outer(theta, np.arange(n)))


def _cheb_coeffs(values, transform):
    """Chebyshev coefficients from values at first-kind nodes (last axis)."""
    n = values.shape[-1]
    c = values @ transform * (2.0 / n)
    c[..., 0] *= 0.5
    return c


def _sin2_map(q, lo, hi):
    """Map q in [0, 1] to [lo, hi] clustering at both ends; returns (y, dy/dq)."""
    span = hi - lo
    return lo + span * np.sin(0.5 * np.pi * q) ** 2, span * 0.5 * np.pi * np.sin(np.pi * q)


def _sin2_inverse(y, lo, hi):
    frac = np.clip((y - lo) / np.where(hi > lo, hi - lo, 1.0), 0.0, 1.0)
    return (2.0 / np.pi) * np.arcsin(np.sqrt(frac))


def _radius_nodes(env, res):
    r = env.beam.aperture_radius
    special_radii = [STOKES_LIMIT, INERTIAL_LIMIT, r, _entry_radius(env)]
    edges = set(np.linspace(0.0, env.R_max, res.radius_panels + 1).tolist())
    edges.update(x for x in special_radii if 0 < x < env.R_max)
    edges = np.array(sorted(edges))
    x, w = gauss_legendre(res.radius_order).on_interval(edges[:-1], edges[1:])
    R, w = x.ravel(), w.ravel()
    weight = w * radius_pdf(R, env.mu_R, env.R_max)
    keep = weight > 0
    return R[keep], weight[keep]


def _entry_radius(env):
    """Smallest radius that gets within r + R of the beam centre inside the window."""
    beam = env.beam
    if env.window == 0:
        return env.R_max

    def gap(R):
        return rising_velocity(R, env.fluid) * env.window - (beam.center_height - beam.aperture_radius - R)

    lo, hi = 1e-9, env.R_max
    if gap(hi) < 0:
        return env.R_max
    if gap(lo) > 0:
        return 0.0
    # velocity branches are not continuous, so bisect on the sign only
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0:
            hi = mid
        else:
            lo = mid
    return hi


class _DistanceProfile:
    """Chebyshev interpolant of b(D) for a batch of radii."""

    def __init__(self, R, beam, order):
        r = beam.aperture_radius
        self.R = R
        self.inner = np.abs(r - R)
        self.outer = r + R
        t, transform = _cheb_nodes(order)
        q = 0.5 * (t + 1.0)
        D_in = self.inner[:, None] * q
        D_lens, _ = _sin2_map(q, self.inner[:, None], self.outer[:, None])
        Rc = R[:, None]
        self.c_inner = _cheb_coeffs(obstructed_power(D_in, Rc, beam), transform)
        self.c_lens = _cheb_coeffs(obstructed_power(D_lens, Rc, beam), transform)

    def __call__(self, D):
        """Evaluate b at ``D`` of shape (n_radii, ...)."""
        extra = (None,) * (D.ndim - 1)
        inner = self.inner[(slice(None),) + extra]
        outer = self.outer[(slice(None),) + extra]
        t_in = 2.0 * np.clip(D / np.where(inner > 0, inner, 1.0), 0.0, 1.0) - 1.0
        t_lens = 2.0 * _sin2_inverse(D, inner, outer) - 1.0
        c_in = self.c_inner.T[(slice(None), slice(None)) + extra]
        c_lens = self.c_lens.T[(slice(None), slice(None)) + extra]
        v_in = cheb.chebval(t_in, c_in, tensor=False)
        v_lens = cheb.chebval(t_lens, c_lens, tensor=False)
        out = np.where(D < inner, v_in, v_lens)
        return np.where(D > outer, 0.0, np.maximum(out, 0.0))


def _offset_antiderivatives(R, env, res):
    """Chebyshev antiderivatives of beta_0, beta_1, beta_2 over y >= 0.

    Returns (panel edges, coefficient arrays) with panels [0, |r-R|] and
    [|r-R|, r+R], both in the sin^2-mapped coordinate.
    """
    beam = env.beam
    r = beam.aperture_radius
    sx = env.sigma_x
    prof = _DistanceProfile(R, beam, res.distance_order)
    d, s = prof.inner, prof.outer
    t, transform = _cheb_nodes(res.offset_order)
    q = 0.5 * (t + 1.0)
    gl_q, gl_w = gauss_legendre(res.lateral_order).on_interval(0.0, 1.0)
    panels = [(np.zeros_like(d), d), (d, s)]
    coeffs = []
    for lo, hi in panels:
        y, dy = _sin2_map(q, lo[:, None], hi[:, None])          # (nR, ny)
        X = np.sqrt(np.maximum(s[:, None] ** 2 - y * y, 0.0))
        xd = np.sqrt(np.maximum(d[:, None] ** 2 - y * y, 0.0))
        beta = np.zeros((3,) + y.shape)
        beta[0] = special.erf(X / (math.sqrt(2.0) * sx))
        for a, b in ((np.zeros_like(xd), xd), (xd, X)):
            x, dx = _sin2_map(gl_q, a[..., None], b[..., None])  # (nR, ny, nx)
            wx = gl_w * dx * np.exp(-0.5 * (x / sx) ** 2) / (math.sqrt(2 * math.pi) * sx)
            bd = prof(np.hypot(x, y[..., None]))
            beta[1] += 2.0 * np.sum(wx * bd, axis=-1)
            beta[2] += 2.0 * np.sum(wx * bd * bd, axis=-1)
        c = _cheb_coeffs(beta * dy, transform)                   # (3, nR, n)
        # d/dt = (1/2) d/dq, integrate from t = -1
        coeffs.append(0.5 * cheb.chebint(np.moveaxis(c, -1, 0), lbnd=-1.0))
    return d, s, coeffs


def _cumulative(u, d, s, coeffs):
    """C_k(u) = int_{-s}^{u} beta_k dy for u of shape (nR, M); returns (3, nR, M)."""
    d_, s_ = d[:, None], s[:, None]
    c1, c2 = coeffs
    first_total = cheb.chebval(1.0, c1)                           # (3, nR)
    second_total = cheb.chebval(1.0, c2)
    half = (first_total + second_total)[..., None]
    au = np.minimum(np.abs(u), s_)
    in_first = au < d_
    t1 = 2.0 * _sin2_inverse(au, 0.0, d_) - 1.0
    t2 = 2.0 * _sin2_inverse(au, d_, s_) - 1.0
    A = np.where(in_first,
                 cheb.chebval(t1, c1[..., None], tensor=False),
                 first_total[..., None] + cheb.chebval(t2, c2[..., None], tensor=False))
    return half + np.sign(u) * A


def interval_profile(env, resolution=None):
    """Moments and blocking probability of every generation interval."""
    res = resolution or MomentResolution()
    n = env.n_bubbles
    if n == 0:
        empty = np.zeros(0)
        return IntervalProfile(empty, empty.copy(), empty.copy())
    R, wR = _radius_nodes(env, res)
    v = rising_velocity(R, env.fluid)
    d, s, coeffs = _offset_antiderivatives(R, env, res)
    hc = env.beam.center_height
    step = v * env.L
    # intervals touching |y| < s form a contiguous run for each radius
    first = np.clip(np.floor((hc - s) / step).astype(np.int64) + 1, 1, n + 1)
    width = int(min(n, np.max(np.ceil(2 * s / step)) + 2))
    idx = first[:, None] + np.arange(width)[None, :]
    valid = idx <= n
    u_lo = step[:, None] * (idx - 1) - hc
    u_hi = step[:, None] * idx - hc
    valid &= (u_hi > -s[:, None]) & (u_lo < s[:, None])
    diff = _cumulative(u_hi, d, s, coeffs) - _cumulative(u_lo, d, s, coeffs)
    scale = np.where(valid, (wR / step)[:, None], 0.0)
    cols = np.where(valid, idx - 1, 0).ravel()
    out = np.stack([np.bincount(cols, weights=(scale * diff[k]).ravel(), minlength=n) for k in range(3)])
    return IntervalProfile(mean=out[1], second=out[2], p_block=out[0])


@lru_cache(maxsize=4)
def _cached_profile(env, resolution):
    return interval_profile(env, resolution)


def moment_single_bubble(i, env, order, resolution=None):
    """E[B_i] (order 1) or E[B_i^2] (order 2) for generation interval ``i``."""
    if order not in (1, 2):
        raise ParameterError("order must be 1 or 2")
    if i < 1:
        raise ParameterError("interval index starts at 1")
    if i > env.n_bubbles:
        return 0.0
    prof = _cached_profile(env, resolution or MomentResolution())
    return float(prof.mean[i - 1] if order == 1 else prof.second[i - 1])


def summarise_moments(profile):
    """Combine per-interval moments of independent bubbles."""
    e_b = float(profile.mean.sum())
    # cross terms over distinct pairs only
    e_b2 = float(profile.second.sum() + e_b**2 - np.sum(profile.mean**2))
    per = list(zip(profile.mean.tolist(), profile.second.tolist()))
    return MomentSummary(e_b=e_b, e_b2=e_b2, per_bubble=per)


def total_moments(env, resolution=None):
    return summarise_moments(interval_profile(env, resolution))


def prob_no_obstruction(env, resolution=None):
    return interval_profile(env, resolution).p_clear


def _moment_residual(e_b, e_b2, b):
    log_lhs = 2.0 * math.log(e_b)
    log_rhs = math.log(b * e_b2)

    def residual(k):
        return log_lhs + ln_gamma(1 + 2 / k) - log_rhs - 2 * ln_gamma(1 + 1 / k)

    return residual


def fit_weibull(moments, b):
    """Shape and scale matching b*lambda*G(1+1/k) = E[B], b*lambda^2*G(1+2/k) = E[B^2]."""
    if not 0 < b <= 1:
        raise ParameterError("b must lie in (0, 1]")
    e_b, e_b2 = moments.e_b, moments.e_b2
    if not (e_b > 0 and e_b2 > 0):
        raise FitError("moments must be positive", moment_ratio=float("nan"))
    ratio = b * e_b2 / e_b**2
    residual = _moment_residual(e_b, e_b2, b)
    try:
        k = find_root_bracketed(residual, *K_BRACKET, tol=1e-15)
    except Exception as exc:
        raise FitError(f"no Weibull shape in {K_BRACKET} for b*E[B^2]/E[B]^2 = {ratio:.6g}",
                       moment_ratio=ratio) from exc
    lam = e_b / (b * math.exp(ln_gamma(1 + 1 / k)))
    return k, lam


@dataclass(frozen=True)
class ObstructionModel:
    """Received power model: mass ``c`` at 0, mass ``a`` at ``m`` and
    density ``b f_W(m - x)`` in between (Weibull shape ``k``, scale ``lam``)."""

    a: float
    b: float
    c: float
    k: float
    lam: float
    m: float

    def __post_init__(self):
        if not (0 <= self.a <= 1 and 0 <= self.b <= 1 and 0 <= self.c <= self.b + 1e-15):
            raise ParameterError("invalid mixture probabilities")
        if abs(self.a + self.b - 1) > 1e-12:
            raise ParameterError("a + b must equal 1")
        if not (self.k > 0 and self.lam > 0 and self.m > 0):
            raise ParameterError("k, lambda and m must be positive")

    @classmethod
    def from_fit(cls, a, k, lam, m):
        b = 1.0 - a
        c = b * math.exp(-((m / lam) ** k))
        return cls(a=a, b=b, c=c, k=k, lam=lam, m=m)

    def normalized(self):
        """Same model with the aperture power rescaled to 1."""
        return ObstructionModel(self.a, self.b, self.c, self.k, self.lam / self.m, 1.0)

    def weibull_pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = np.maximum(x, 0.0) / self.lam
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = self.k / self.lam * z ** (self.k - 1) * np.exp(-(z**self.k))
        return np.where(x > 0, dens, 0.0)

    def weibull_cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return -np.expm1(-((x / self.lam) ** self.k))

    def density(self, x):
        """Continuous part of the received-power density on (0, m)."""
        x = np.asarray(x, dtype=float)
        inside = (x > 0) & (x < self.m)
        return np.where(inside, self.b * self.weibull_pdf(self.m - x), 0.0)

    def cdf(self, x):
        """CDF of the received power, including both point masses."""
        x = np.asarray(x, dtype=float)
        fm = self.weibull_cdf(self.m)
        body = self.c + self.b * (fm - self.weibull_cdf(self.m - np.clip(x, 0.0, self.m)))
        return np.where(x < 0, 0.0, np.where(x >= self.m, 1.0, body))

    def bin_probabilities(self, edges):
        """Model probability of each interior bin (lo, hi]."""
        edges = np.clip(np.asarray(edges, dtype=float), 0.0, self.m)
        tail = self.weibull_cdf(self.m - edges)
        return self.b * (tail[:-1] - tail[1:])

    def to_record(self):
        return {"a": self.a, "b": self.b, "c": self.c, "k": self.k, "lambda": self.lam, "m": self.m}

    @classmethod
    def from_record(cls, rec):
        return cls(a=rec["a"], b=rec["b"], c=rec["c"], k=rec["k"], lam=rec["lambda"], m=rec["m"])


def model_pdf_Hb(x, model):
    """Generalized density of the received power at ``x``.

    Returns ``(point_mass, density)``: the probability atom located at ``x``
    (``c`` at 0, ``a`` at ``m``) and the continuous density there.
    """
    x = float(x)
    if x < 0 or x > model.m:
        return 0.0, 0.0
    mass = model.c if x == 0 else (model.a if x == model.m else 0.0)
    return mass, float(model.density(x))


@dataclass
class ModelBuild:
    model: ObstructionModel
    moments: MomentSummary
    profile: IntervalProfile


def build_obstruction_model(env, resolution=None):
    """Full analytical pipeline; returns the model together with its moments."""
    profile = interval_profile(env, resolution)
    moments = summarise_moments(profile)
    a = profile.p_clear
    if moments.e_b <= 0 or a >= 1.0:
        raise FitError("no bubble reaches the beam, so there is no partial obstruction to fit",
                       moment_ratio=float("nan"))
    k, lam = fit_weibull(moments, 1.0 - a)
    model = ObstructionModel.from_fit(a, k, lam, aperture_power(env.beam))
    return ModelBuild(model=model, moments=moments, profile=profile)


def default_test_points(m, n=101):
    return np.linspace(0.0, m, n)


def mse_test(dist, model, points=None):
    """Mean squared difference between empirical and model CDFs at ``points``."""
    from .simulator import empirical_cdf

    points = default_test_points(model.m) if points is None else np.asarray(points, dtype=float)
    if points.size < 2:
        raise ParameterError("need at least two test points")
    diff = empirical_cdf(dist, points) - model.cdf(points)
    return float(np.mean(diff**2))


def r2_test(dist, model):
    """Coefficient of determination over the interior histogram bins."""
    counts = np.asarray(dist.hist_counts, dtype=float)
    if counts.size < 2:
        raise ParameterError("need at least two interior bins")
    f_s = counts / dist.n_trials
    f_p = model.bin_probabilities(dist.hist_edges)
    s_t = float(np.sum((f_s - f_s.mean()) ** 2))
    if s_t == 0:
        raise DegenerateDataError("empirical bin probabilities have no spread")
    return 1.0 - float(np.sum((f_s - f_p) ** 2)) / s_t


def env_record(env):
    return asdict(env)
