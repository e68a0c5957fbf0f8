"""
Monte Carlo engine for the received power under bubble obstruction.

Each trial draws one bubble per generation interval, sums the power each
bubble blocks (overlaps between bubbles are ignored) and clamps the total
to the aperture power ``m``. Trial ``j`` of a run with seed ``s`` always
uses the generator ``default_rng([s, j])``, so results do not depend on
chunking, worker count or how a run is split.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bubbles import draw_population, rising_velocity
from .errors import ParameterError
from .geometry import aperture_power, obstructed_power

DEFAULT_BINS = 100
_CHUNK = 2048


def trial_rng(seed, trial_index):
    return np.random.default_rng([int(seed), int(trial_index)])


class ObstructionTable:
    """Bilinear cache of blocked power over bubble radius and distance.

    Grid lines follow the tangency curves ``D = |r - R|`` and ``D = r + R``
    where the blocked power has kinks: for ``D < |r - R|`` the coordinate is
    ``D / |r - R|``; in the partial-overlap band it is
    ``q = (2/pi) asin(sqrt(s))`` with ``s`` the fractional position across
    the band, which also smooths the 3/2-power behaviour at both tangencies.
    """

    def __init__(self, beam, R_max, n_radius=400, n_offset=200, order=64):
        r = beam.aperture_radius
        self.r = r
        self.beam = beam
        self.m = aperture_power(beam)
        if R_max > r:
            n_lo = max(2, int(round(n_radius * r / R_max)))
            radii = np.concatenate([np.linspace(0.0, r, n_lo + 1)[:-1], np.linspace(r, R_max, n_radius - n_lo)])
        else:
            radii = np.linspace(0.0, R_max, n_radius)
        self.radii = radii
        self.q = np.linspace(0.0, 1.0, n_offset)
        s = np.sin(0.5 * np.pi * self.q) ** 2
        inner = np.abs(r - radii)[:, None]
        band = 2.0 * np.minimum(r, radii)[:, None]
        R_col = np.broadcast_to(radii[:, None], (radii.size, self.q.size))
        self.lens = obstructed_power(inner + s * band, R_col, beam, order)
        self.inner = obstructed_power(inner * self.q, R_col, beam, order)

    def __call__(self, D, R):
        D = np.asarray(D, dtype=float)
        R = np.asarray(R, dtype=float)
        radii, nq = self.radii, self.q.size
        j = np.clip(np.searchsorted(radii, R, side="right") - 1, 0, radii.size - 2)
        b = (R - radii[j]) / (radii[j + 1] - radii[j])
        lo = np.abs(self.r - R)
        band = 2.0 * np.minimum(self.r, R)
        s = np.clip((D - lo) / np.where(band > 0, band, 1.0), 0.0, 1.0)
        q = (2.0 / np.pi) * np.arcsin(np.sqrt(s))
        u = np.clip(D / np.where(lo > 0, lo, 1.0), 0.0, 1.0)

        def bilinear(table, x):
            f = x * (nq - 1)
            i = np.minimum(f.astype(np.intp), nq - 2)
            a = f - i
            return ((1 - a) * (1 - b) * table[j, i] + a * (1 - b) * table[j, i + 1]
                    + (1 - a) * b * table[j + 1, i] + a * b * table[j + 1, i + 1])

        out = np.where(D < lo, bilinear(self.inner, u), bilinear(self.lens, q))
        return np.clip(np.where(D > self.r + R, 0.0, out), 0.0, self.m)


@lru_cache(maxsize=8)
def _cached_table(beam, R_max):
    return ObstructionTable(beam, R_max)


@dataclass
class EmpiricalDistribution:
    """Received power samples with point masses at 0 and ``m``.

    ``samples`` holds the clamped received power per trial and
    ``obstructed`` the raw (unclamped) blocked power sum.
    """

    samples: np.ndarray
    obstructed: np.ndarray
    m: float
    seed: int
    first_trial: int = 0
    bins: int = DEFAULT_BINS
    hist_edges: np.ndarray = field(init=False)
    hist_counts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.obstructed = np.asarray(self.obstructed, dtype=float)
        self.hist_edges = np.linspace(0.0, self.m, self.bins + 1)
        interior = self.samples[(self.samples > 0) & (self.samples < self.m)]
        self.hist_counts = np.histogram(interior, bins=self.hist_edges)[0]

    @property
    def n_trials(self):
        return int(self.samples.size)

    @property
    def mass_at_zero(self):
        return float(np.count_nonzero(self.samples <= 0.0)) / self.n_trials

    @property
    def mass_at_m(self):
        return float(np.count_nonzero(self.samples >= self.m)) / self.n_trials

    @property
    def interior_mass(self):
        return float(self.hist_counts.sum()) / self.n_trials

    def summary(self):
        n = self.n_trials
        c_hat, a_hat = self.mass_at_zero, self.mass_at_m
        return {
            "n_trials": n,
            "seed": self.seed,
            "first_trial": self.first_trial,
            "m": self.m,
            "c_hat": c_hat,
            "b_hat": 1.0 - a_hat,
            "a_hat": a_hat,
            "c_hat_se": math.sqrt(c_hat * (1 - c_hat) / n),
            "a_hat_se": math.sqrt(a_hat * (1 - a_hat) / n),
            "mean_received": float(self.samples.mean()),
            "mean_obstructed_unclamped": float(self.obstructed.mean()),
            "std_obstructed_unclamped": float(self.obstructed.std(ddof=1)) if n > 1 else 0.0,
        }

    def concat(self, other):
        if other.first_trial != self.first_trial + self.n_trials or other.seed != self.seed:
            raise ParameterError("runs are not contiguous")
        return EmpiricalDistribution(
            np.concatenate([self.samples, other.samples]),
            np.concatenate([self.obstructed, other.obstructed]),
            self.m, self.seed, self.first_trial, self.bins)


def _obstruction_sums(env, draws, exact):
    """Unclamped blocked-power sum for each row of (x, R, t) draws."""
    x, R, t = draws
    beam = env.beam
    r = beam.aperture_radius
    H = rising_velocity(np.maximum(R, 1e-300), env.fluid) * t
    D = np.hypot(x, H - beam.center_height)
    hit = D <= r + R
    total = np.zeros(x.shape[0])
    if hit.any():
        rows = np.nonzero(hit)[0]
        if exact:
            vals = obstructed_power(D[hit], R[hit], beam)
        else:
            vals = _cached_table(beam, env.R_max)(D[hit], R[hit])
        total += np.bincount(rows, weights=vals, minlength=x.shape[0])
    return total


def _draw_chunk(env, seed, start, count):
    n = env.n_bubbles
    x = np.empty((count, n))
    R = np.empty((count, n))
    t = np.empty((count, n))
    for k in range(count):
        x[k], R[k], t[k] = draw_population(env, trial_rng(seed, start + k))
    return x, R, t


def _run_chunk(args):
    env, seed, start, count, exact = args
    if env.n_bubbles == 0:
        return np.zeros(count)
    return _obstruction_sums(env, _draw_chunk(env, seed, start, count), exact)


def simulate_trial(env, rng, exact=False):
    """One trial: returns (unclamped blocked power, received power)."""
    m = aperture_power(env.beam)
    if env.n_bubbles == 0:
        return 0.0, m
    x, R, t = (a[None, :] for a in draw_population(env, rng))
    total = float(_obstruction_sums(env, (x, R, t), exact)[0])
    return total, m - min(max(total, 0.0), m)


def _workers():
    try:
        return max(1, int(os.environ.get("BUBBLECHAN_THREADS", "1")))
    except ValueError:
        return 1


def run_ensemble(env, n_trials, seed, first_trial=0, exact=False, bins=DEFAULT_BINS, workers=None):
    """Run ``n_trials`` independent trials starting at trial index ``first_trial``."""
    if n_trials < 1:
        raise ParameterError("n_trials must be at least 1")
    workers = workers or _workers()
    jobs = [(env, seed, s, min(_CHUNK, first_trial + n_trials - s), exact)
            for s in range(first_trial, first_trial + n_trials, _CHUNK)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(job) for job in jobs]
    obstructed = np.concatenate(parts)
    m = aperture_power(env.beam)
    received = m - np.clip(obstructed, 0.0, m)
    return EmpiricalDistribution(received, obstructed, m, seed, first_trial, bins)


def empirical_cdf(dist, points):
    """Right-continuous empirical CDF of the received power at ``points``."""
    ordered = np.sort(dist.samples)
    return np.searchsorted(ordered, np.asarray(points, dtype=float), side="right") / ordered.size
