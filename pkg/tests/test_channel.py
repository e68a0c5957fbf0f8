import math

import numpy as np
import pytest
from scipy import integrate, special

from bubblechan.channel import (
    CompositeChannelParams,
    SnrDistribution,
    average_ber,
    composite_cdf_Hab,
    ergodic_capacity,
    gamma_gamma_cdf,
    gamma_gamma_pdf,
    parse_snr_grid,
    sample_gamma_gamma,
    snr_cdf,
    snr_pdf,
    sweep,
    write_sweep_csv,
)
from bubblechan.errors import ParameterError
from bubblechan.modelfit import ObstructionModel

A, B = 2.21, 3.31
M = 1 - math.exp(-0.5)


@pytest.fixture(scope="module")
def model():
    # shape of the (80/s, 1.95 mm) cell
    return ObstructionModel.from_fit(a=0.0108, k=1.43, lam=0.164, m=M)


def _h_b_samples(model, n, rng):
    """Exact draws from the normalized bubble model."""
    u = rng.random(n)
    w = (model.lam / model.m) * rng.weibull(model.k, n)
    return np.where(u < model.a, 1.0, np.clip(1.0 - w, 0.0, 1.0))


def test_gamma_gamma_normalised_and_unit_mean():
    total, _ = integrate.quad(lambda x: gamma_gamma_pdf(x, A, B), 0, np.inf, epsabs=1e-12, limit=400)
    mean, _ = integrate.quad(lambda x: x * gamma_gamma_pdf(x, A, B), 0, np.inf, epsabs=1e-12, limit=400)
    assert total == pytest.approx(1.0, abs=1e-6)
    assert mean == pytest.approx(1.0, abs=1e-6)


def test_gamma_gamma_symmetric_in_parameters():
    x = np.linspace(0.01, 6, 50)
    assert np.allclose(gamma_gamma_pdf(x, A, B), gamma_gamma_pdf(x, B, A), rtol=1e-12)


def test_gamma_gamma_unit_exponentials():
    # product of two unit-mean exponentials: f(x) = int exp(-u - x/u) / u du
    for x in (0.05, 0.7, 2.5):
        ref, _ = integrate.quad(lambda u: math.exp(-u - x / u) / u, 0, np.inf, epsabs=1e-13)
        assert gamma_gamma_pdf(x, 1.0, 1.0) == pytest.approx(ref, rel=1e-9)
        assert gamma_gamma_pdf(x, 1.0, 1.0) == pytest.approx(2 * special.k0(2 * math.sqrt(x)), rel=1e-12)


def test_gamma_gamma_pdf_edges():
    assert gamma_gamma_pdf(0.0, A, B) == 0.0
    assert gamma_gamma_pdf(-1.0, A, B) == 0.0
    assert 0.0 <= gamma_gamma_pdf(1e4, A, B) < 1e-200
    assert gamma_gamma_pdf(1e9, A, B) == 0.0
    with pytest.raises(ParameterError):
        gamma_gamma_pdf(1.0, -1.0, B)


@pytest.mark.parametrize("a,b", [(A, B), (1.0, 1.0), (0.6, 4.0), (3.0, 3.0)])
def test_gamma_gamma_cdf_against_quadrature_oracle(a, b):
    pts = [1e-3, 0.3, 1.0, 4.0]
    got = gamma_gamma_cdf(np.array(pts), a, b)
    for x, g in zip(pts, got):
        ref, _ = integrate.quad(lambda t: gamma_gamma_pdf(t, a, b), 0, x, epsabs=1e-14, epsrel=1e-12, limit=500)
        assert g == pytest.approx(ref, rel=1e-9, abs=1e-14)


def test_gamma_gamma_cdf_limits():
    assert gamma_gamma_cdf(0.0, A, B) == 0.0
    assert gamma_gamma_cdf(-3.0, A, B) == 0.0
    assert gamma_gamma_cdf(1e6, A, B) == pytest.approx(1.0, abs=1e-6)
    x = np.geomspace(1e-6, 100, 400)
    assert np.all(np.diff(gamma_gamma_cdf(x, A, B)) >= 0)


def test_gamma_gamma_sampler_matches_cdf():
    s = np.sort(sample_gamma_gamma(200000, A, B, np.random.default_rng(1)))
    emp = np.arange(1, s.size + 1) / s.size
    assert np.max(np.abs(emp - gamma_gamma_cdf(s, A, B))) < 0.005


def test_params_validation():
    with pytest.raises(ParameterError):
        CompositeChannelParams(gl_order=4)
    with pytest.raises(ParameterError):
        CompositeChannelParams(h_l=0.0)
    with pytest.raises(ParameterError):
        CompositeChannelParams(avg_snr=-1.0)
    p = CompositeChannelParams().with_snr_db(30.0)
    assert p.avg_snr == pytest.approx(1000.0)
    assert p.avg_snr_db == pytest.approx(30.0)


def test_composite_cdf_endpoints(model):
    p = CompositeChannelParams()
    assert composite_cdf_Hab(0.0, model, p) == pytest.approx(model.c, abs=1e-15)
    assert composite_cdf_Hab(1e6, model, p) == pytest.approx(1.0, abs=2e-4)
    x = np.linspace(0, 10, 300)
    assert np.all(np.diff(composite_cdf_Hab(x, model, p)) >= -1e-15)


def test_composite_cdf_against_monte_carlo(model):
    rng = np.random.default_rng(3)
    n = 10**6
    h = _h_b_samples(model, n, rng) * sample_gamma_gamma(n, A, B, rng)
    x = np.linspace(0.0, 4.0, 81)
    emp = np.searchsorted(np.sort(h), x, side="right") / n
    assert np.max(np.abs(emp - composite_cdf_Hab(x, model, CompositeChannelParams()))) < 0.005


def test_snr_distribution(model):
    d = SnrDistribution(model, CompositeChannelParams(avg_snr=100.0))
    assert d.model.m == 1.0
    assert snr_cdf(0.0, d) == pytest.approx(model.c)
    mass, dens = snr_pdf(0.0, d)
    assert mass == model.c and dens == 0.0
    # mass plus integrated density; integrate in u = sqrt(gamma)
    cont, _ = integrate.quad(lambda u: 2 * u * snr_pdf(u * u, d)[1], 0, np.inf, limit=400, epsabs=1e-12)
    assert model.c + cont == pytest.approx(1.0, abs=1e-5)


def test_snr_quantiles_against_monte_carlo(model):
    rng = np.random.default_rng(4)
    n = 10**6
    d = SnrDistribution(model, CompositeChannelParams(avg_snr=50.0, h_l=0.8))
    g = np.sort((0.8 * _h_b_samples(model, n, rng) * sample_gamma_gamma(n, A, B, rng)) ** 2 * 50.0)
    for q in (0.1, 0.25, 0.5, 0.75, 0.9):
        x = g[int(q * n)]
        assert snr_cdf(x, d) == pytest.approx(q, abs=0.002)
        lo, hi = np.interp([q - 0.002, q + 0.002], snr_cdf(g[::1000], d), g[::1000])
        assert lo <= x <= hi


def test_capacity_deterministic_channel():
    clear = ObstructionModel(a=1.0, b=0.0, c=0.0, k=1.0, lam=1.0, m=1.0)
    p = CompositeChannelParams(avg_snr=250.0, h_l=0.7, turbulence=False)
    assert ergodic_capacity(SnrDistribution(clear, p)) == pytest.approx(math.log2(1 + 0.49 * 250.0), rel=1e-12)


def test_capacity_vanishes_at_low_snr(model):
    d = SnrDistribution(model, CompositeChannelParams(avg_snr=1e-8))
    assert ergodic_capacity(d) < 1e-7


def test_ber_limits(model):
    low = SnrDistribution(model, CompositeChannelParams(avg_snr=1e-10))
    assert average_ber(low) == pytest.approx(0.5, abs=1e-4)
    high = SnrDistribution(model, CompositeChannelParams().with_snr_db(80.0))
    assert average_ber(high) == pytest.approx(model.c / 2, rel=0.01)


def test_metrics_against_monte_carlo(model):
    rng = np.random.default_rng(9)
    n = 10**6
    h = _h_b_samples(model, n, rng) * sample_gamma_gamma(n, A, B, rng)
    for db in (10.0, 30.0):
        d = SnrDistribution(model, CompositeChannelParams().with_snr_db(db))
        g = h * h * 10 ** (db / 10)
        assert ergodic_capacity(d) == pytest.approx(np.mean(np.log2(1 + g)), rel=0.01)
        assert average_ber(d) == pytest.approx(np.mean(special.erfc(np.sqrt(2 * g) / math.sqrt(2)) / 2), rel=0.02)


def test_monotone_in_snr(model):
    grid = np.arange(0.0, 51.0, 5.0)
    rows = sweep([("m", model)], CompositeChannelParams(), grid)
    cap = [r.capacity_bpcu for r in rows]
    excess = [r.avg_ber - model.c / 2 for r in rows]
    assert np.all(np.diff(cap) > 0)
    assert np.all(np.diff(excess) < 0)


def test_quadrature_order_convergence(model):
    for db in (10.0, 30.0):
        lo = SnrDistribution(model, CompositeChannelParams(gl_order=32).with_snr_db(db))
        hi = SnrDistribution(model, CompositeChannelParams(gl_order=64).with_snr_db(db))
        assert ergodic_capacity(lo) == pytest.approx(ergodic_capacity(hi), rel=1e-3)
        assert average_ber(lo) == pytest.approx(average_ber(hi), rel=1e-3)


def test_sweep_and_csv(model, tmp_path):
    heavier = ObstructionModel.from_fit(a=0.004, k=1.6, lam=0.34, m=M)
    rows = sweep({"light": model, "heavy": heavier}, CompositeChannelParams(), [20.0])
    assert len(rows) == 2
    assert rows[1].avg_ber > rows[0].avg_ber and rows[1].capacity_bpcu < rows[0].capacity_bpcu
    path = tmp_path / "s.csv"
    write_sweep_csv(rows, path)
    text = path.read_bytes().decode("utf-8")
    assert text.splitlines()[0] == "snr_db,capacity_bpcu,avg_ber,model_id"
    assert "\r" not in text and len(text.splitlines()) == 3
    with pytest.raises(ParameterError):
        sweep([("m", model)], CompositeChannelParams(), [])


def test_parse_snr_grid():
    assert parse_snr_grid("0:45:5") == [0.0 + 5 * i for i in range(10)]
    assert parse_snr_grid("10:10:1") == [10.0]
    for bad in ("0:10", "10:0:1", "0:10:0", "a:b:c"):
        with pytest.raises(ParameterError):
            parse_snr_grid(bad)


@pytest.mark.parametrize("k,lam", [(0.5, 0.01), (0.937, 0.0303), (1.43, 0.164), (2.3, 0.66)])
def test_mixture_mass_is_exact(k, lam):
    m = ObstructionModel.from_fit(a=0.3, k=k, lam=lam, m=M)
    d = SnrDistribution(m, CompositeChannelParams(avg_snr=1000.0))
    assert snr_cdf(1e12, d) == pytest.approx(1.0, abs=1e-12)


def test_uniform_nodes_match_for_smooth_shapes(model):
    for db in (10.0, 30.0):
        d_w = SnrDistribution(model, CompositeChannelParams().with_snr_db(db))
        d_u = SnrDistribution(model, CompositeChannelParams(node_rule="uniform").with_snr_db(db))
        assert ergodic_capacity(d_u) == pytest.approx(ergodic_capacity(d_w), rel=1e-3)
        assert average_ber(d_u) == pytest.approx(average_ber(d_w), rel=1e-3)
    with pytest.raises(ParameterError):
        CompositeChannelParams(node_rule="trapezoid")


def test_uniform_nodes_lose_mass_below_unit_shape():
    m = ObstructionModel.from_fit(a=0.3, k=0.937, lam=0.0303, m=M)
    d = SnrDistribution(m, CompositeChannelParams(node_rule="uniform"))
    assert abs(snr_cdf(1e12, d) - 1.0) > 1e-4
