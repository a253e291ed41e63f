import math
from dataclasses import replace

import numpy as np
import pytest

from steindrift import rng
from steindrift.estimators import EstimatorSpec
from steindrift.functionals import SteinFamilyParams
from steindrift.io import read_table
from steindrift.process import synthesize
from steindrift.risk import (
    MCConfig,
    asymptote,
    bayes_risk,
    combined_se,
    cramer_rao_bound,
    empirical_risk,
    format_reports,
    gain,
    gain_curve,
    gain_large_sigma_limit,
    path_gain,
    pointwise_errors,
    risk_identity_check,
    small_noise_equivalent,
    small_noise_leading_term,
    stein_risk_closed_form,
    summarize,
    universal_constant,
    write_reports,
)

# E[1 / (x^2 + 9 y^2 + 25 z^2 + 49 r^2)] for standard Gaussians, from the
# one-dimensional Laplace representation evaluated with mpmath at 30 digits
CONSTANT_ORACLE = 0.035089537681909694


def cfg(samples=4000, **kw):
    base = dict(alpha=1.0, sigma=1.0, T=1.0, samples=samples, seed=5, M=1024, N=1000)
    base.update(kw)
    return MCConfig.standard(**base)


def test_closed_forms():
    assert cramer_rao_bound(1, 1) == 0.5
    assert cramer_rao_bound(2, 1) == 2.0
    assert cramer_rao_bound(1.3, 0) == 0.0
    assert asymptote(100) == pytest.approx(0.006079, abs=5e-7)
    assert asymptote(200) == pytest.approx(0.003040, abs=5e-7)
    assert small_noise_equivalent(10, 1, 1, 4) == pytest.approx(0.0025)
    assert small_noise_equivalent(10, 1, 1, 10**9) == pytest.approx(0.01, rel=1e-8)
    assert small_noise_leading_term(10, 1, 1, 4) == pytest.approx(4 * small_noise_equivalent(10, 1, 1, 4))
    with pytest.raises(ValueError):
        cramer_rao_bound(0, 1)
    with pytest.raises(ValueError):
        asymptote(2)


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(sigma=0.0)
    with pytest.raises(ValueError):
        cfg(samples=1)
    with pytest.raises(ValueError):
        MCConfig.standard(workers=0)


def test_summarize_matches_numpy(gen):
    v = gen.normal(size=1001)
    m, se = summarize(v)
    assert m == pytest.approx(v.mean(), rel=1e-13)
    assert se == pytest.approx(v.std(ddof=1) / math.sqrt(v.size), rel=1e-12)


def test_pointwise_variance_attains_bound():
    c = cfg(10_000, sigma=1.5, T=2.0)
    times = (0.5, 1.0, 2.0)
    err = pointwise_errors(c, times)
    for j, t in enumerate(times):
        m, se = summarize(err[:, j] ** 2)
        assert abs(m - 1.5**2 * t) <= 3 * se


def test_constant_shift_risk():
    c = cfg(4000)
    shift = 0.4
    eta = rng.normal_rows(c.base_seed, 0, c.samples, c.basis.N)
    noise = synthesize(c.basis, eta, c.grid)
    m, se = summarize(((noise + shift) ** 2) @ c.grid.weights)
    assert abs(m - (0.5 + shift**2 * c.T)) <= 3 * se


def test_stein_risk_forms_agree():
    c = cfg(10_000)
    direct = empirical_risk(EstimatorSpec.stein(c.basis, 4), c)
    closed = stein_risk_closed_form(c, 4)
    assert abs(direct.mean - closed.mean) <= 3 * combined_se(direct, closed)
    with pytest.raises(ValueError):
        stein_risk_closed_form(c, 2)


def test_path_and_coefficient_gains_agree():
    c = cfg(10_000)
    g, p = gain(c, 4), path_gain(c, 4)
    assert abs(g.mean - p.mean) <= 3 * combined_se(g, p)


@pytest.mark.parametrize("n", [3, 4, 8])
def test_risk_identity(n):
    rep = risk_identity_check(cfg(6000), SteinFamilyParams.james_stein(n))
    assert rep.ok, rep.differences


def test_risk_identity_general_exponent():
    rep = risk_identity_check(cfg(6000), SteinFamilyParams(6, -3.0))
    assert rep.ok, rep.differences


def test_trivial_functional_has_minimax_risk():
    c = cfg(2000)
    rep = risk_identity_check(c, SteinFamilyParams(4, 0.0))
    mm = empirical_risk(EstimatorSpec.minimax(c.basis), c)
    assert rep.direct.mean == mm.mean
    assert rep.gradient_form.mean == 0.5 == rep.laplacian_form.mean


@pytest.mark.parametrize("alpha,sigma,T", [(1, 1, 1), (0, 1, 1), (3, 0.5, 2), (1, 5, 0.3)])
def test_gain_is_positive(alpha, sigma, T):
    c = cfg(2000, alpha=alpha, sigma=sigma, T=T)
    for n in (3, 5, 12):
        assert gain(c, n).mean > 0


def test_gain_curve_peaks_at_four():
    rep = gain_curve(cfg(10_000, seed=0), 3, 20, escalate_to=100_000)
    assert rep.n_opt == 4
    assert np.all(np.diff(rep.gains[1:]) < 0)


def test_gain_curve_tie_breaks_to_smallest():
    c = cfg(3000, alpha=0.0, sigma=1e6)
    rep = gain_curve(c, 3, 3)
    assert rep.n_opt == rep.runner_up == 3 and math.isinf(rep.gap)


def test_asymptote_ratio():
    g = gain(cfg(100_000, M=2, N=400), 200)
    assert 0.9 <= g.mean / asymptote(200) <= 1.1


def test_small_noise_leading_term():
    g = gain(cfg(100_000, alpha=10.0, M=2), 4)
    assert g.mean / small_noise_leading_term(10, 1, 1, 4) == pytest.approx(1, abs=0.05)


@pytest.mark.parametrize("n", [3, 4, 8])
def test_large_sigma_limit(n):
    g = gain(cfg(100_000, sigma=1e3, M=2), n)
    lim = gain_large_sigma_limit(n, 100_000, seed=5)
    assert abs(g.mean - lim.mean) <= 3 * combined_se(g, lim)


def test_gain_approaches_limit_monotonically():
    lim = gain_large_sigma_limit(4, 100_000, seed=5)
    dist = [abs(gain(cfg(100_000, sigma=s, M=2), 4).mean - lim.mean) for s in (1, 10, 100)]
    assert dist[0] > dist[1] > dist[2]


def test_universal_constant_methods():
    lap = universal_constant("laplace")
    assert lap.expectation == pytest.approx(CONSTANT_ORACLE, rel=1e-10)
    mc = universal_constant("mc", 100_000, seed=1)
    assert abs(mc.expectation - CONSTANT_ORACLE) <= 3 * mc.error
    quad = universal_constant("quadrature", 40)
    assert abs(quad.expectation - CONSTANT_ORACLE) <= quad.error
    assert lap.gain_limit == pytest.approx(0.11377, abs=5e-6)
    assert lap.prefactor_ratio == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(ValueError):
        universal_constant("simpson")


@pytest.mark.parametrize("d,expected", [(3, 1.0), (4, 0.5), (6, 0.25)])
def test_inverse_chi_square_means(d, expected):
    q = (1,) * d
    assert universal_constant("laplace", weights=q).expectation == pytest.approx(expected, rel=1e-10)
    assert universal_constant("quadrature", 6, weights=q).expectation == pytest.approx(expected, rel=1e-10)
    mc = universal_constant("mc", 50_000, weights=q, seed=2)
    assert abs(mc.expectation - expected) <= 3 * mc.error


def test_constant_and_limit_agree():
    lim = gain_large_sigma_limit(4, 100_000, seed=8)
    lap = universal_constant("laplace")
    assert abs(lim.mean - lap.gain_limit) <= 3 * lim.se


def test_bayes_risk():
    r, mm = bayes_risk(cfg(10_000, alpha=0.0), 1.0)
    assert r.deviation() <= 3 and mm.deviation() <= 3
    r2, _ = bayes_risk(cfg(4000, alpha=0.0, sigma=0.5), 2.0)
    assert r2.closed_form == pytest.approx(0.25 * 4 / 4.25 / 2)
    assert r2.deviation() <= 3


def test_reports_do_not_depend_on_workers():
    base = cfg(1500, M=512, N=300)
    texts = set()
    for workers in (1, 2, 3):
        c = replace(base, workers=workers)
        items = [(empirical_risk(EstimatorSpec.stein(c.basis, 4), c), c), (gain(c, 6), c)]
        texts.add(format_reports(items))
    assert len(texts) == 1


def test_report_csv(tmp_path):
    c = cfg(500)
    write_reports(tmp_path / "r.csv", [(gain(c, 4), c)], {"seed": 5})
    meta, cols, rows = read_table(tmp_path / "r.csv")
    assert cols == ["quantity", "n", "alpha", "sigma", "T", "samples", "estimate", "se", "closed_form"]
    assert meta["seed"] == "5" and rows[0][0] == "gain"
    assert float(rows[0][6]) == gain(c, 4).mean


@pytest.mark.slow
@pytest.mark.parametrize("n", range(3, 11))
def test_superefficiency_for_small_n(n):
    c = cfg(10_000, seed=21)
    r = empirical_risk(EstimatorSpec.stein(c.basis, n), c)
    assert r.ok and 0.5 - r.mean >= 3 * r.se
