import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steindrift import basis as B
from steindrift import rng
from steindrift.process import (
    DriftSpec,
    Path,
    extract_coeffs,
    ito_coefficients,
    log_girsanov,
    render_path,
    simulate_noise,
    synthesize,
)
from steindrift.risk import MCConfig, girsanov_mean, pointwise_errors, summarize


def test_noise_is_deterministic(unit_basis):
    a = simulate_noise(unit_basis, 11, 3)
    b = simulate_noise(unit_basis, 11, 3)
    assert np.array_equal(a.eta, b.eta)
    assert not np.array_equal(a.eta, simulate_noise(unit_basis, 11, 4).eta)


def test_noise_moments():
    eta = simulate_noise(B.BasisSpec(1.0, 1.0, 100_000), 5).eta
    assert abs(eta.mean()) < 3 / math.sqrt(eta.size)
    assert abs(eta.var(ddof=1) - 1) < 3 * math.sqrt(2 / eta.size)


@settings(max_examples=30)
@given(st.integers(0, 2**32), st.integers(0, 10_000), st.integers(1, 40), st.integers(1, 40), st.integers(0, 3))
def test_replicate_draws_are_prefix_consistent(seed, rep, n1, n2, stream):
    short, long_ = sorted((n1, n2))
    a = rng.replicate_rng(seed, rep, stream).standard_normal(short)
    b = rng.replicate_rng(seed, rep, stream).standard_normal(long_)
    assert np.array_equal(a, b[:short])


@settings(max_examples=20)
@given(st.integers(0, 2**32), st.integers(0, 5000), st.integers(1, 30), st.integers(1, 16))
def test_normal_rows_match_single_replicates(seed, start, count, dim):
    rows = rng.normal_rows(seed, start, start + count, dim)
    for i in (0, count - 1):
        ref = rng.replicate_rng(seed, start + i).standard_normal(dim)
        assert np.array_equal(rows[i], ref)


def test_streams_differ():
    a = rng.normal_rows(1, 0, 4, 5, rng.NOISE)
    b = rng.normal_rows(1, 0, 4, 5, rng.PRIOR)
    assert not np.array_equal(a, b)


def test_noiseless_path_is_exact(unit_basis, unit_grid):
    draw = simulate_noise(unit_basis, 0)
    zero = type(draw)(np.zeros_like(draw.eta), 0)
    path = render_path(unit_basis, zero, DriftSpec.linear(1.7), unit_grid)
    np.testing.assert_array_equal(path.values, 1.7 * unit_grid.points)


def test_path_starts_at_zero(unit_basis, unit_grid):
    path = render_path(unit_basis, simulate_noise(unit_basis, 3), DriftSpec.zero(), unit_grid)
    assert path.values[0] == 0.0


@pytest.mark.parametrize("N,M", [(50, 64), (300, 64), (1000, 128), (5000, 256)])
def test_synthesis_matches_direct_sum(N, M):
    b = B.BasisSpec(1.3, 0.7, N)
    grid = B.TimeGrid(0.7, M)
    eta = np.random.default_rng(N).standard_normal(N)
    direct = b.sigma**2 * eta @ B.h(b, np.arange(1, N + 1)[:, None], grid.points)
    np.testing.assert_allclose(synthesize(b, eta, grid)[0], direct, atol=1e-10)


def test_second_moments_match_variance():
    cfg = MCConfig.standard(0.0, 1.0, 1.0, 10_000, seed=2, M=1024, N=1000)
    times = (0.25, 0.5, 1.0)
    err = pointwise_errors(cfg, times)
    for j, t in enumerate(times):
        m, se = summarize(err[:, j] ** 2)
        assert abs(m - t) <= 3 * se


def test_truncated_covariance_converges():
    grid = B.TimeGrid(1.0, 64)
    t = grid.points
    exact = np.minimum.outer(t, t)
    errs = []
    for N in (10, 100, 10_000):
        b = B.BasisSpec(1.0, 1.0, N)
        H = B.h(b, np.arange(1, N + 1)[:, None], t)
        errs.append(np.abs(H.T @ H - exact).max())
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4


def test_extract_noiseless_matches_drift_coeff(unit_basis, unit_grid):
    alpha = 0.9
    path = Path(unit_grid, alpha * unit_grid.points)
    c = extract_coeffs(unit_basis, path, 5)
    ref = B.drift_coeff(unit_basis, lambda t: alpha + 0 * t, np.arange(1, 6), unit_grid)
    np.testing.assert_allclose(c.values, ref, atol=1e-6)
    assert c.values[0] == pytest.approx(2 * math.sqrt(2) * alpha / math.pi, abs=1e-6)


def test_zero_path_has_zero_coefficients(unit_basis, unit_grid):
    c = extract_coeffs(unit_basis, Path(unit_grid, np.zeros(unit_grid.M + 1)), 8)
    assert not c.values.any()


def test_coefficient_roundtrip():
    b = B.BasisSpec(1.0, 1.0, 10_000)
    grid = B.TimeGrid(1.0, 4096)
    for rep in range(10):
        draw = simulate_noise(b, 42, rep)
        c = extract_coeffs(b, render_path(b, draw, DriftSpec.zero(), grid), 10)
        assert np.abs(c.values - draw.eta[:10]).max() <= 0.01


def test_ito_coefficients_batch_rows(unit_basis, unit_grid):
    eta = rng.normal_rows(0, 0, 3, unit_basis.N)
    paths = synthesize(unit_basis, eta, unit_grid)
    batch = ito_coefficients(unit_basis, paths, unit_grid, 6)
    single = ito_coefficients(unit_basis, paths[1], unit_grid, 6)
    np.testing.assert_allclose(batch[1], single, rtol=1e-13)
    with pytest.raises(ValueError):
        ito_coefficients(unit_basis, paths, unit_grid, unit_basis.N + 1)


def test_log_girsanov_examples(unit_basis, unit_grid):
    path = render_path(unit_basis, simulate_noise(unit_basis, 1), DriftSpec.zero(), unit_grid)
    assert log_girsanov(1.0, DriftSpec.zero(), path) == 0.0
    noiseless = Path(unit_grid, unit_grid.points.copy())
    assert log_girsanov(1.0, DriftSpec.linear(1.0), noiseless) == pytest.approx(0.5, rel=1e-12)
    noiseless = Path(B.TimeGrid(2.0, 512), 3.0 * B.TimeGrid(2.0, 512).points)
    assert log_girsanov(1.5, DriftSpec.linear(3.0), noiseless) == pytest.approx(9 * 2 / (2 * 1.5**2), rel=1e-12)


def test_girsanov_density_has_unit_mean():
    cfg = MCConfig.standard(0.0, 1.0, 1.0, 10_000, seed=3, M=1024, N=1000)
    rep = girsanov_mean(cfg, DriftSpec.linear(1.0))
    assert rep.deviation() <= 3


def test_custom_drift_matches_linear(unit_basis, unit_grid):
    custom = DriftSpec.custom(lambda t: 2.0 + 0 * t)
    np.testing.assert_allclose(custom.values(unit_grid), 2.0 * unit_grid.points, atol=1e-12)
    np.testing.assert_allclose(
        custom.coeffs(unit_basis, 6, unit_grid), DriftSpec.linear(2.0).coeffs(unit_basis, 6), rtol=1e-5
    )


def test_path_csv_roundtrip(tmp_path, unit_basis):
    grid = B.TimeGrid(1.0, 256)
    path = render_path(unit_basis, simulate_noise(unit_basis, 9), DriftSpec.linear(1.0), grid)
    path.to_csv(tmp_path / "p.csv", {"seed": 9})
    back = Path.from_csv(tmp_path / "p.csv")
    assert np.array_equal(back.values, path.values)
    raw = (tmp_path / "p.csv").read_bytes()
    assert b"\r" not in raw and raw.startswith(b"# steindrift")


def test_invalid_paths_and_drifts():
    grid = B.TimeGrid(1.0, 8)
    with pytest.raises(ValueError):
        Path(grid, np.ones(9))
    with pytest.raises(ValueError):
        Path(grid, np.zeros(5))
    with pytest.raises(ValueError):
        DriftSpec("quadratic")
    with pytest.raises(TypeError):
        DriftSpec("custom")
