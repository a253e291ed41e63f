import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from steindrift import basis as B
from steindrift.estimators import james_stein_correction
from steindrift.functionals import (
    CylindricalFunctional,
    SingularityError,
    SteinFamilyParams,
    dlog_F,
    f_nab,
    fd_laplacian,
    is_superharmonic,
    laplacian_ratio_F,
    laplacian_ratio_sqrtF,
    log_gradient,
    stein_functional,
)

coord = st.floats(-5, 5, allow_nan=False)


def vectors(n):
    return arrays(np.float64, n, elements=coord)


def test_f_nab_examples():
    p = SteinFamilyParams(3, -1.0)
    assert f_nab(p, [1.0, 0, 0]) == 1.0
    assert f_nab(p, [3.0, 4.0, 0]) == pytest.approx(0.2, rel=1e-15)
    assert f_nab(SteinFamilyParams(3, 0.0), [0.0, 0, 0]) == 1.0
    with pytest.raises(SingularityError):
        f_nab(p, [0.0, 0, 0])


def test_laplacian_ratio_examples():
    assert laplacian_ratio_sqrtF(SteinFamilyParams(3, -1.0), [1.0, 0, 0]) == pytest.approx(-0.25)
    assert laplacian_ratio_sqrtF(SteinFamilyParams(3, 0.0), [1.0, 2, 0]) == 0.0
    assert laplacian_ratio_F(SteinFamilyParams(3, -0.5), [1.0, 0, 0]) == pytest.approx(-0.25)
    assert laplacian_ratio_F(SteinFamilyParams(3, -3.0), [1.0, 0, 0]) > 0


@given(st.integers(3, 12).flatmap(lambda n: st.tuples(st.just(n), vectors(n), vectors(n))))
def test_harmonic_exponent_has_zero_laplacian_ratio(case):
    n, x, b = case
    p = SteinFamilyParams(n, 2.0 - n, b)
    assume(np.sum((x + b) ** 2) > 1e-6)
    assert laplacian_ratio_F(p, x) == 0.0


@settings(max_examples=200)
@given(
    st.integers(3, 12).flatmap(
        lambda n: st.tuples(st.just(n), st.floats(-2.0 * n, 2.0), vectors(n), vectors(n))
    )
)
def test_identity_between_laplacians(case):
    n, a, x, b = case
    assume(np.sum((x + b) ** 2) > 1e-3)
    p = SteinFamilyParams(n, a, b)
    f, g = stein_functional(p), stein_functional(SteinFamilyParams(n, a / 2, b))
    lhs = 4 * g.laplacian(x) / g(x)
    gl = log_gradient(p, x)
    rhs = 2 * f.laplacian(x) / f(x) - gl @ gl
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1e-300)
    assert lhs == pytest.approx(4 * laplacian_ratio_sqrtF(p, x), rel=1e-10, abs=1e-300)


def test_fd_laplacian_of_square_norm():
    f = CylindricalFunctional(3, lambda x: float(x @ x))
    assert fd_laplacian(f, np.array([0.3, -1.2, 2.0])) == pytest.approx(6.0, abs=1e-5)
    assert not f.analytic


@pytest.mark.parametrize("n,a", [(3, -1.0), (4, -2.0), (4, -3.0), (6, -4.0), (6, -8.0)])
def test_fd_laplacian_converges_quadratically(n, a):
    gen = np.random.default_rng(n)
    p = SteinFamilyParams(n, a, gen.normal(size=n))
    x = gen.normal(size=n) + 1.5
    for fam, exact in ((p, laplacian_ratio_F(p, x)), (SteinFamilyParams(n, a / 2, p.b), laplacian_ratio_sqrtF(p, x))):
        f = stein_functional(fam)
        scale = max(abs(exact), 1 / np.sum((x + p.b) ** 2))
        errs = [abs(fd_laplacian(f, x, h) / f(x) - exact) for h in (1e-2, 5e-3, 2.5e-3)]
        assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)
        assert errs[1] / errs[2] == pytest.approx(4, rel=0.1)
        assert abs(fd_laplacian(f, x) / f(x) - exact) <= 1e-5 * scale


def test_superharmonic_predicate(gen):
    pts = list(gen.normal(size=(50, 4)))
    assert is_superharmonic(stein_functional(SteinFamilyParams(4, -2.0)), pts)
    square = CylindricalFunctional(4, lambda x: float(x @ x), hessian_diag=lambda x: np.full(4, 2.0))
    assert not is_superharmonic(square, pts)
    one = CylindricalFunctional(4, lambda x: 1.0, hessian_diag=lambda x: np.zeros(4))
    assert is_superharmonic(one, pts)
    # a = -n lies outside the superharmonic range
    assert not is_superharmonic(stein_functional(SteinFamilyParams(4, -4.0)), pts)
    assert SteinFamilyParams(4, -2.0).superharmonic and not SteinFamilyParams(4, -4.0).superharmonic
    assert SteinFamilyParams(4, -4.0).sqrt_superharmonic


def test_dlog_F_rejects_zero_coefficients():
    b = B.BasisSpec(1.0, 1.0, 10)
    with pytest.raises(SingularityError):
        dlog_F(SteinFamilyParams.james_stein(3), B.coordinates(b, np.zeros(3)), b, 0.5)


def test_dlog_F_single_coefficient():
    b = B.BasisSpec(1.0, 1.0, 10)
    c1 = 0.7
    t = np.linspace(0, 1, 9)
    got = dlog_F(SteinFamilyParams.james_stein(3), B.coordinates(b, [c1, 0, 0]), b, t)
    l1 = B.lam(b, 1)
    ref = -math.sqrt(2) * (c1 / l1) * np.sin(np.pi * t / 2) / (c1 / l1) ** 2
    np.testing.assert_allclose(got, ref, rtol=1e-14, atol=1e-15)


@settings(max_examples=100)
@given(
    st.integers(3, 15).flatmap(lambda n: st.tuples(st.just(n), vectors(n))),
    st.floats(0.2, 5.0),
    st.floats(0.2, 5.0),
)
def test_dlog_F_equals_projection_form(case, sigma, T):
    n, c = case
    assume(np.sum(c * c) > 1e-3)
    b = B.BasisSpec(sigma, T, n)
    grid = B.TimeGrid(T, 512)
    coeffs = B.coordinates(b, c)
    got = dlog_F(SteinFamilyParams.james_stein(n), coeffs, b, grid.points)
    ref = james_stein_correction(b, coeffs, n, grid)
    assert np.abs(got - ref).max() <= 1e-10 * np.abs(ref).max()


def test_log_gradient_ignores_constant_factor(gen):
    p = SteinFamilyParams(5, -2.5, gen.normal(size=5))
    x = gen.normal(size=5)
    h = 1e-6
    for scale in (1.0, 7.3):
        num = [
            (math.log(scale * f_nab(p, x + h * e)) - math.log(scale * f_nab(p, x - h * e))) / (2 * h)
            for e in np.eye(5)
        ]
        np.testing.assert_allclose(num, log_gradient(p, x), rtol=1e-7)


def test_params_validation():
    with pytest.raises(ValueError):
        SteinFamilyParams.james_stein(2)
    with pytest.raises(ValueError):
        SteinFamilyParams(3, -1.0, np.zeros(4))
    assert SteinFamilyParams(3, -1.0) == SteinFamilyParams(3, -1.0, np.zeros(3))
    assert len({SteinFamilyParams(3, -1.0), SteinFamilyParams(3, -1.0)}) == 1
