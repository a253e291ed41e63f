"""Cylindrical functionals and the power-of-norm family.

A cylindrical functional ``F = f(z_1, ..., z_n)`` is evaluated on the
standardized coordinates ``z_k = X(h_k) / lam_k``. Because the modes
``Gamma h_k / lam_k`` are orthonormal in ``L^2(dt)``, the Malliavin
Laplacian of ``F`` is the Euclidean Laplacian of ``f`` and

    D_t log F = sum_k (d_k log f)(z) * sqrt(2/T) sin((k - 1/2) pi t / T).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .basis import BasisSpec, SpectralCoeffs, modes


class SingularityError(ArithmeticError):
    """Raised when ``x + b`` hits the origin of a negative power of the norm."""


@dataclass(frozen=True)
class SteinFamilyParams:
    """Parameters of ``f(x) = ||x + b||**a`` in ``n`` coordinates."""

    n: int
    a: float
    b: np.ndarray | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n}")
        b = np.zeros(self.n) if self.b is None else np.asarray(self.b, dtype=float)
        if b.shape != (self.n,):
            raise ValueError(f"shift must have {self.n} entries, got shape {b.shape}")
        object.__setattr__(self, "b", b)

    @classmethod
    def james_stein(cls, n: int) -> "SteinFamilyParams":
        if n < 3:
            raise ValueError("James-Stein functional needs n >= 3")
        return cls(n, 2.0 - n)

    @property
    def sqrt_superharmonic(self) -> bool:
        return 4 - 2 * self.n <= self.a <= 0

    @property
    def superharmonic(self) -> bool:
        return 2 - self.n <= self.a <= 0

    def __eq__(self, other):
        return (
            isinstance(other, SteinFamilyParams)
            and self.n == other.n
            and self.a == other.a
            and np.array_equal(self.b, other.b)
        )

    def __hash__(self):
        return hash((self.n, self.a, self.b.tobytes()))


def _shifted_sq(params: SteinFamilyParams, x) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(x, dtype=float) + params.b
    if y.shape[-1] != params.n:
        raise ValueError(f"expected {params.n} coordinates, got {y.shape[-1]}")
    r2 = np.sum(y * y, axis=-1)
    return y, r2


def _guard(r2, what: str):
    if np.any(r2 == 0):
        raise SingularityError(f"{what}: x + b is at the origin")


def f_nab(params: SteinFamilyParams, x):
    """``||x + b||**a``."""
    _, r2 = _shifted_sq(params, x)
    if params.a == 0:
        return np.ones_like(r2)[()]
    if params.a < 0:
        _guard(r2, "f_nab")
    return (r2 ** (params.a / 2))[()]


def log_gradient(params: SteinFamilyParams, x) -> np.ndarray:
    """Coordinate gradient of ``log f``: ``a (x + b) / ||x + b||**2``."""
    y, r2 = _shifted_sq(params, x)
    if params.a == 0:
        return np.zeros_like(y)
    _guard(r2, "log gradient")
    return params.a * y / r2[..., None]


def laplacian_ratio_sqrtF(params: SteinFamilyParams, x):
    """``Lap(sqrt f) / sqrt f = a (n - 2 + a/2) / 2 / ||x + b||**2``."""
    _, r2 = _shifted_sq(params, x)
    if params.a == 0:
        return np.zeros_like(r2)[()]
    _guard(r2, "laplacian ratio")
    return (params.a * (params.n - 2 + params.a / 2) / 2 / r2)[()]


def laplacian_ratio_F(params: SteinFamilyParams, x):
    """``Lap(f) / f = a (n + a - 2) / ||x + b||**2``."""
    _, r2 = _shifted_sq(params, x)
    if params.a == 0:
        return np.zeros_like(r2)[()]
    _guard(r2, "laplacian ratio")
    return (params.a * (params.n + params.a - 2) / r2)[()]


def dlog_F(params: SteinFamilyParams, coeffs: SpectralCoeffs, basis: BasisSpec, t):
    """Malliavin derivative of ``log F`` at time(s) ``t``.

    ``coeffs`` are path coordinates ``X(h_k)``; they are standardized before
    ``f`` is applied. A zero shifted norm raises ``SingularityError``.
    """
    if len(coeffs) < params.n:
        raise ValueError(f"need {params.n} coefficients, got {len(coeffs)}")
    z = coeffs.standardized()[: params.n]
    g = log_gradient(params, z)
    out = g @ modes(basis, params.n, t)
    return out if np.ndim(t) else float(out[0])


@dataclass(frozen=True)
class CylindricalFunctional:
    """A positive function of ``n`` coordinates.

    ``hessian_diag`` may be omitted, in which case the Laplacian falls back
    to central differences and ``analytic`` reports ``False``.
    """

    n: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    hessian_diag: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = field(default="", compare=False)

    def __call__(self, x) -> float:
        return self.value(np.asarray(x, dtype=float))

    @property
    def analytic(self) -> bool:
        return self.hessian_diag is not None

    def laplacian(self, x, step: float = 1e-4) -> float:
        if self.hessian_diag is not None:
            return float(np.sum(self.hessian_diag(np.asarray(x, dtype=float))))
        return fd_laplacian(self, x, step)


def stein_functional(params: SteinFamilyParams) -> CylindricalFunctional:
    """``f_{n,a,b}`` with analytic gradient and Hessian diagonal."""
    a, b = params.a, params.b

    def grad(x):
        y = x + b
        r2 = y @ y
        return a * y * r2 ** (a / 2 - 1)

    def hdiag(x):
        y = x + b
        r2 = y @ y
        return a * r2 ** (a / 2 - 1) + a * (a - 2) * y * y * r2 ** (a / 2 - 2)

    return CylindricalFunctional(
        params.n, lambda x: float(f_nab(params, x)), grad, hdiag, f"||x+b||^{a:g}"
    )


def fd_laplacian(fn, x, step: float = 1e-4) -> float:
    """Central-difference Laplacian ``sum_i (f(x+s e_i) - 2 f(x) + f(x-s e_i)) / s**2``."""
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    f0 = fn(x)
    total = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        total += fn(x + e) - 2 * f0 + fn(x - e)
    return total / step**2


@dataclass(frozen=True)
class SuperharmonicReport:
    ok: bool
    worst_laplacian: float
    worst_point: np.ndarray
    checked: int

    def __bool__(self):
        return self.ok


def is_superharmonic(fn: CylindricalFunctional, samples: Sequence, slack: float = 1e-12) -> SuperharmonicReport:
    pts = [np.asarray(p, dtype=float) for p in samples]
    if not pts:
        raise ValueError("no sample points given")
    laps = [fn.laplacian(p) for p in pts]
    worst = int(np.argmax(laps))
    return SuperharmonicReport(laps[worst] <= slack, float(laps[worst]), pts[worst], len(pts))
