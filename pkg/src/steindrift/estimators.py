"""Drift estimators computed from one observed path."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import BasisSpec, SpectralCoeffs, TimeGrid, lam, project
from .functionals import SingularityError, SteinFamilyParams, dlog_F
from .io import write_table
from .process import DriftSpec, Path, extract_coeffs

KINDS = ("minimax", "stein", "james_stein", "bayes", "mle_linear")


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str
    basis: BasisSpec
    params: SteinFamilyParams | None = None
    tau: float | None = None
    prior: DriftSpec = field(default_factory=DriftSpec.zero)
    a_fn: Callable | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator {self.kind!r}; choose from {KINDS}")
        if self.kind in ("stein", "james_stein"):
            if self.params is None:
                raise ValueError(f"{self.kind} estimator needs functional parameters")
            if self.params.n < 3:
                raise ValueError("superefficiency needs n >= 3")
            if self.params.n > self.basis.N:
                raise ValueError(f"n={self.params.n} exceeds basis order N={self.basis.N}")
            if self.kind == "james_stein" and (self.params.a != 2 - self.params.n or np.any(self.params.b)):
                raise ValueError("james_stein uses a = 2 - n and b = 0")
        if self.kind == "bayes" and not (self.tau is not None and self.tau > 0):
            raise ValueError("bayes estimator needs a positive prior scale tau")
        if self.kind == "mle_linear" and self.a_fn is None:
            raise ValueError("mle_linear needs a regressor a(t)")

    @classmethod
    def minimax(cls, basis):
        return cls("minimax", basis)

    @classmethod
    def stein(cls, basis, n, a=None, b=None):
        return cls("stein", basis, SteinFamilyParams(n, 2.0 - n if a is None else a, b))

    @classmethod
    def james_stein(cls, basis, n):
        return cls("james_stein", basis, SteinFamilyParams.james_stein(n))

    @classmethod
    def bayes(cls, basis, tau, prior=None):
        return cls("bayes", basis, tau=tau, prior=prior or DriftSpec.zero())

    @property
    def n(self) -> int | None:
        return None if self.params is None else self.params.n


@dataclass(frozen=True)
class DriftEstimate:
    grid: TimeGrid
    values: np.ndarray
    kind: str
    n: int | None = None
    coeffs: SpectralCoeffs | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.M + 1,):
            raise ValueError("estimate length does not match the grid")
        object.__setattr__(self, "values", v)

    def to_csv(self, dest, meta=None) -> None:
        meta = dict(meta or {})
        meta.setdefault("estimator", self.kind)
        if self.n is not None:
            meta.setdefault("n", self.n)
        write_table(dest, ("t", "u_hat"), zip(self.grid.points, self.values), meta)


def minimax(path: Path) -> DriftEstimate:
    return DriftEstimate(path.grid, path.values.copy(), "minimax")


def stein(path: Path, basis: BasisSpec, params: SteinFamilyParams) -> DriftEstimate:
    """``X + D log F`` with ``F = f_{n,a,b}`` of the path's standardized coordinates."""
    if params.n < 3:
        raise ValueError("superefficiency needs n >= 3")
    coeffs = extract_coeffs(basis, path, params.n)
    corr = dlog_F(params, coeffs, basis, path.grid.points)
    return DriftEstimate(path.grid, path.values + corr, "stein", params.n, coeffs)


def stein_correction(basis: BasisSpec, coeffs, n: int, t):
    """James-Stein correction written as an explicit sine sum.

    ``-(n-2) sqrt(2/T) sum_k c_k/lam_k sin((k-1/2) pi t/T) / sum_l c_l**2/lam_l**2``
    with ``c_k = X(h_k)``.
    """
    c = np.asarray(coeffs.values if isinstance(coeffs, SpectralCoeffs) else coeffs, dtype=float)[:n]
    if len(c) < n:
        raise ValueError(f"need {n} coefficients, got {len(c)}")
    inv = 1.0 / lam(basis, np.arange(1, n + 1))
    denom = np.sum((inv * c) ** 2)
    if denom == 0:
        raise SingularityError("all projected coordinates vanish")
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    for k in range(1, n + 1):
        total = total + inv[k - 1] * c[k - 1] * np.sin((k - 0.5) * np.pi * t / basis.T)
    return -(n - 2) * np.sqrt(2 / basis.T) * total / denom


def james_stein_correction(basis: BasisSpec, coeffs: SpectralCoeffs, n: int, grid: TimeGrid) -> np.ndarray:
    """``-(n-2) Pi_n X / ||Pi_n X||**2`` with the norm taken by quadrature on ``grid``."""
    proj = project(basis, coeffs.standardized(), n, grid.points)
    norm2 = float(grid.integrate(proj * proj))
    if norm2 == 0:
        raise SingularityError("projection of the path vanishes")
    return -(n - 2) * proj / norm2


def james_stein(path: Path, basis: BasisSpec, n: int) -> DriftEstimate:
    if n < 3:
        raise ValueError("superefficiency needs n >= 3")
    coeffs = extract_coeffs(basis, path, n)
    corr = james_stein_correction(basis, coeffs, n, path.grid)
    return DriftEstimate(path.grid, path.values + corr, "james_stein", n, coeffs)


def bayes_weights(sigma: float, tau: float) -> tuple[float, float]:
    """Weights on (prior mean, observation) for scalar covariances."""
    s2, t2 = sigma**2, tau**2
    return s2 / (s2 + t2), t2 / (s2 + t2)


def bayes(path: Path, sigma: float, tau: float, prior: DriftSpec | None = None) -> DriftEstimate:
    """Posterior mean of the drift under a Brownian prior of scale ``tau`` around ``prior``."""
    if not tau > 0:
        raise ValueError("prior scale tau must be positive")
    prior = prior or DriftSpec.zero()
    wv, wx = bayes_weights(sigma, tau)
    return DriftEstimate(path.grid, wv * prior.values(path.grid) + wx * path.values, "bayes")


def mle_linear(path: Path, a: Callable) -> float:
    """``int a dX / int a**2 dt`` for a deterministic regressor ``a(t)``."""
    t = path.grid.points
    av = np.broadcast_to(np.asarray(a(t), dtype=float), t.shape)
    energy = float(path.grid.integrate(av**2))
    if energy == 0:
        raise ValueError("regressor a(t) vanishes identically")
    return float(np.dot(av[:-1], np.diff(path.values))) / energy


def estimate(spec: EstimatorSpec, path: Path) -> DriftEstimate:
    if spec.kind == "minimax":
        return minimax(path)
    if spec.kind == "stein":
        return stein(path, spec.basis, spec.params)
    if spec.kind == "james_stein":
        return james_stein(path, spec.basis, spec.params.n)
    if spec.kind == "bayes":
        return bayes(path, spec.basis.sigma, spec.tau, spec.prior)
    raise ValueError("mle_linear returns a slope, not a drift path; call mle_linear() directly")
