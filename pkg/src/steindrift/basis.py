"""Sine eigenbasis of Brownian motion with constant variance.

The basis functions are indexed from 1. ``h_k`` is orthonormal in the
Cameron-Martin space of ``sigma * W`` and ``Gamma h_k = sigma**2 h_k`` is
orthogonal in ``L^2([0, T], dt)`` with norm ``lam(basis, k)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i T / M`` on ``[0, T]``."""

    T: float
    M: int = 4096

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"grid needs at least 2 intervals, got M={self.M}")

    @property
    def dt(self) -> float:
        return self.T / self.M

    @cached_property
    def points(self) -> np.ndarray:
        t = np.arange(self.M + 1) * self.dt
        t[-1] = self.T
        t.setflags(write=False)
        return t

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights."""
        w = np.full(self.M + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        w.setflags(write=False)
        return w

    def integrate(self, values) -> np.ndarray:
        """Trapezoid integral of ``values`` along the last axis."""
        return np.sum(np.asarray(values) * self.weights, axis=-1)


@dataclass(frozen=True)
class BasisSpec:
    sigma: float
    T: float
    N: int = 1000

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"truncation order N must be >= 1, got {self.N}")

    def grid(self, M: int = 4096) -> TimeGrid:
        return TimeGrid(self.T, M)


@dataclass(frozen=True)
class SpectralCoeffs:
    """Coordinates ``X(h_k) = int hdot_k dX`` of a path, ``k = 1..n``.

    Under the driftless measure these are independent standard Gaussians.
    ``standardized()`` gives ``X(h_k) / lam_k``, the coordinates on which
    the Stein functionals act.
    """

    values: np.ndarray
    basis: BasisSpec = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("coefficients must be a 1-d sequence")
        if len(v) > self.basis.N:
            raise ValueError(f"{len(v)} coefficients exceed basis order N={self.basis.N}")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def standardized(self) -> np.ndarray:
        return self.values / lam(self.basis, np.arange(1, len(self) + 1))


def _index(k):
    k = np.asarray(k)
    if np.any(k < 1):
        raise ValueError("basis indices start at 1")
    return k


def _freq(basis: BasisSpec, k) -> np.ndarray:
    return (_index(k) - 0.5) * np.pi / basis.T


def _phase(basis: BasisSpec, k, t) -> np.ndarray:
    """``(k - 1/2) t / T`` reduced mod 2, in units of pi."""
    return np.remainder((_index(k) - 0.5) * (np.asarray(t, dtype=float) / basis.T), 2.0)


def _sinpi(r):
    return np.where(r == 1.0, 0.0, np.sin(np.pi * r))[()]


def _cospi(r):
    return np.where((r == 0.5) | (r == 1.5), 0.0, np.cos(np.pi * r))[()]


def lam(basis: BasisSpec, k):
    """``sigma T / (pi (k - 1/2))``, the L2 norm of ``Gamma h_k``."""
    return basis.sigma * basis.T / (np.pi * (_index(k) - 0.5))


def h(basis: BasisSpec, k, t):
    k = _index(k)
    return (np.sqrt(2 * basis.T) / (basis.sigma * np.pi * (k - 0.5))) * _sinpi(_phase(basis, k, t))


def hdot(basis: BasisSpec, k, t):
    return np.sqrt(2 / basis.T) / basis.sigma * _cospi(_phase(basis, k, t))


def hddot(basis: BasisSpec, k, t):
    return -np.sqrt(2 / basis.T) / basis.sigma * _freq(basis, k) * _sinpi(_phase(basis, k, t))


def gamma_action(basis: BasisSpec, k, t):
    """Covariance operator applied to ``h_k``; for Brownian motion it is ``sigma**2 h_k``."""
    return basis.sigma**2 * h(basis, k, t)


def modes(basis: BasisSpec, n: int, t) -> np.ndarray:
    """Rows ``Gamma h_k / lam_k = sqrt(2/T) sin((k - 1/2) pi t / T)``, shape ``(n, len(t))``.

    These are orthonormal in ``L^2([0, T], dt)``.
    """
    k = np.arange(1, n + 1)[:, None]
    return np.sqrt(2 / basis.T) * _sinpi(_phase(basis, k, np.atleast_1d(t)[None, :]))


def drift_coeff(basis: BasisSpec, udot: Callable, k, grid: TimeGrid):
    """Trapezoid approximation of ``<u, h_k> = int_0^T udot(s) hdot_k(s) ds``."""
    t = grid.points
    u = np.broadcast_to(np.asarray(udot(t), dtype=float), t.shape)
    scalar = np.ndim(k) == 0
    k = np.atleast_1d(_index(k))
    vals = grid.integrate(u * hdot(basis, k[:, None], t))
    return float(vals[0]) if scalar else vals


def linear_drift_coeffs(basis: BasisSpec, alpha: float, n: int) -> np.ndarray:
    """Closed form of ``<u, h_k>`` for ``u_t = alpha t``, ``k = 1..n``."""
    k = np.arange(1, n + 1)
    return alpha * np.sqrt(2 * basis.T) * (-1.0) ** (k + 1) / (basis.sigma * np.pi * (k - 0.5))


def project(basis: BasisSpec, coords, n: int, t):
    """Evaluate ``sum_{k<=n} z_k Gamma h_k(t) / lam_k``.

    ``coords`` holds standardized coordinates ``z_k``; a ``SpectralCoeffs``
    is standardized first.
    """
    if isinstance(coords, SpectralCoeffs):
        coords = coords.standardized()
    z = np.asarray(coords, dtype=float)
    if n < 1 or n > z.shape[-1]:
        raise ValueError(f"projection order {n} outside 1..{z.shape[-1]}")
    out = z[..., :n] @ modes(basis, n, t)
    return out if np.ndim(t) else out[..., 0][()]


def coordinates(basis: BasisSpec, values: Sequence[float]) -> SpectralCoeffs:
    return SpectralCoeffs(np.asarray(values, dtype=float), basis)
