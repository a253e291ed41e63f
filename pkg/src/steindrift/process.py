"""Drifted Brownian paths from the truncated Paley-Wiener series.

The noise is ``X^u_t = sigma**2 sum_k eta_k h_k(t)``, i.e. a sine series
with amplitudes ``sigma sqrt(2T) eta_k / (pi (k - 1/2))``. On the uniform
grid the series is a type-II discrete sine transform, so a path costs
``O(M log M)`` regardless of the truncation order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.fft import dst
from scipy.integrate import cumulative_trapezoid

from . import rng
from .basis import BasisSpec, SpectralCoeffs, TimeGrid, drift_coeff, h, linear_drift_coeffs
from .io import read_columns, write_table


@dataclass(frozen=True)
class DriftSpec:
    """Deterministic drift ``u_t = int_0^t udot_s ds``.

    ``kind`` is ``"zero"``, ``"linear"`` (``udot = alpha``) or ``"custom"``.
    A custom ``udot`` must be a function of time alone; for multi-worker
    runs it must also be picklable.
    """

    kind: str = "zero"
    alpha: float = 0.0
    udot: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "custom"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.kind == "custom" and not callable(self.udot):
            raise TypeError("custom drift needs a callable udot(t)")
        if self.kind == "zero" and self.alpha != 0:
            raise ValueError("zero drift cannot carry a slope")

    @classmethod
    def zero(cls) -> "DriftSpec":
        return cls("zero")

    @classmethod
    def linear(cls, alpha: float) -> "DriftSpec":
        return cls("linear", float(alpha)) if alpha != 0 else cls("zero")

    @classmethod
    def custom(cls, udot) -> "DriftSpec":
        return cls("custom", 0.0, udot)

    def rate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "linear":
            return np.full_like(t, self.alpha)
        return np.broadcast_to(np.asarray(self.udot(t), dtype=float), t.shape).copy()

    def values(self, grid: TimeGrid) -> np.ndarray:
        t = grid.points
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "linear":
            return self.alpha * t
        return cumulative_trapezoid(self.rate(t), t, initial=0.0)

    def coeffs(self, basis: BasisSpec, n: int, grid: TimeGrid | None = None) -> np.ndarray:
        """``<u, h_k>`` for ``k = 1..n``; closed form unless custom."""
        if self.kind == "zero":
            return np.zeros(n)
        if self.kind == "linear":
            return linear_drift_coeffs(basis, self.alpha, n)
        grid = grid or basis.grid()
        return np.atleast_1d(drift_coeff(basis, self.rate, np.arange(1, n + 1), grid))

    def check(self, grid: TimeGrid) -> float:
        """Return ``int udot**2 dt``, raising if it is not finite."""
        energy = float(grid.integrate(self.rate(grid.points) ** 2))
        if not np.isfinite(energy):
            raise ValueError("drift rate is not square-integrable on the grid")
        return energy


@dataclass(frozen=True)
class Path:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.M + 1,):
            raise ValueError(f"path has {v.shape} values, grid needs {self.grid.M + 1}")
        if v[0] != 0:
            raise ValueError("paths start at 0")
        object.__setattr__(self, "values", v)

    def to_csv(self, dest, meta=None) -> None:
        write_table(dest, ("t", "x"), zip(self.grid.points, self.values), meta)

    @classmethod
    def from_csv(cls, src) -> "Path":
        t, x = read_columns(src, "t", "x")
        grid = TimeGrid(float(t[-1]), len(t) - 1)
        return cls(grid, x)


@dataclass(frozen=True)
class NoiseDraw:
    eta: np.ndarray
    seed: int
    replicate: int = 0
    stream: int = rng.NOISE


def simulate_noise(basis: BasisSpec, seed: int, replicate: int = 0, stream: int = rng.NOISE) -> NoiseDraw:
    eta = rng.replicate_rng(seed, replicate, stream).standard_normal(basis.N)
    return NoiseDraw(eta, seed, replicate, stream)


def synthesize(basis: BasisSpec, eta: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Noise paths ``sigma**2 sum_k eta_k h_k(t_i)`` for rows of ``eta``."""
    if grid.T != basis.T:
        raise ValueError(f"grid horizon {grid.T} differs from basis horizon {basis.T}")
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    N = eta.shape[-1]
    k = np.arange(1, N + 1)
    amp = eta * (basis.sigma * np.sqrt(2 * basis.T) / (np.pi * (k - 0.5)))
    M = grid.M
    # sin((k - 1/2) pi i / M) repeats with period 2M in k and flips sign
    # under k -> 2M + 1 - k, so terms beyond M fold onto the first M.
    if N <= M:
        folded = np.zeros((eta.shape[0], M))
        folded[:, :N] = amp
    else:
        periods = -(-N // (2 * M))
        padded = np.zeros((eta.shape[0], periods * 2 * M))
        padded[:, :N] = amp
        wrapped = padded.reshape(eta.shape[0], periods, 2 * M).sum(axis=1)
        folded = wrapped[:, :M] - wrapped[:, M:][:, ::-1]
    out = np.zeros((eta.shape[0], M + 1))
    out[:, 1:] = 0.5 * dst(folded, type=2, axis=-1)
    return out


def render_path(basis: BasisSpec, draw: NoiseDraw, drift: DriftSpec, grid: TimeGrid) -> Path:
    noise = synthesize(basis, draw.eta, grid)[0]
    return Path(grid, drift.values(grid) + noise)


def ito_coefficients(basis: BasisSpec, values: np.ndarray, grid: TimeGrid, n: int) -> np.ndarray:
    """``int hdot_k dX`` for ``k = 1..n`` from grid samples, per row.

    Each increment is weighted by the cell average of ``hdot_k``, i.e.
    ``(h_k(t_{i+1}) - h_k(t_i)) / dt``. Between grid points the noise is a
    Brownian bridge, so this is the conditional mean of the stochastic
    integral given the samples.
    """
    if n < 1:
        raise ValueError("need at least one coefficient")
    if n > basis.N:
        raise ValueError(f"order {n} exceeds basis truncation N={basis.N}")
    values = np.asarray(values, dtype=float)
    inc = np.diff(values, axis=-1)
    weights = np.diff(h(basis, np.arange(1, n + 1)[:, None], grid.points), axis=-1) / np.diff(grid.points)
    return inc @ weights.T


def extract_coeffs(basis: BasisSpec, path: Path, n: int) -> SpectralCoeffs:
    return SpectralCoeffs(ito_coefficients(basis, path.values, path.grid, n), basis)


def log_girsanov(sigma: float, drift: DriftSpec, path: Path) -> float:
    """``int udot/sigma**2 dX - 1/2 int udot**2/sigma**2 dt`` on the path's grid."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if drift.kind == "zero":
        return 0.0
    t = path.grid.points
    rate = drift.rate(t)
    stoch = float(np.dot(rate[:-1], np.diff(path.values)))
    return (stoch - 0.5 * float(path.grid.integrate(rate**2))) / sigma**2
