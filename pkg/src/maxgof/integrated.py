"""
Weight kernels and integrated (extremal) periodogram surfaces.

The integrated surface ``J(lambda_j) = sum_h gamma(h) psi~_h(lambda_j)`` is a
weighted partial sum of the periodogram over the Fourier grid, so the fast
path computes the periodogram once (FFT of the folded lag array) and then a
2-D inclusive prefix sum.  The naive path sums ``gamma(h) * psi~_h`` lag by lag.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .extremal import LagFunction, fourier_frequencies, periodogram_grid
from .fields import ModelSpec, theoretical_extremogram

__all__ = [
    "WeightFunction",
    "FourierSurface",
    "grid_index",
    "psi_quadrature",
    "psi_discrete",
    "psi_surface",
    "integrated_surface",
    "theoretical_integrated",
]

TWO_PI = 2.0 * np.pi


class WeightFunction:
    """Nonnegative product weight ``g(x) = g1(x1) * g2(x2)`` on ``[0, 2pi]^2``.

    ``g1`` and ``g2`` are tabulated on equally spaced nodes spanning
    ``[0, 2pi]`` and linearly interpolated.  ``WeightFunction()`` is ``g = 1``.
    """

    def __init__(self, g1=None, g2=None):
        self.g1 = None if g1 is None else np.asarray(g1, dtype=float)
        self.g2 = None if g2 is None else np.asarray(g2, dtype=float)
        for table in (self.g1, self.g2):
            if table is not None:
                if table.ndim != 1 or table.size < 2:
                    raise ValueError("weight tables need at least two nodes")
                if np.any(table < 0) or not np.all(np.isfinite(table)):
                    raise ValueError("weight tables must be finite and nonnegative")

    @classmethod
    def constant_one(cls) -> "WeightFunction":
        return cls()

    @classmethod
    def product(cls, g1, g2) -> "WeightFunction":
        return cls(g1, g2)

    @property
    def is_constant(self) -> bool:
        return self.g1 is None and self.g2 is None

    @staticmethod
    def _axis(table, x):
        x = np.asarray(x, dtype=float)
        if table is None:
            return np.ones_like(x)
        nodes = np.linspace(0.0, TWO_PI, table.size)
        return np.interp(x, nodes, table)

    def __call__(self, x1, x2):
        return self._axis(self.g1, x1) * self._axis(self.g2, x2)

    def on_grid(self, n: int) -> np.ndarray:
        lam = fourier_frequencies(n)
        return np.outer(self._axis(self.g1, lam), self._axis(self.g2, lam))

    def describe(self) -> str:
        return "constant_one" if self.is_constant else "product"


@dataclass
class FourierSurface:
    """Values on the grid ``lambda_i = (2 pi i1 / n, 2 pi i2 / n)``, ``1 <= i1, i2 <= n``.

    ``values[i1 - 1, i2 - 1]`` holds the value at ``lambda_i``.
    """

    values: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError(f"surface must be square, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("surface values must be finite")
        self.values = values
        self.n = values.shape[0]

    def at(self, omega) -> float:
        """Value at the grid point ``lambda_j`` with ``j = floor(n omega / 2pi)``."""
        j1, j2 = grid_index(omega, self.n)
        if j1 == 0 or j2 == 0:
            raise ValueError("omega lies below the first grid point")
        return float(self.values[j1 - 1, j2 - 1])

    def to_csv(self, path=None) -> str:
        lam = fourier_frequencies(self.n)
        buf = io.StringIO()
        buf.write("i1,i2,lambda1,lambda2,value\n")
        for a in range(self.n):
            for b in range(self.n):
                buf.write(f"{a + 1},{b + 1},{float(lam[a])!r},{float(lam[b])!r},{float(self.values[a, b])!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "FourierSurface":
        text = Path(source).read_text() if isinstance(source, Path) else source
        rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        n = int(rows[:, 0].max())
        values = np.zeros((n, n))
        values[rows[:, 0].astype(int) - 1, rows[:, 1].astype(int) - 1] = rows[:, 4]
        return cls(values)


def grid_index(omega, n: int):
    """``(floor(n w1 / 2pi), floor(n w2 / 2pi))``, robust to rounding at grid points."""
    out = []
    for w in (omega[0], omega[1]):
        x = n * float(w) / TWO_PI
        # grid frequencies 2 pi j / n may round to j - 1e-15
        out.append(int(math.floor(x + 1e-9)))
    return tuple(min(max(j, 0), n) for j in out)


# ----------------------------------------------------------------------------
# psi kernels
# ----------------------------------------------------------------------------

def psi_quadrature(h, omega, g: Optional[WeightFunction] = None, subdivisions: int = 200) -> float:
    """Composite midpoint rule for ``int_[0,w1]x[0,w2] g(x) cos(h . x) dx``."""
    if subdivisions < 1:
        raise ValueError("subdivisions must be >= 1")
    g = g or WeightFunction()
    w1, w2 = float(omega[0]), float(omega[1])
    if w1 == 0.0 or w2 == 0.0:
        return 0.0
    x1 = (np.arange(subdivisions) + 0.5) * (w1 / subdivisions)
    x2 = (np.arange(subdivisions) + 0.5) * (w2 / subdivisions)
    weights = g(x1[:, None], x2[None, :])
    integrand = weights * np.cos(h[0] * x1[:, None] + h[1] * x2[None, :])
    return float(integrand.sum() * (w1 / subdivisions) * (w2 / subdivisions))


def psi_discrete(h, omega, n: int, g: Optional[WeightFunction] = None) -> float:
    """``(4 pi^2 / n^2) sum_{i1 <= j1, i2 <= j2} g(lambda_i) cos(h . lambda_i)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    g = g or WeightFunction()
    j1, j2 = grid_index(omega, n)
    if j1 == 0 or j2 == 0:
        return 0.0
    lam = fourier_frequencies(n)
    l1, l2 = lam[:j1], lam[:j2]
    terms = g(l1[:, None], l2[None, :]) * np.cos(h[0] * l1[:, None] + h[1] * l2[None, :])
    return float(4.0 * np.pi ** 2 / n ** 2 * terms.sum())


def _prefix2(a: np.ndarray) -> np.ndarray:
    return np.cumsum(np.cumsum(a, axis=0), axis=1)


def psi_surface(h, n: int, g: Optional[WeightFunction] = None) -> np.ndarray:
    """``psi~_h`` on every grid point, as an ``n x n`` array."""
    g = g or WeightFunction()
    lam = fourier_frequencies(n)
    terms = g.on_grid(n) * np.cos(h[0] * lam[:, None] + h[1] * lam[None, :])
    return 4.0 * np.pi ** 2 / n ** 2 * _prefix2(terms)


# ----------------------------------------------------------------------------
# Integrated surfaces
# ----------------------------------------------------------------------------

def _check_support(gamma: LagFunction, n: int):
    if len(gamma) == 0:
        return
    h = np.abs(gamma.lags)
    if h.max() >= n or np.any(h[:, 0] ** 2 + h[:, 1] ** 2 >= n ** 2):
        raise ValueError(f"lag function support exceeds ||h|| < n = {n}")


def integrated_surface(gamma: LagFunction, n: int, g: Optional[WeightFunction] = None,
                       naive: bool = False) -> FourierSurface:
    """``J(lambda_j) = sum_h gamma(h) psi~_h(lambda_j)`` on the whole grid.

    The default path evaluates the periodogram of ``gamma`` on the grid and
    takes a 2-D inclusive prefix sum of ``g * periodogram``.  ``naive=True``
    sums the per-lag kernels instead.
    """
    _check_support(gamma, n)
    g = g or WeightFunction()
    if naive:
        out = np.zeros((n, n))
        for h, v in zip(gamma.lags, gamma.values):
            out += v * psi_surface(h, n, g)
        return FourierSurface(out)
    pgram = periodogram_grid(gamma, n)
    return FourierSurface(4.0 * np.pi ** 2 / n ** 2 * _prefix2(g.on_grid(n) * pgram))


def theoretical_integrated(spec: ModelSpec, g: Optional[WeightFunction], omega,
                           lag_cap: int = 10, subdivisions: int = 200) -> float:
    """``sum_{||h|| <= lag_cap} gamma(h) psi_h(omega)`` with quadrature for ``psi_h``."""
    lags = LagFunction.lag_set(lag_cap)
    gam = np.atleast_1d(theoretical_extremogram(spec, lags))
    total = 0.0
    for h, v in zip(lags, gam):
        if v != 0.0:
            total += v * psi_quadrature(h, omega, g, subdivisions)
    return total
