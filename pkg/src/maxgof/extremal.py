"""
Exceedance indicators and the lag/frequency-domain estimators built on them.

Conventions
-----------
Lags are integer pairs ``h = (h1, h2)`` truncated in the Euclidean norm.
Lattice arrays are 0-based: ``values[i, j]`` is site ``(i + 1, j + 1)``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .fields import LatticeField

__all__ = [
    "ThresholdPlan",
    "ExceedanceField",
    "LagFunction",
    "empirical_quantile",
    "threshold_from_pool",
    "exceedances",
    "empirical_extremogram",
    "circular_pair_mean",
    "circular_pair_counts",
    "truncated_extremogram",
    "extremal_periodogram",
]


@dataclass(frozen=True)
class ThresholdPlan:
    """Target exceedance probability ``p0``, ``m_n = 1/p0`` and the threshold ``a_mn``."""

    p0: float
    a_mn: float

    def __post_init__(self):
        if not 0 < self.p0 < 1:
            raise ValueError(f"p0 must lie in (0, 1), got {self.p0}")
        if not math.isfinite(self.a_mn):
            raise ValueError(f"threshold must be finite, got {self.a_mn}")

    @property
    def m_n(self) -> float:
        return 1.0 / self.p0


@dataclass
class ExceedanceField:
    indicators: np.ndarray
    plan: ThresholdPlan

    @property
    def n(self) -> int:
        return self.indicators.shape[0]


def exceedances(field_: LatticeField, plan: ThresholdPlan) -> ExceedanceField:
    """Indicators ``1(|X_t| > a_mn)`` (strict inequality)."""
    ind = (np.abs(field_.values) > plan.a_mn).astype(np.int64)
    return ExceedanceField(ind, plan)


# ----------------------------------------------------------------------------
# Lag functions
# ----------------------------------------------------------------------------

class LagFunction:
    """Finitely supported function of integer lags.

    Parameters
    ----------
    lags : array of shape (K, 2)
        Distinct integer lags.
    values : array of shape (K,)
    lag_cap : float, optional
        Bound on the Euclidean norm of the support, for bookkeeping.
    """

    def __init__(self, lags, values, lag_cap: Optional[float] = None):
        lags = np.asarray(lags, dtype=np.int64).reshape(-1, 2)
        values = np.asarray(values, dtype=float).reshape(-1)
        if len(lags) != len(values):
            raise ValueError("lags and values differ in length")
        if not np.all(np.isfinite(values)):
            raise ValueError("lag function values must be finite")
        norms = np.hypot(lags[:, 0], lags[:, 1]) if len(lags) else np.zeros(0)
        if lag_cap is None:
            lag_cap = float(norms.max()) if len(lags) else 0.0
        elif len(lags) and norms.max() > lag_cap + 1e-12:
            raise ValueError("lag outside the declared cap")
        self.lags = lags
        self.values = values
        self.lag_cap = lag_cap

    def __len__(self):
        return len(self.values)

    def __getitem__(self, h) -> float:
        h1, h2 = int(h[0]), int(h[1])
        hit = np.nonzero((self.lags[:, 0] == h1) & (self.lags[:, 1] == h2))[0]
        return float(self.values[hit[0]]) if len(hit) else 0.0

    def as_dict(self) -> dict:
        return {(int(a), int(b)): float(v) for (a, b), v in zip(self.lags, self.values)}

    @classmethod
    def from_dict(cls, entries: dict, lag_cap=None) -> "LagFunction":
        lags = np.array(list(entries.keys()), dtype=np.int64).reshape(-1, 2)
        return cls(lags, list(entries.values()), lag_cap=lag_cap)

    def scaled(self, c: float) -> "LagFunction":
        return LagFunction(self.lags, c * self.values, self.lag_cap)

    @staticmethod
    def lag_set(cap: float, n: Optional[int] = None, strict: bool = False) -> np.ndarray:
        """All integer lags with ``||h|| <= cap`` (``< cap`` if ``strict``).

        With ``n`` given, lags also satisfy ``|h1|, |h2| < n``.
        """
        r = int(math.floor(cap))
        if n is not None:
            r = min(r, n - 1)
        rng = np.arange(-r, r + 1)
        h1, h2 = np.meshgrid(rng, rng, indexing="ij")
        sq = h1 ** 2 + h2 ** 2
        keep = sq < cap ** 2 if strict else sq <= cap ** 2 + 1e-9
        return np.column_stack([h1[keep], h2[keep]]).astype(np.int64)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("h1,h2,value\n")
        for (a, b), v in zip(self.lags, self.values):
            buf.write(f"{a},{b},{float(v)!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "LagFunction":
        text = Path(source).read_text() if isinstance(source, Path) else source
        rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        return cls(rows[:, :2].astype(np.int64), rows[:, 2])


# ----------------------------------------------------------------------------
# Thresholds
# ----------------------------------------------------------------------------

def empirical_quantile(values, p: float) -> float:
    """Order statistic of rank ``ceil(p * N)`` (1-based), no interpolation."""
    arr = np.sort(np.asarray(values, dtype=float).ravel())
    if arr.size == 0:
        raise ValueError("empirical quantile of an empty sample")
    k = math.ceil(p * arr.size)
    k = min(max(k, 1), arr.size)
    return float(arr[k - 1])


def threshold_from_pool(samples: Iterable[LatticeField], p0: float) -> ThresholdPlan:
    """Threshold at the ``1 - p0`` empirical quantile of all pooled values."""
    pooled = [np.abs(f.values).ravel() for f in samples]
    if not pooled:
        raise ValueError("empirical quantile of an empty sample")
    return ThresholdPlan(p0=p0, a_mn=empirical_quantile(np.concatenate(pooled), 1.0 - p0))


# ----------------------------------------------------------------------------
# Extremograms
# ----------------------------------------------------------------------------

def _linear_autocorrelation(x: np.ndarray) -> np.ndarray:
    """``out[h1 % (2n), h2 % (2n)] = sum_t x_t x_{t+h}`` over pairs inside the lattice."""
    n = x.shape[0]
    spec = np.fft.rfft2(x, s=(2 * n, 2 * n))
    return np.fft.irfft2(spec * np.conj(spec), s=(2 * n, 2 * n))


def empirical_extremogram(ex: ExceedanceField, lag_cap: Optional[float] = None) -> LagFunction:
    """Centered extremogram over non-circular pairs.

    ``(m_n / n^2) * sum_{t, t+h in lattice} (I_t - p0)(I_{t+h} - p0)`` for every
    lag with ``||h|| < n`` (default) or ``||h|| <= lag_cap``.
    """
    n = ex.n
    if lag_cap is not None and lag_cap >= n:
        raise ValueError(f"lag_cap={lag_cap} must be < n={n}")
    lags = LagFunction.lag_set(n, n, strict=True) if lag_cap is None \
        else LagFunction.lag_set(lag_cap, n)
    centered = ex.indicators - ex.plan.p0
    corr = _linear_autocorrelation(centered)
    m = 2 * n
    # corr[k] = sum_t x_t x_{t+k}: autocorrelation evaluated at lag -h is the same sum
    vals = corr[lags[:, 0] % m, lags[:, 1] % m]
    cap = float(n) if lag_cap is None else lag_cap
    return LagFunction(lags, ex.plan.m_n / n ** 2 * vals, lag_cap=cap)


def circular_pair_counts(indicators: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """Exact integer counts ``sum_t I_t I_{t+h}`` with indices wrapped mod n."""
    x = np.asarray(indicators, dtype=float)
    n = x.shape[0]
    spec = np.fft.rfft2(x)
    corr = np.fft.irfft2(spec * np.conj(spec), s=x.shape)
    counts = np.rint(corr).astype(np.int64)
    lags = np.asarray(lags, dtype=np.int64).reshape(-1, 2)
    # irfft of |F|^2 yields sum_t x_{t+k} x_t at index k
    return counts[lags[:, 0] % n, lags[:, 1] % n]


def circular_pair_mean(ex: ExceedanceField, h) -> float:
    """``C_n(h)``: mean of ``I_t I_{t+h}`` over the lattice with wraparound."""
    ind = ex.indicators
    shifted = np.roll(ind, shift=(-int(h[0]), -int(h[1])), axis=(0, 1))
    return float((ind * shifted).sum() / ind.size)


def truncated_extremogram(ex: ExceedanceField, r_n: int) -> LagFunction:
    """``m_n * C_n(h)`` for every lag with ``||h|| <= r_n``."""
    n = ex.n
    if r_n >= n:
        raise ValueError(f"r_n={r_n} must be < n={n}")
    lags = LagFunction.lag_set(r_n, n)
    counts = circular_pair_counts(ex.indicators, lags)
    return LagFunction(lags, ex.plan.m_n * (counts / n ** 2), lag_cap=r_n)


# ----------------------------------------------------------------------------
# Periodogram
# ----------------------------------------------------------------------------

def fourier_frequencies(n: int) -> np.ndarray:
    """``2 pi i / n`` for ``i = 1..n``."""
    return 2.0 * np.pi * np.arange(1, n + 1) / n


def wrap_lags(gamma: LagFunction, n: int) -> np.ndarray:
    """Fold lag values onto an ``n x n`` array indexed by ``h mod n``."""
    arr = np.zeros((n, n))
    np.add.at(arr, (gamma.lags[:, 0] % n, gamma.lags[:, 1] % n), gamma.values)
    return arr


def periodogram_grid(gamma: LagFunction, n: int, naive: bool = False) -> np.ndarray:
    """Values of ``sum_h gamma(h) cos(h . lambda_i)`` at ``i = 1..n`` on both axes."""
    if naive:
        lam = fourier_frequencies(n)
        out = np.zeros((n, n))
        for (h1, h2), v in zip(gamma.lags, gamma.values):
            out += v * np.cos(h1 * lam[:, None] + h2 * lam[None, :])
        return out
    f = np.fft.fft2(wrap_lags(gamma, n)).real
    # fft index k corresponds to lambda_k; grid index i = 1..n maps to k = i mod n
    return np.roll(f, -1, axis=(0, 1))


def extremal_periodogram(gamma: LagFunction, omega=None, *, n: Optional[int] = None,
                         naive: bool = False):
    """Cosine series ``sum_h gamma(h) cos(h . omega)``.

    With ``omega`` a point, returns a float.  With ``n``, returns the
    :class:`~maxgof.integrated.FourierSurface` on the ``n x n`` Fourier grid.
    """
    if n is not None:
        from .integrated import FourierSurface

        return FourierSurface(periodogram_grid(gamma, n, naive=naive))
    if omega is None:
        raise ValueError("give either a frequency omega or a grid size n")
    w1, w2 = float(omega[0]), float(omega[1])
    return float(np.sum(gamma.values * np.cos(gamma.lags[:, 0] * w1 + gamma.lags[:, 1] * w2)))
