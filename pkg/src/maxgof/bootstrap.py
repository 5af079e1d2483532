"""
Two-dimensional stationary bootstrap on the square lattice.

Rows are resampled first by a 1-D stationary bootstrap (uniform block starts,
geometric block lengths, circular extension), then columns by an independent
one.  A replicate is therefore fully described by two index vectors and the
resampled site of ``t = (t1, t2)`` is ``(row_map[t1], col_map[t2])``.

Indices are 0-based throughout.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .extremal import ExceedanceField, LagFunction
from .integrated import FourierSurface, WeightFunction, integrated_surface

__all__ = [
    "BootstrapConfig",
    "IndexMap2D",
    "geometric_block_lengths",
    "stationary_resample_1d",
    "bootstrap_lattice",
    "product_fields",
    "bootstrapped_extremogram",
    "bootstrapped_integrated",
    "batch_counts",
    "theta_schedule_warnings",
]


@dataclass(frozen=True)
class BootstrapConfig:
    theta: float
    replicates: int
    r_n: int
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.r_n < 0:
            raise ValueError("r_n must be >= 0")


@dataclass(frozen=True)
class IndexMap2D:
    row_map: np.ndarray
    col_map: np.ndarray

    @property
    def n(self) -> int:
        return len(self.row_map)

    @classmethod
    def identity(cls, n: int) -> "IndexMap2D":
        return cls(np.arange(n), np.arange(n))

    def apply(self, values: np.ndarray) -> np.ndarray:
        """The resampled field ``X[row_map[t1], col_map[t2]]``."""
        return values[np.ix_(self.row_map, self.col_map)]


def geometric_block_lengths(theta: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Geometric lengths ``P(L = l) = theta (1 - theta)^(l - 1)`` by inverse CDF."""
    if theta >= 1.0:
        return np.ones(size, dtype=np.int64)
    u = 1.0 - rng.random(size)  # in (0, 1]
    lengths = np.ceil(np.log(u) / np.log1p(-theta)).astype(np.int64)
    return np.maximum(lengths, 1)


def stationary_resample_1d(n: int, theta: float, rng: np.random.Generator) -> np.ndarray:
    """One stationary-bootstrap index sequence of length ``n``.

    Blocks ``start, start + 1, ..., start + L - 1`` (mod n) with uniform starts
    and geometric lengths are concatenated and cut at ``n`` entries.  At most
    ``n`` blocks are ever needed, so all are drawn up front.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    starts = rng.integers(n, size=n)
    lengths = geometric_block_lengths(theta, n, rng)
    ends = np.cumsum(lengths)
    pos = np.arange(n)
    block = np.searchsorted(ends, pos, side="right")
    offset = pos - (ends[block] - lengths[block])
    return (starts[block] + offset) % n


def bootstrap_lattice(n: int, theta: float, rng: np.random.Generator) -> IndexMap2D:
    """Horizontal then vertical 1-D resample with independent sequences."""
    rows = stationary_resample_1d(n, theta, rng)
    cols = stationary_resample_1d(n, theta, rng)
    return IndexMap2D(rows, cols)


def product_fields(ex: ExceedanceField, lags: np.ndarray) -> np.ndarray:
    """Stack of ``I_s I_{s+h}`` (circular) on the original lattice, one slice per lag."""
    ind = ex.indicators
    out = np.empty((len(lags),) + ind.shape, dtype=np.int64)
    for k, (h1, h2) in enumerate(lags):
        out[k] = ind * np.roll(ind, shift=(-int(h1), -int(h2)), axis=(0, 1))
    return out


def bootstrapped_extremogram(ex: ExceedanceField, index_map: IndexMap2D, r_n: int,
                             products: Optional[np.ndarray] = None) -> LagFunction:
    """``(m_n / n^2) sum_t I_{t*}(h)`` for all ``||h|| <= r_n``, one map for all lags.

    ``products`` may carry precomputed :func:`product_fields` for the lag set
    ``LagFunction.lag_set(r_n, n)``.
    """
    n = ex.n
    if r_n >= n:
        raise ValueError(f"r_n={r_n} must be < n={n}")
    lags = LagFunction.lag_set(r_n, n)
    if products is None:
        products = product_fields(ex, lags)
    # the sum over resampled sites only depends on how often each row/column is drawn
    row_counts = np.bincount(index_map.row_map, minlength=n)
    col_counts = np.bincount(index_map.col_map, minlength=n)
    counts = np.einsum("i,kij,j->k", row_counts, products, col_counts)
    return LagFunction(lags, ex.plan.m_n * (counts / n ** 2), lag_cap=r_n)


def bootstrapped_integrated(gamma_star: LagFunction, n: int, g: Optional[WeightFunction] = None,
                            naive: bool = False) -> FourierSurface:
    return integrated_surface(gamma_star, n, g, naive=naive)


def batch_counts(products: np.ndarray, maps: Sequence[IndexMap2D]) -> np.ndarray:
    """``sum_t I_{t*}(h)`` for many maps at once, shape ``(len(maps), n_lags)``.

    Same values as :func:`bootstrapped_extremogram` before scaling; counts are
    integers well below 2**53, so the float products are exact.
    """
    n = products.shape[1]
    rows = np.stack([np.bincount(m.row_map, minlength=n) for m in maps]).astype(float)
    cols = np.stack([np.bincount(m.col_map, minlength=n) for m in maps]).astype(float)
    flat = products.reshape(-1, n).astype(float) @ cols.T          # (L*n, B)
    partial = flat.reshape(products.shape[0], n, len(maps))
    return np.rint(np.einsum("lib,bi->bl", partial, rows)).astype(np.int64)


def replicate_table(gammas: Sequence[LagFunction], path=None) -> str:
    """CSV rows ``replicate, h1, h2, gamma_star`` (replicates numbered from 1)."""
    buf = io.StringIO()
    buf.write("replicate,h1,h2,gamma_star\n")
    for b, gam in enumerate(gammas, start=1):
        for (h1, h2), v in zip(gam.lags, gam.values):
            buf.write(f"{b},{h1},{h2},{float(v)!r}\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def theta_schedule_warnings(ns: Sequence[int], eta: float = 0.8, c: float = 2.0,
                            mixing: Callable[[float], float] = lambda r: np.exp(-r),
                            horizon: int = 200) -> list:
    """Check the rate conditions on ``theta = r_n / m_n`` across sample sizes.

    With ``m_n = n**eta`` and ``r_n = floor(c log n)``, both ``n^2 theta^3`` and
    ``m_n^{3/2} / (n theta^4) * sum_{||h|| > r_n} mixing(||h||)`` should decrease
    along ``ns``.  ``mixing`` stands in for the unknown mixing-rate function;
    the tail sum runs over lattice lags up to ``horizon``.  Emits a
    ``RuntimeWarning`` per violation and returns the messages.
    """
    first, second = [], []
    grid = np.arange(-horizon, horizon + 1)
    norms = np.hypot(grid[:, None], grid[None, :]).ravel()
    for n in ns:
        m_n = n ** eta
        r_n = max(int(np.floor(c * np.log(n))), 1)
        theta = r_n / m_n
        tail = float(np.sum(mixing(norms[norms > r_n])))
        first.append(n ** 2 * theta ** 3)
        second.append(m_n ** 1.5 / (n * theta ** 4) * tail)
    messages = []
    for label, seq in (("n^2 theta^3", first), ("mixing tail term", second)):
        for k in range(1, len(seq)):
            if not seq[k] < seq[k - 1]:
                msg = f"{label} does not decrease from n={ns[k - 1]} to n={ns[k]}"
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
                messages.append(msg)
    return messages
