"""
Max-stable benchmark fields on square lattices.

Two models are provided, both with (approximately) unit Frechet margins:

- the max-moving average (MMA) field with weights ``phi**(|s1|+|s2|)``
  truncated to an L1 ball;
- the truncated Brown-Resnick (BR) field driven by an isotropic fractional
  Brownian field.

Their theoretical extremograms and extremal spectral densities are also
evaluated here, together with the rank transform used to standardize
observed fields to unit Frechet margins.
"""

from __future__ import annotations

import csv
import functools
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.special import ndtr

__all__ = [
    "MMA",
    "BrownResnick",
    "BrownResnickVariogram",
    "ModelSpec",
    "LatticeField",
    "make_rng",
    "mma_weight",
    "mma_weights",
    "simulate_mma",
    "fbf_covariance",
    "simulate_brown_resnick",
    "simulate",
    "theoretical_extremogram",
    "theoretical_spectral_density",
    "to_unit_frechet",
]

MAX_BR_SIDE = 128


# ----------------------------------------------------------------------------
# Model specifications
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class MMA:
    """Max-moving average with weights ``phi**(|s1|+|s2|)`` on ``|s1|+|s2| <= radius``."""

    phi: float
    radius: int = 5

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError(f"MMA phi must be positive, got {self.phi}")
        if self.radius < 0:
            raise ValueError(f"MMA radius must be >= 0, got {self.radius}")

    family = "mma"

    @property
    def parameter(self) -> float:
        return self.phi

    def with_parameter(self, value: float) -> "MMA":
        return MMA(phi=float(value), radius=self.radius)


@dataclass(frozen=True)
class BrownResnick:
    """Truncated Brown-Resnick field, sup over ``terms`` Poisson points."""

    hurst: float
    terms: int = 1000
    # "half-variogram": gamma(h) = 2(1 - Phi(sqrt(delta(h)))); "exact": 2(1 - Phi(sqrt(delta(h) / 2))),
    # the bivariate tail of the simulated field
    convention: str = "half-variogram"

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise ValueError(f"Hurst index must lie in (0, 1), got {self.hurst}")
        if self.terms < 1:
            raise ValueError(f"terms must be >= 1, got {self.terms}")
        if self.convention not in ("half-variogram", "exact"):
            raise ValueError(f"unknown extremogram convention {self.convention!r}")

    family = "br"

    @property
    def parameter(self) -> float:
        return self.hurst

    def with_parameter(self, value: float) -> "BrownResnick":
        return BrownResnick(hurst=float(value), terms=self.terms, convention=self.convention)


@dataclass(frozen=True)
class BrownResnickVariogram:
    """Brown-Resnick dependence given by the variogram ``||h/scale||**beta``."""

    beta: float
    scale: float

    def __post_init__(self):
        if not 0 < self.beta <= 2:
            raise ValueError(f"beta must lie in (0, 2], got {self.beta}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    family = "br-variogram"


ModelSpec = Union[MMA, BrownResnick, BrownResnickVariogram]


# ----------------------------------------------------------------------------
# Lattice fields
# ----------------------------------------------------------------------------

@dataclass
class LatticeField:
    """One realization on the ``n x n`` lattice.

    ``values[i, j]`` is the observation at lattice site ``(i + 1, j + 1)``.
    ``marginal`` is ``"raw"`` or ``"unit_frechet"``.
    """

    values: np.ndarray
    marginal: str = "raw"
    n: int = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] == 0:
            raise ValueError(f"field must be a non-empty square array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if self.marginal not in ("raw", "unit_frechet"):
            raise ValueError(f"unknown marginal tag {self.marginal!r}")
        if self.marginal == "unit_frechet" and not np.all(values > 0):
            raise ValueError("unit_frechet fields must be strictly positive")
        self.values = values
        self.n = values.shape[0]

    # -- serialization -------------------------------------------------------

    def to_csv(self, path=None) -> str:
        """Write ``n`` on the first line, then ``n`` comma-separated rows."""
        buf = io.StringIO()
        buf.write(f"{self.n}\n")
        for row in self.values:
            buf.write(",".join(repr(float(v)) for v in row))
            buf.write("\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, marginal: str = "raw") -> "LatticeField":
        """Parse the CSV layout written by :meth:`to_csv`.

        ``source`` is a path or the CSV text itself.
        """
        text = _read_text(source)
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        if not rows:
            raise ValueError("empty field CSV")
        try:
            n = int(rows[0][0])
        except ValueError as exc:
            raise ValueError(f"first line must hold the side length, got {rows[0]!r}") from exc
        body = rows[1:]
        if len(body) != n or any(len(r) != n for r in body):
            raise ValueError(f"expected {n} rows of {n} values")
        values = np.array([[float(c) for c in r] for r in body])
        return cls(values, marginal=marginal)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "marginal": self.marginal,
                           "values": self.values.tolist()})

    @classmethod
    def from_json(cls, source) -> "LatticeField":
        obj = json.loads(_read_text(source))
        out = cls(np.asarray(obj["values"], dtype=float), marginal=obj.get("marginal", "raw"))
        if out.n != int(obj["n"]):
            raise ValueError("n does not match the values array")
        return out


def _read_text(source) -> str:
    if isinstance(source, Path):
        return source.read_text()
    if isinstance(source, str) and "\n" not in source and not source.lstrip().startswith("{"):
        try:
            if Path(source).exists():
                return Path(source).read_text()
        except OSError:  # too long to be a path
            pass
    return str(source)


# ----------------------------------------------------------------------------
# Random streams
# ----------------------------------------------------------------------------

def make_rng(seed, *keys: int) -> np.random.Generator:
    """Generator for the stream ``keys`` derived from a 64-bit ``seed``.

    Passing an existing Generator returns it unchanged (``keys`` must be empty).
    """
    if isinstance(seed, np.random.Generator):
        if keys:
            raise ValueError("cannot derive keyed streams from a Generator")
        return seed
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


# ----------------------------------------------------------------------------
# MMA
# ----------------------------------------------------------------------------

def mma_weight(s: Sequence[int], phi: float, radius: int = 5) -> float:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    d = abs(int(s[0])) + abs(int(s[1]))
    return float(phi) ** d if d <= radius else 0.0


@functools.lru_cache(maxsize=64)
def _l1_ball(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    s1, s2 = np.meshgrid(r, r, indexing="ij")
    keep = np.abs(s1) + np.abs(s2) <= radius
    return np.column_stack([s1[keep], s2[keep]])


def mma_weights(phi: float, radius: int = 5):
    """Offsets on the L1 ball and their weights, as ``(offsets, weights)``."""
    offsets = _l1_ball(radius)
    weights = float(phi) ** np.abs(offsets).sum(axis=1)
    return offsets, weights


def simulate_mma(spec: MMA, n: int, seed) -> LatticeField:
    """Simulate the MMA field on ``{1..n}^2``.

    Frechet noise is drawn on the lattice padded by ``spec.radius`` on every
    side so that each site sees its whole weight window.  The returned field
    is tagged ``raw``: its margin is Frechet with scale ``sum(w)``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(seed)
    r = spec.radius
    m = n + 2 * r
    u = rng.random((m, m))
    u[u == 0.0] = np.finfo(float).tiny
    z = -1.0 / np.log(u)
    out = np.zeros((n, n))
    offsets, weights = mma_weights(spec.phi, r)
    for (s1, s2), w in zip(offsets, weights):
        # X_t sees Z_{t-s}; with padding, Z_{t-s} sits at padded index t - s + r
        block = z[r - s1:r - s1 + n, r - s2:r - s2 + n]
        np.maximum(out, w * block, out=out)
    return LatticeField(out, marginal="raw")


# ----------------------------------------------------------------------------
# Brown-Resnick
# ----------------------------------------------------------------------------

def fbf_covariance(s, t, hurst: float) -> float:
    """Covariance of the isotropic fractional Brownian field with ``W_0 = 0``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    e = 2.0 * hurst
    return 0.5 * (np.linalg.norm(s) ** e + np.linalg.norm(t) ** e
                  - np.linalg.norm(s - t) ** e)


def _lattice_sites(n: int) -> np.ndarray:
    i = np.arange(1, n + 1, dtype=float)
    a, b = np.meshgrid(i, i, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


@functools.lru_cache(maxsize=4)
def _fbf_factor(n: int, hurst: float):
    sites = _lattice_sites(n)
    e = 2.0 * hurst
    norms = np.linalg.norm(sites, axis=1) ** e
    diff = sites[:, None, :] - sites[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1)) ** e
    cov = 0.5 * (norms[:, None] + norms[None, :] - dist)
    del diff, dist
    scale = float(np.mean(np.diag(cov)))
    for jitter in (0.0, 1e-12, 1e-10, 1e-8):
        try:
            chol = np.linalg.cholesky(cov + jitter * scale * np.eye(len(cov)))
        except np.linalg.LinAlgError:
            continue
        chol.setflags(write=False)
        return chol, norms
    raise np.linalg.LinAlgError(
        f"fractional Brownian covariance is not positive definite (n={n}, H={hurst})")


def simulate_brown_resnick(spec: BrownResnick, n: int, seed, *, chunk: int = 128,
                           max_side: int = MAX_BR_SIDE) -> LatticeField:
    """Simulate the truncated Brown-Resnick field on ``{1..n}^2``.

    ``X_s = max_j exp(W_s^(j) - var(W_s)/2) / Gamma_j`` for ``j <= spec.terms``.
    One Cholesky factor per ``(n, hurst)`` is cached and shared.  Exponential
    and Gaussian draws come from separate child streams, so increasing
    ``terms`` only appends new Poisson points.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > max_side:
        raise ValueError(f"n={n} exceeds the dense Cholesky limit {max_side}; "
                         "pass max_side to override")
    base = make_rng(seed)
    exp_rng, gauss_rng = base.spawn(2)
    chol, variances = _fbf_factor(n, float(spec.hurst))
    gammas = np.cumsum(exp_rng.standard_exponential(spec.terms))
    drift = 0.5 * variances
    out = np.zeros(n * n)
    for start in range(0, spec.terms, chunk):
        stop = min(start + chunk, spec.terms)
        z = gauss_rng.standard_normal((stop - start, n * n))
        w = z @ chol.T
        vals = np.exp(w - drift) / gammas[start:stop, None]
        np.maximum(out, vals.max(axis=0), out=out)
    return LatticeField(out.reshape(n, n), marginal="raw")


def simulate(spec: ModelSpec, n: int, seed) -> LatticeField:
    if isinstance(spec, MMA):
        return simulate_mma(spec, n, seed)
    if isinstance(spec, BrownResnick):
        return simulate_brown_resnick(spec, n, seed)
    raise TypeError(f"no simulator for {type(spec).__name__}")


# ----------------------------------------------------------------------------
# Theoretical extremal dependence
# ----------------------------------------------------------------------------

def _mma_extremogram(phi: float, radius: int, lags: np.ndarray) -> np.ndarray:
    offsets, weights = mma_weights(phi, radius)
    half = 3 * radius
    box = np.zeros((2 * half + 1, 2 * half + 1))
    box[offsets[:, 0] + half, offsets[:, 1] + half] = weights
    total = weights.sum()
    out = np.zeros(len(lags))
    for k, (h1, h2) in enumerate(lags):
        if abs(h1) + abs(h2) > 2 * radius:
            continue
        # box[s + h] for s in the support never wraps: |s + h| <= 3 * radius
        shifted = np.roll(box, shift=(-int(h1), -int(h2)), axis=(0, 1))
        out[k] = np.minimum(box, shifted).sum() / total
    # the ratio at h = 0 can round to 1 + eps
    return np.minimum(out, 1.0)


def theoretical_extremogram(spec: ModelSpec, h) -> Union[float, np.ndarray]:
    """Extremogram of ``spec`` at lag ``h`` (one pair or an array of pairs)."""
    lags = np.asarray(h, dtype=float)
    single = lags.ndim == 1
    lags = np.atleast_2d(lags)
    if isinstance(spec, MMA):
        out = _mma_extremogram(spec.phi, spec.radius, lags.astype(int))
    else:
        norms = np.hypot(lags[:, 0], lags[:, 1])
        if isinstance(spec, BrownResnick):
            delta = norms ** (2.0 * spec.hurst) / 2.0
            if spec.convention == "exact":
                delta = delta / 2.0
        elif isinstance(spec, BrownResnickVariogram):
            delta = (norms / spec.scale) ** spec.beta / 2.0
        else:
            raise TypeError(f"unknown model {type(spec).__name__}")
        out = 2.0 * (1.0 - ndtr(np.sqrt(delta)))
        out[norms == 0] = 1.0
    return float(out[0]) if single else out


def theoretical_spectral_density(spec: ModelSpec, omega=None, lag_cap: int = 10, *, n=None):
    """Truncated cosine series ``sum_{||h|| <= lag_cap} gamma(h) cos(h.omega)``.

    Evaluate at a point ``omega`` or, with ``n``, on the ``n x n`` Fourier grid
    (returning a :class:`~maxgof.integrated.FourierSurface`).
    """
    from .extremal import LagFunction, extremal_periodogram

    lags = LagFunction.lag_set(lag_cap)
    values = np.atleast_1d(theoretical_extremogram(spec, lags))
    keep = values != 0.0  # zero terms would only perturb the summation order
    gamma = LagFunction(lags[keep], values[keep], lag_cap=lag_cap)
    return extremal_periodogram(gamma, omega, n=n)


# ----------------------------------------------------------------------------
# Standardization
# ----------------------------------------------------------------------------

def known_unit_frechet(field_: LatticeField, spec: ModelSpec) -> LatticeField:
    """Standardize a simulated field by its model margin.

    MMA values are divided by ``sum(w)``; Brown-Resnick output is already
    (approximately) unit Frechet and is only re-tagged.
    """
    if isinstance(spec, MMA):
        _, w = mma_weights(spec.phi, spec.radius)
        return LatticeField(field_.values / w.sum(), marginal="unit_frechet")
    if isinstance(spec, (BrownResnick, BrownResnickVariogram)):
        return LatticeField(field_.values, marginal="unit_frechet")
    raise TypeError(f"no known margin for {type(spec).__name__}")


def to_unit_frechet(fields: Union[LatticeField, Iterable[LatticeField]]):
    """Rank-transform pooled values to unit Frechet margins.

    The value of pooled rank ``r`` (ties in flat-index order) maps to
    ``-1/log(r/(N+1))``.  Returns a single field when given one.
    """
    single = isinstance(fields, LatticeField)
    group = [fields] if single else list(fields)
    if not group:
        raise ValueError("no fields to standardize")
    pooled = np.concatenate([f.values.ravel() for f in group])
    total = pooled.size
    if total < 2:
        raise ValueError("need at least two pooled values")
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(total)
    ranks[order] = np.arange(1, total + 1)
    frechet = -1.0 / np.log(ranks / (total + 1))
    out, pos = [], 0
    for f in group:
        k = f.values.size
        out.append(LatticeField(frechet[pos:pos + k].reshape(f.values.shape),
                                marginal="unit_frechet"))
        pos += k
    return out[0] if single else out
