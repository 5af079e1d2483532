"""
Grenander-Rosenblatt goodness-of-fit test for max-stable lattice fields.

The observed field is compared with a fitted null model through the sup-norm
distance between its extremal integrated periodogram and the Monte-Carlo mean
surface.  Critical values come from (a) ``B`` simulations of the fitted
model and (b) ``B`` two-dimensional stationary-bootstrap replicates of the
observation, both at the same threshold.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .bootstrap import batch_counts, bootstrap_lattice, product_fields
from .extremal import (
    ExceedanceField,
    LagFunction,
    ThresholdPlan,
    empirical_extremogram,
    empirical_quantile,
    exceedances,
    periodogram_grid,
    threshold_from_pool,
    truncated_extremogram,
)
from .fields import (
    MMA,
    BrownResnick,
    LatticeField,
    ModelSpec,
    make_rng,
    known_unit_frechet,
    simulate,
    theoretical_extremogram,
    to_unit_frechet,
)
from .integrated import FourierSurface, WeightFunction, integrated_surface

__all__ = [
    "DegenerateThresholdWarning",
    "GofConfig",
    "TestReport",
    "MonteCarloResult",
    "BootstrapResult",
    "grs_statistic",
    "default_parameter_grid",
    "whittle_contrast",
    "whittle_estimate",
    "simulation_statistics",
    "mc_critical_value",
    "bootstrap_critical_value",
    "run_test",
    "statistic_densities",
]

# stream tags for make_rng(seed, tag, index)
_SIM_STREAM = 1
_BOOT_STREAM = 2
_OBS_STREAM = 3


class DegenerateThresholdWarning(RuntimeWarning):
    """The observed field has no (or only) exceedances at the threshold."""


@dataclass
class GofConfig:
    """Settings shared by both critical-value procedures.

    ``r_n=None`` means ``floor(r_scale * log n)``; ``theta=None`` means ``1/n``
    (or ``r_n / m_n`` when ``theta_rule="ratio"``); ``lag_cap=None`` uses
    every lag with ``||h|| < n`` in the simulation-based surfaces.
    """

    p0: float = 0.05
    B: int = 200
    alpha: float = 0.05
    g: WeightFunction = field(default_factory=WeightFunction)
    r_n: Optional[int] = None
    r_scale: float = 2.0
    theta: Optional[float] = None
    theta_rule: str = "inverse-n"
    lag_cap: Optional[float] = None
    seed: int = 0
    standardize: bool = True
    naive: bool = False
    threads: int = 1
    param_grid: Optional[Sequence[float]] = None

    def __post_init__(self):
        if not 0 < self.p0 < 1:
            raise ValueError(f"p0 must lie in (0, 1), got {self.p0}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if self.B < 20:
            warnings.warn(f"B={self.B} is too small for a meaningful (1 - alpha) quantile",
                          RuntimeWarning, stacklevel=3)
        if self.theta is not None and not 0 < self.theta <= 1:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.theta_rule not in ("inverse-n", "ratio"):
            raise ValueError(f"unknown theta rule {self.theta_rule!r}")

    @property
    def m_n(self) -> float:
        return 1.0 / self.p0

    def resolve_r_n(self, n: int) -> int:
        r = self.r_n if self.r_n is not None else int(math.floor(self.r_scale * math.log(n)))
        return max(0, min(r, n - 1))

    def resolve_theta(self, n: int) -> float:
        if self.theta is not None:
            return self.theta
        if self.theta_rule == "ratio":
            return min(1.0, max(self.resolve_r_n(n), 1) / self.m_n)
        return 1.0 / n


def grs_statistic(surface: FourierSurface, centering: FourierSurface, n: int, m_n: float) -> float:
    """``(n / sqrt(m_n)) * max |surface - centering|`` over the Fourier grid."""
    a = getattr(surface, "values", surface)
    b = getattr(centering, "values", centering)
    if np.shape(a) != (n, n) or np.shape(b) != (n, n):
        raise ValueError(f"surfaces must both be {n} x {n}")
    return float(n / math.sqrt(m_n) * np.max(np.abs(np.asarray(a) - np.asarray(b))))


# ----------------------------------------------------------------------------
# Parameter estimation
# ----------------------------------------------------------------------------

def _template(family) -> ModelSpec:
    if isinstance(family, (MMA, BrownResnick)):
        return family
    if family == "mma":
        return MMA(phi=0.5)
    if family == "br":
        return BrownResnick(hurst=0.5)
    raise ValueError(f"unknown model family {family!r}")


def default_parameter_grid(family) -> np.ndarray:
    spec = _template(family)
    if isinstance(spec, MMA):
        return np.round(np.arange(1, 41) * 0.05, 10)
    return np.round(0.1 + 0.02 * np.arange(41), 10)


def _model_periodogram(spec: ModelSpec, n: int, r_n: int) -> np.ndarray:
    lags = LagFunction.lag_set(r_n, n)
    gam = LagFunction(lags, np.atleast_1d(theoretical_extremogram(spec, lags)), lag_cap=r_n)
    return periodogram_grid(gam, n)


def whittle_contrast(fhat: np.ndarray, spec: ModelSpec, r_n: int) -> float:
    """Least-squares spectral contrast ``sum_grid (fhat - f_model)^2``."""
    n = fhat.shape[0]
    return float(np.sum((fhat - _model_periodogram(spec, n, r_n)) ** 2))


def _fit_periodogram(fhat: np.ndarray, family, grid: Sequence[float], r_n: int,
                     tol: float = 1e-6) -> float:
    template = _template(family)
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty parameter grid")

    def contrast(p):
        return whittle_contrast(fhat, template.with_parameter(p), r_n)

    values = np.array([contrast(p) for p in grid])
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite Whittle contrast")
    k = int(np.argmin(values))  # first minimum = smaller parameter on ties
    best, best_val = float(grid[k]), float(values[k])
    if grid.size < 2:
        return best
    lo = float(grid[max(k - 1, 0)])
    hi = float(grid[min(k + 1, grid.size - 1)])
    # golden-section refinement inside the bracketing cells
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - ratio * (b - a), a + ratio * (b - a)
    fc, fd = contrast(c), contrast(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = contrast(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = contrast(d)
    refined = 0.5 * (a + b)
    refined_val = contrast(refined)
    if refined_val < best_val:
        return refined
    return best


def _standardized(observed: LatticeField, cfg: "GofConfig") -> LatticeField:
    if cfg.standardize and observed.marginal != "unit_frechet":
        return to_unit_frechet(observed)
    return observed


def whittle_estimate(observed: LatticeField, family, grid: Optional[Sequence[float]] = None,
                     cfg: Optional[GofConfig] = None) -> float:
    """Fit the null-model parameter by minimizing the spectral contrast.

    The truncated extremal periodogram of the observation (threshold at its
    own ``1 - p0`` quantile, lags ``||h|| <= r_n``) is compared with the model
    spectral density truncated at the same lags.  Grid search, then one
    golden-section pass between the neighbours of the best grid point.
    """
    cfg = cfg or GofConfig()
    obs = _standardized(observed, cfg)
    n = obs.n
    r_n = cfg.resolve_r_n(n)
    grid = default_parameter_grid(family) if grid is None else grid
    plan = ThresholdPlan(p0=cfg.p0, a_mn=empirical_quantile(np.abs(obs.values), 1.0 - cfg.p0))
    ex = exceedances(obs, plan)
    if ex.indicators.min() == ex.indicators.max():
        raise ValueError("degenerate threshold: all indicators are equal")
    fhat = periodogram_grid(truncated_extremogram(ex, r_n), n)
    return _fit_periodogram(fhat, family, grid, r_n)


# ----------------------------------------------------------------------------
# Critical values
# ----------------------------------------------------------------------------

def _map(fn: Callable, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _tilde_surface(f: LatticeField, plan: ThresholdPlan, cfg: GofConfig) -> np.ndarray:
    ex = exceedances(f, plan)
    gam = empirical_extremogram(ex, cfg.lag_cap)
    return integrated_surface(gam, f.n, cfg.g, naive=cfg.naive).values


@dataclass
class MonteCarloResult:
    estimate: float
    model: ModelSpec
    plan: ThresholdPlan
    centering: FourierSurface
    observed_surface: FourierSurface
    sim_stats: np.ndarray
    c_sim: float
    t_obs: float


@dataclass
class BootstrapResult:
    boot_stats: np.ndarray
    c_boot: float
    centering: FourierSurface
    theta: float
    r_n: int


def simulation_statistics(observed: LatticeField, sims: Sequence[LatticeField],
                          cfg: GofConfig, plan: Optional[ThresholdPlan] = None):
    """Pooled threshold, centering, and ``T_n(b)`` for given simulated fields.

    Returns ``(plan, centering, observed_surface, sim_stats, t_obs)``.  Fields
    are used as given (standardize beforehand if needed).
    """
    n = observed.n
    if any(s.n != n for s in sims):
        raise ValueError("simulated fields must match the observed lattice size")
    plan = plan or threshold_from_pool(sims, cfg.p0)
    surfaces = np.stack(_map(lambda f: _tilde_surface(f, plan, cfg), sims, cfg.threads))
    centering = surfaces.mean(axis=0)
    obs_surface = _tilde_surface(observed, plan, cfg)
    scale = n / math.sqrt(plan.m_n)
    stats = scale * np.abs(surfaces - centering).max(axis=(1, 2))
    t_obs = grs_statistic(obs_surface, centering, n, plan.m_n)
    return plan, FourierSurface(centering), FourierSurface(obs_surface), stats, t_obs


def _simulate_null(model: ModelSpec, n: int, cfg: GofConfig, known_margins: bool = False):
    """``cfg.B`` null fields, standardized the same way as the observation.

    A raw observation is rank-transformed on its own, so every simulation is
    too (a simulated field fed back as the observation is then exchangeable
    with the rest).  An observation already on unit Frechet margins is
    matched by standardizing each simulation with its known model margin.
    """
    def one(b):
        f = simulate(model, n, make_rng(cfg.seed, _SIM_STREAM, b))
        if not cfg.standardize:
            return f
        return known_unit_frechet(f, model) if known_margins else to_unit_frechet(f)

    return _map(one, range(cfg.B), cfg.threads)


def _known(observed: LatticeField, cfg: GofConfig) -> bool:
    return cfg.standardize and observed.marginal == "unit_frechet"


def _warn_if_degenerate(observed: LatticeField, plan: ThresholdPlan):
    ind = np.abs(observed.values) > plan.a_mn
    if not ind.any():
        warnings.warn(f"observed field has no exceedances of a_mn={plan.a_mn:.6g}",
                      DegenerateThresholdWarning, stacklevel=3)
    elif ind.all():
        warnings.warn(f"every observed value exceeds a_mn={plan.a_mn:.6g}",
                      DegenerateThresholdWarning, stacklevel=3)


def mc_critical_value(observed: LatticeField, family, cfg: GofConfig,
                      estimate: Optional[float] = None) -> MonteCarloResult:
    """Simulation-based critical value ``c_n(alpha)``.

    Fits the null model (unless ``estimate`` is given), simulates ``cfg.B``
    fields from it, thresholds all fields at the pooled ``1 - p0`` quantile of
    the simulations and compares each surface with their mean.
    """
    obs = _standardized(observed, cfg)
    if estimate is None:
        estimate = whittle_estimate(obs, family, cfg.param_grid, cfg)
    model = _template(family).with_parameter(estimate)
    sims = _simulate_null(model, obs.n, cfg, known_margins=_known(observed, cfg))
    plan, centering, obs_surface, stats, t_obs = simulation_statistics(obs, sims, cfg)
    _warn_if_degenerate(obs, plan)
    c_sim = empirical_quantile(stats, 1.0 - cfg.alpha)
    return MonteCarloResult(float(estimate), model, plan, centering, obs_surface,
                            stats, c_sim, t_obs)


def bootstrap_surfaces(observed: LatticeField, plan: ThresholdPlan, cfg: GofConfig):
    """Bootstrapped integrated periodograms, shape ``(B, n, n)``."""
    obs = _standardized(observed, cfg)
    n = obs.n
    r_n = cfg.resolve_r_n(n)
    theta = cfg.resolve_theta(n)
    ex = exceedances(obs, plan)
    lags = LagFunction.lag_set(r_n, n)
    products = product_fields(ex, lags)
    maps = [bootstrap_lattice(n, theta, make_rng(cfg.seed, _BOOT_STREAM, b)) for b in range(cfg.B)]
    counts = batch_counts(products, maps)

    def surface(row):
        gam = LagFunction(lags, plan.m_n * (row / n ** 2), lag_cap=r_n)
        return integrated_surface(gam, n, cfg.g, naive=cfg.naive).values

    return np.stack(_map(surface, counts, cfg.threads)), theta, r_n


def bootstrap_critical_value(observed: LatticeField, plan: ThresholdPlan,
                             cfg: GofConfig) -> BootstrapResult:
    """Bootstrap-based critical value ``c*_n(alpha)`` at a given threshold."""
    surfaces, theta, r_n = bootstrap_surfaces(observed, plan, cfg)
    n = surfaces.shape[1]
    centering = surfaces.mean(axis=0)
    stats = n / math.sqrt(plan.m_n) * np.abs(surfaces - centering).max(axis=(1, 2))
    c_boot = empirical_quantile(stats, 1.0 - cfg.alpha)
    return BootstrapResult(stats, c_boot, FourierSurface(centering), theta, r_n)


# ----------------------------------------------------------------------------
# Test decision
# ----------------------------------------------------------------------------

@dataclass
class TestReport:
    t_obs: float
    c_sim: float
    c_boot: float
    sim_stats: np.ndarray
    boot_stats: np.ndarray
    estimate: float
    family: str
    alpha: float
    p0: float
    B: int
    n: int
    a_mn: float
    theta: float
    r_n: int
    normalized_surface: Optional[FourierSurface] = None

    __test__ = False  # not a pytest class

    @property
    def c_combined(self) -> float:
        return min(self.c_sim, self.c_boot)

    @property
    def decisions(self) -> dict:
        return {
            "sim": "reject" if self.t_obs > self.c_sim else "not-reject",
            "boot": "reject" if self.t_obs > self.c_boot else "not-reject",
            "combined": "reject" if self.t_obs > self.c_combined else "not-reject",
        }

    def to_dict(self, sim_stats_path=None, boot_stats_path=None) -> dict:
        return {
            "t_obs": self.t_obs,
            "c_sim": self.c_sim,
            "c_boot": self.c_boot,
            "c_combined": self.c_combined,
            "alpha": self.alpha,
            "p0": self.p0,
            "m_n": 1.0 / self.p0,
            "a_mn": self.a_mn,
            "B": self.B,
            "n": self.n,
            "theta": self.theta,
            "r_n": self.r_n,
            "family": self.family,
            "estimate": self.estimate,
            "decisions": self.decisions,
            "sim_stats_path": None if sim_stats_path is None else str(sim_stats_path),
            "boot_stats_path": None if boot_stats_path is None else str(boot_stats_path),
        }

    def to_json(self, **paths) -> str:
        return json.dumps(self.to_dict(**paths), indent=2)


def run_test(observed: LatticeField, family, cfg: GofConfig,
             estimate: Optional[float] = None) -> TestReport:
    """Both critical values at a shared threshold and the three decisions."""
    mc = mc_critical_value(observed, family, cfg, estimate=estimate)
    boot = bootstrap_critical_value(observed, mc.plan, cfg)
    n = observed.n
    normalized = FourierSurface(n / math.sqrt(mc.plan.m_n)
                                * np.abs(mc.observed_surface.values - mc.centering.values))
    return TestReport(
        t_obs=mc.t_obs, c_sim=mc.c_sim, c_boot=boot.c_boot,
        sim_stats=mc.sim_stats, boot_stats=boot.boot_stats,
        estimate=mc.estimate, family=_template(family).family,
        alpha=cfg.alpha, p0=cfg.p0, B=cfg.B, n=n, a_mn=mc.plan.a_mn,
        theta=boot.theta, r_n=boot.r_n, normalized_surface=normalized,
    )


def statistic_densities(model: ModelSpec, n: int, cfg: GofConfig,
                        observed: Optional[LatticeField] = None):
    """Paired samples of ``T_n(b)`` and ``T*_n(b)`` under a fixed model.

    ``T_n`` comes from ``cfg.B`` simulations of ``model``; ``T*_n`` from
    ``cfg.B`` bootstrap replicates of ``observed`` at the pooled simulation
    threshold.  When ``observed`` is omitted it is one further draw of the
    model, put on unit Frechet margins through the known model margin.
    Returns ``(sim_stats, boot_stats, plan)``.
    """
    if observed is None:
        observed = simulate(model, n, make_rng(cfg.seed, _OBS_STREAM, 0))
        if cfg.standardize:
            observed = known_unit_frechet(observed, model)
    obs = _standardized(observed, cfg)
    sims = _simulate_null(model, n, cfg, known_margins=_known(observed, cfg))
    plan, _, _, sim_stats, _ = simulation_statistics(obs, sims, cfg)
    boot = bootstrap_critical_value(obs, plan, cfg)
    return sim_stats, boot.boot_stats, plan
