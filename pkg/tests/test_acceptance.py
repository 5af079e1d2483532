"""End-to-end acceptance checks at their stated tolerances.

Every check prints one ``ACCEPTANCE k: PASS|FAIL`` line (collected again in the
terminal summary).  Seeds are fixed up front and never tuned.
"""

import itertools
import time

import numpy as np
import pytest
from scipy import stats

from maxgof.bootstrap import IndexMap2D, batch_counts, bootstrap_lattice, product_fields, stationary_resample_1d
from maxgof.extremal import (
    ExceedanceField,
    LagFunction,
    ThresholdPlan,
    empirical_extremogram,
    empirical_quantile,
    exceedances,
    fourier_frequencies,
    periodogram_grid,
    truncated_extremogram,
)
from maxgof.fields import (
    MMA,
    BrownResnick,
    known_unit_frechet,
    make_rng,
    mma_weights,
    simulate,
    theoretical_extremogram,
)
from maxgof.gof import (
    GofConfig,
    _fit_periodogram,
    _model_periodogram,
    default_parameter_grid,
    mc_critical_value,
    statistic_densities,
    whittle_estimate,
)
from maxgof.integrated import integrated_surface, psi_discrete, psi_quadrature, theoretical_integrated

pytestmark = pytest.mark.slow


def frechet_cdf(x):
    return np.exp(-1.0 / np.asarray(x))


def rect_cos_integral(h, a, b):
    """Closed form of the integral of cos(h1 x + h2 y) over [0,a] x [0,b]."""
    h1, h2 = h
    if h1 == 0 and h2 == 0:
        return a * b
    if h1 == 0:
        return a * np.sin(h2 * b) / h2
    if h2 == 0:
        return b * np.sin(h1 * a) / h1
    return (np.cos(h1 * a) + np.cos(h2 * b) - np.cos(h1 * a + h2 * b) - 1.0) / (h1 * h2)


# ---------------------------------------------------------------- 1

def test_marginal_laws(verdict):
    t0 = time.time()
    spec = MMA(0.5)
    total = mma_weights(0.5, 5)[1].sum()
    # sites 11 apart have disjoint weight windows, so the pooled draws are independent
    keep = np.ix_(np.arange(0, 50, 11), np.arange(0, 50, 11))
    draws = np.concatenate([simulate(spec, 50, make_rng(101, s)).values[keep].ravel() / total
                            for s in range(4000)])
    assert draws.size == 100_000
    ks_mma = stats.kstest(draws, frechet_cdf).statistic

    br = BrownResnick(0.5)
    site = np.array([simulate(br, 20, make_rng(102, s)).values[0, 0] for s in range(1000)])
    ks_br = stats.kstest(site, frechet_cdf).statistic
    elapsed = time.time() - t0
    ok = ks_mma < 0.01 and ks_br < 0.05 and elapsed < 300
    verdict(1, ok, f"MMA KS={ks_mma:.4f} (<0.01, 1e5 draws), BR site (1,1) KS={ks_br:.4f} "
                   f"(<0.05, 1e3 reps), {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------- 2

def test_extremogram_consistency(verdict):
    t0 = time.time()
    spec, n, p0 = MMA(0.5), 200, 0.05
    lags = LagFunction.lag_set(3)
    truth = theoretical_extremogram(spec, lags)
    errs = []
    for s in range(20):
        f = simulate(spec, n, make_rng(201, s))
        plan = ThresholdPlan(p0=p0, a_mn=empirical_quantile(f.values, 1 - p0))
        est = truncated_extremogram(exceedances(f, plan), 3)
        assert np.array_equal(est.lags, lags)
        errs.append(np.abs(est.values - truth))
    mean_err = np.mean(errs, axis=0)
    worst = int(np.argmax(mean_err))
    elapsed = time.time() - t0
    ok = mean_err.max() <= 0.05 and elapsed < 120
    verdict(2, ok, f"max over ||h||<=3 of mean |gamma_hat - gamma| = {mean_err.max():.4f} "
                   f"at h={tuple(int(v) for v in lags[worst])} (<=0.05), {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------- 3

def test_discretization_bound(verdict):
    rng = make_rng(301)
    cases = []
    while len(cases) < 200:
        h = tuple(int(v) for v in rng.integers(-10, 11, size=2))
        if np.hypot(*h) <= 10:
            cases.append((h, tuple(rng.uniform(0, 2 * np.pi, size=2))))
    errors = {}
    for n in (100, 200):
        errors[n] = np.array([abs(psi_discrete(h, w, n) - rect_cos_integral(h, *w)) for h, w in cases])
    # the library quadrature agrees with the closed form used as psi_h
    quad_gap = max(abs(psi_quadrature(h, w, subdivisions=400) - rect_cos_integral(h, *w))
                   for h, w in cases[:20])
    bound = np.array([5 * (np.hypot(*h) + 1) / 100 for h, _ in cases])
    within = bool(np.all(errors[100] <= bound))
    ratio = errors[200].max() / errors[100].max()
    # diagnostic: the same lags with omega snapped down to the n=100 Fourier grid
    lam = fourier_frequencies(100)
    snapped = [(h, tuple(lam[max(int(np.floor(100 * v / (2 * np.pi))), 1) - 1] for v in w)) for h, w in cases]
    grid_ratio = max(abs(psi_discrete(h, w, 100) - rect_cos_integral(h, *w)) / b
                     for (h, w), b in zip(snapped, bound))
    ok = within and ratio <= 0.6 and quad_gap < 1e-3
    verdict(3, ok, f"all |psi~ - psi| <= 5(||h||+1)/n at n=100: {within} "
                   f"(worst error/bound {np.max(errors[100] / bound):.3f}); max err 200/100 = {ratio:.3f} (<=0.6); "
                   f"diagnostic worst error/bound on grid omega {grid_ratio:.3f}")
    assert ok


# ---------------------------------------------------------------- 4

def test_fast_path_equivalence(verdict):
    t0 = time.time()
    rng = make_rng(401)
    worst = 0.0
    for n in (8, 16, 32):
        for _ in range(50):
            cap = float(rng.uniform(1, min(n - 1, 8)))
            lags = LagFunction.lag_set(cap, n)
            gam = LagFunction(lags, rng.normal(size=len(lags)), lag_cap=cap)
            for fast, slow in (
                (integrated_surface(gam, n).values, integrated_surface(gam, n, naive=True).values),
                (periodogram_grid(gam, n), periodogram_grid(gam, n, naive=True)),
            ):
                worst = max(worst, np.max(np.abs(fast - slow)) / np.max(np.abs(slow)))
    elapsed = time.time() - t0
    ok = worst <= 1e-9 and elapsed < 60
    verdict(4, ok, f"max relative fast/naive gap {worst:.2e} (<=1e-9) over 150 lag functions, {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------- 5

def markov_law(n, theta):
    """Every index sequence of the one-axis resampler with its exact probability."""
    seqs = np.array(list(itertools.product(range(n), repeat=n)))
    step = (seqs[:, 1:] == (seqs[:, :-1] + 1) % n)
    prob = (1.0 / n) * np.prod(np.where(step, 1 - theta + theta / n, theta / n), axis=1)
    return seqs, prob


def test_bootstrap_expectation_identity(verdict):
    n, theta, r_n, p0 = 4, 0.3, 3, 0.25
    seqs, prob = markov_law(n, theta)
    assert abs(prob.sum() - 1) < 1e-14

    # the sampler follows that law (n=3 keeps the table small)
    s3, p3 = markov_law(3, theta)
    rng = make_rng(501)
    draws = np.array([stationary_resample_1d(3, theta, rng) for _ in range(20_000)])
    codes = draws @ np.array([9, 3, 1])
    observed = np.bincount(codes, minlength=27)
    expected = p3[np.argsort(s3 @ np.array([9, 3, 1]))] * len(draws)
    law_p = stats.chisquare(observed, expected).pvalue

    maps = [IndexMap2D(r, c) for r in seqs for c in seqs]
    weights = np.outer(prob, prob).ravel()
    lags = LagFunction.lag_set(r_n, n)
    exact_gap = 0.0
    ind_rng = make_rng(502)
    for _ in range(3):
        ind = (ind_rng.random((n, n)) < 0.35).astype(np.int64)
        ex = ExceedanceField(ind, ThresholdPlan(p0=p0, a_mn=1.0))
        counts = batch_counts(product_fields(ex, lags), maps)
        e_star = (1 / p0) * (weights @ counts) / n ** 2
        target = truncated_extremogram(ex, r_n).values
        exact_gap = max(exact_gap, np.max(np.abs(e_star - target)))

    # Monte Carlo at n=50 on a simulated field
    n50, reps = 50, 2000
    f = simulate(MMA(0.5), n50, make_rng(503))
    plan = ThresholdPlan(p0=0.05, a_mn=empirical_quantile(f.values, 0.95))
    ex = exceedances(f, plan)
    lags3 = LagFunction.lag_set(3, n50)
    mc_maps = [bootstrap_lattice(n50, 1 / n50, make_rng(504, b)) for b in range(reps)]
    star = plan.m_n * batch_counts(product_fields(ex, lags3), mc_maps) / n50 ** 2
    target = truncated_extremogram(ex, 3).values
    se = star.std(axis=0, ddof=1) / np.sqrt(reps)
    z = np.abs(star.mean(axis=0) - target) / np.where(se > 0, se, np.inf)
    ok = exact_gap <= 1e-12 and z.max() <= 4 and law_p > 1e-3
    verdict(5, ok, f"exact n=4 max|E* - m_n C_n| = {exact_gap:.1e} (<=1e-12); "
                   f"n=50 MC max z = {z.max():.2f} (<=4); sampler law chi2 p = {law_p:.3f}")
    assert ok


# ---------------------------------------------------------------- 6

def test_density_agreement(verdict):
    t0 = time.time()
    cfg = GofConfig(B=500, p0=0.05, theta=1 / 50, seed=601)
    sim, boot, _ = statistic_densities(MMA(0.5), 50, cfg)
    ks = stats.ks_2samp(sim, boot).statistic
    # diagnostic only: the same experiment with theta = r_n / m_n
    sim_t, boot_t, _ = statistic_densities(MMA(0.5), 50, GofConfig(B=500, seed=601, theta_rule="ratio"))
    ks_t = stats.ks_2samp(sim_t, boot_t).statistic
    elapsed = time.time() - t0
    ok = ks <= 0.15 and elapsed < 1800
    verdict(6, ok, f"KS(T_n, T*_n) = {ks:.3f} at theta=1/50 (<=0.15); medians {np.median(sim):.1f} vs "
                   f"{np.median(boot):.1f}; diagnostic theta=r_n/m_n KS = {ks_t:.3f}; {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------- 7

def rejection_rate(model, runs, base):
    rejects = 0
    for k in range(runs):
        obs = simulate(model, 30, make_rng(base, k))
        mc = mc_critical_value(obs, "mma", GofConfig(B=200, alpha=0.05, seed=base + k))
        rejects += mc.t_obs > mc.c_sim
    return rejects / runs


def test_size_and_power(verdict):
    t0 = time.time()
    size = rejection_rate(MMA(0.5), 100, 7000)
    power = rejection_rate(BrownResnick(0.5), 100, 8000)
    elapsed = time.time() - t0
    ok = 0.0 <= size <= 0.15 and power - size >= 0.2
    verdict(7, ok, f"size {size:.2f} (in [0, 0.15]); power {power:.2f}, "
                   f"excess {power - size:.2f} (>=0.2); {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------- 8

def test_estimator_sanity(verdict):
    grid = default_parameter_grid("mma")
    exact = []
    for true in (0.25, 0.5, 1.2):
        fhat = _model_periodogram(MMA(true), 50, int(np.floor(2 * np.log(50))))
        exact.append(_fit_periodogram(fhat, "mma", grid, int(np.floor(2 * np.log(50)))) == true)
    estimates = np.array([whittle_estimate(simulate(MMA(0.5), 50, make_rng(2024, 9, s)), "mma")
                          for s in range(20)])
    hits = np.mean((estimates >= 0.35) & (estimates <= 0.65))
    ok = all(exact) and hits >= 0.8
    verdict(8, ok, f"zero-contrast recovery exact: {all(exact)}; {hits:.0%} of 20 seeds in [0.35, 0.65] "
                   f"(>=80%), median {np.median(estimates):.3f}")
    assert ok


# ---------------------------------------------------------------- 9

def test_integrated_unbiasedness(verdict):
    spec, n, p0, reps = MMA(0.5), 50, 0.05, 200
    plan = ThresholdPlan(p0=p0, a_mn=-1.0 / np.log(1.0 - p0))
    surfaces = np.stack([
        integrated_surface(empirical_extremogram(
            exceedances(known_unit_frechet(simulate(spec, n, make_rng(901, r)), spec), plan)), n).values
        for r in range(reps)
    ])
    lam = fourier_frequencies(n)
    probes = [(10, 20), (25, 25), (40, 10), (20, 40), (40, 40)]  # 1-based grid indices
    lags = LagFunction.lag_set(10)
    finite_n = integrated_surface(LagFunction(lags, theoretical_extremogram(spec, lags), lag_cap=10), n).values
    z, z_diag = [], []
    for j1, j2 in probes:
        col = surfaces[:, j1 - 1, j2 - 1]
        se = col.std(ddof=1) / np.sqrt(reps)
        target = theoretical_integrated(spec, None, (lam[j1 - 1], lam[j2 - 1]), subdivisions=800)
        z.append((col.mean() - target) / se)
        z_diag.append((col.mean() - finite_n[j1 - 1, j2 - 1]) / se)
    z = np.array(z)
    ok = np.all(np.abs(z) <= 3)
    verdict(9, ok, f"z vs theoretical_integrated {np.round(z, 2).tolist()} (|z|<=3); diagnostic z vs "
                   f"the grid-sum target sum gamma(h) psi~_h: {np.round(z_diag, 2).tolist()}")
    assert ok
