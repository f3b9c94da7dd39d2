"""Acceptance harness: one test per release gate, one verdict line each.

Every test prints ``ACCEPTANCE <k> <name>: PASS/FAIL`` to the real terminal
(through ``capsys.disabled()``) before asserting, so a red run still shows
which gates held. Protocol sizes are fixed; expect a couple of minutes of
wall time for the whole file, dominated by the contraction sweep and the
10^4-replication simulations.
"""

import time
import warnings

import cvxpy as cp
import numpy as np
import pytest

from penlsq import (
    L1,
    ConeNorm,
    GroupL2,
    GroupPartition,
    PolyhedralCone,
    Problem,
    SlopeWeights,
    SortedL1,
    recommended_tuning,
    sample_observation,
    slope_weights,
    solve,
)
from penlsq.concentration import (
    MonteCarloConfig,
    NONCONVERGENCE_THRESHOLD,
    concentration_check,
    event_probability_check,
    oracle_coverage_check,
    simulate_prediction_errors,
)
from penlsq.constants import ConeSpec, re_type_constant
from penlsq.geometry import contraction_check, projection_identity_check
from penlsq.solvers import basic_inequality_check

CLARABEL_TIGHT = dict(tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)


def verdict(capsys, index, name, ok):
    with capsys.disabled():
        print(f"\nACCEPTANCE {index} {name}: {'PASS' if ok else 'FAIL'}",
              flush=True)


def normalized_design(n, p, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X *= np.sqrt(n) / np.linalg.norm(X, axis=0)
    return X


def planted(X, k, seed, amplitude):
    n, p = X.shape
    support = np.sort(np.random.default_rng(seed).choice(p, k, replace=False))
    beta = np.zeros(p)
    beta[support] = amplitude
    return Problem(X, X @ beta, 1.0), support.tolist()


def test_criterion_1_dual_projection_identity(capsys):
    # 50 fresh instances per kind; the solver's fitted values must agree
    # with y minus the Dykstra projection of y onto the dual ball.
    part = GroupPartition.contiguous(60, 20)
    worst = -np.inf
    ok = False
    try:
        for i in range(50):
            X = normalized_design(30, 60, 100 + i)
            prob, _ = planted(X, 4, 300 + i, amplitude=3.0)
            obs = sample_observation(prob, 500 + i)
            for pen in (
                L1(recommended_tuning("l1", X=X, sigma=1.0)),
                GroupL2(part, recommended_tuning("group", X=X, sigma=1.0,
                                                 partition=part)),
            ):
                rep = projection_identity_check(prob, obs, pen)
                worst = max(worst, rep.worst_slack)
        ok = worst <= 1e-6
    finally:
        verdict(capsys, 1, "dual-projection-identity", ok)
    assert ok, f"worst discrepancy {worst:.3e} over 100 instances"


def test_criterion_2_contraction(capsys):
    # 1000 (y, y') pairs per kind around a planted mean, at separations
    # small enough that the fits are nonzero and the bound is exercised.
    n, p = 30, 60
    X = normalized_design(n, p, 11)
    prob, _ = planted(X, 4, 12, amplitude=3.0)
    part = GroupPartition.contiguous(p, 20)
    cone = PolyhedralCone.from_partition(part)
    penalties = [
        L1(recommended_tuning("l1", X=X, sigma=1.0)),
        GroupL2(part, recommended_tuning("group", X=X, sigma=1.0,
                                         partition=part)),
        SortedL1(8.0, slope_weights(p, n, 1.0)),
        ConeNorm(cone, recommended_tuning("cone", X=X, sigma=1.0, cone=cone)),
    ]
    rng = np.random.default_rng(13)
    pairs = []
    for i in range(1000):
        y = prob.mean + rng.standard_normal(n)
        sep = (0.1, 1.0, 3.0)[i % 3]
        pairs.append((y, y + sep * rng.standard_normal(n)))
    seen = {}
    ok = False
    try:
        for pen in penalties:
            for rep in contraction_check(X, pen, pairs):
                assert rep.instances == 1000
                key = f"{pen.kind}/{rep.check}"
                seen[key] = (rep.passed, rep.worst_slack)
        assert len(seen) == 6  # firm variant on the two projectable kinds
        assert "l1/firm-nonexpansiveness" in seen
        assert "group/firm-nonexpansiveness" in seen
        ok = all(passed for passed, _ in seen.values())
    finally:
        verdict(capsys, 2, "contraction", ok)
    assert ok, {k: f"{s:.3e}" for k, (p_, s) in seen.items() if not p_}


def test_criterion_3_median_concentration(capsys):
    # 10^4 replications of a 50x100 lasso; the error's upper tail around
    # its sample median must sit below the Gaussian tail at each t.
    n, p = 50, 100
    X = normalized_design(n, p, 21)
    prob, _ = planted(X, 5, 22, amplitude=1.0)
    lam = 2.0 * np.sqrt(2.0 * np.log(p) / n)
    mc = MonteCarloConfig(replications=10_000, base_seed=23,
                          t_grid=(0.5, 1.0, 2.0, 3.0))
    ok = False
    rows = []
    try:
        start = time.perf_counter()
        sim = simulate_prediction_errors(prob, L1(lam), mc_cfg=mc)
        elapsed = time.perf_counter() - start
        assert sim.nonconvergence_fraction <= NONCONVERGENCE_THRESHOLD
        rows = concentration_check(sim.converged_errors(), prob.sigma, n, mc)
        median_rows = [r for r in rows if r.center == "median"]
        assert len(median_rows) == 4
        ok = all(r.passed for r in median_rows) and elapsed < 1800.0
    finally:
        verdict(capsys, 3, "median-concentration", ok)
    assert ok, [r for r in rows if r.center == "median" and not r.passed]
    # the mean-centered variants are covered by the same concentration
    assert all(r.passed for r in rows), [r for r in rows if not r.passed]


def coverage_outcome(pen, support, scale, spec, seed):
    X = 8.0 * np.eye(64)
    beta = np.zeros(64)
    beta[support] = 1.0
    prob = Problem(X, X @ beta, 1.0)
    estimate = re_type_constant(X, spec)
    assert estimate.status == "exact" and estimate.value == 1.0
    mc = MonteCarloConfig(replications=10_000, base_seed=seed, t_grid=(),
                          delta_grid=(0.5, 0.1, 0.01))
    return oracle_coverage_check(prob, pen, support, scale, estimate, mc)


def test_criterion_4_lasso_oracle_coverage(capsys):
    # orthonormal 64x64 design, |S| = 4: the root bound must cover at every
    # delta simultaneously and the sample mean must meet the mean bound.
    support = sorted(np.random.default_rng(31).choice(64, 4, replace=False).tolist())
    lam = recommended_tuning("l1", n=64, p=64, sigma=1.0)
    ok = False
    out = None
    try:
        out = coverage_outcome(L1(lam), support, lam, ConeSpec.re(support), 32)
        ok = out.passed and out.certifying
    finally:
        verdict(capsys, 4, "lasso-oracle-coverage", ok)
    assert ok, out


def test_criterion_5_slope_oracle_coverage(capsys):
    # sorted-l1 counterpart at A = 8 with a 2-sparse signal; the weighted
    # cone constant is exactly 1 on the orthonormal design.
    support = sorted(np.random.default_rng(41).choice(64, 2, replace=False).tolist())
    weights = slope_weights(64, 64, 1.0)
    ok = False
    out = None
    try:
        out = coverage_outcome(SortedL1(8.0, weights), support, 8.0,
                               ConeSpec.wre(2, weights), 42)
        ok = out.passed and out.certifying
    finally:
        verdict(capsys, 5, "slope-oracle-coverage", ok)
    assert ok, out


def test_criterion_6_event_probabilities(capsys):
    # each penalty's noise-correlation event must hold in at least half the
    # replications (minus binomial slack) at the minimal recommended tuning.
    n = 50
    failures = []
    ok = False
    try:
        for p, groups, seed in ((10, 5, 51), (100, 20, 52)):
            X = normalized_design(n, p, seed)
            prob = Problem(X, np.zeros(n), 1.0)
            part = GroupPartition.contiguous(p, groups)
            cone = PolyhedralCone.from_partition(part)
            penalties = [
                L1(recommended_tuning("l1", X=X, sigma=1.0)),
                GroupL2(part, recommended_tuning("group", X=X, sigma=1.0,
                                                 partition=part)),
                ConeNorm(cone, recommended_tuning("cone", X=X, sigma=1.0,
                                                  cone=cone)),
                SortedL1(8.0, slope_weights(p, n, 1.0)),
            ]
            mc = MonteCarloConfig(replications=10_000, base_seed=seed + 10)
            for pen in penalties:
                for row in event_probability_check(prob, pen, mc):
                    if not row.passed:
                        failures.append((p, row))
        ok = not failures
    finally:
        verdict(capsys, 6, "event-probabilities", ok)
    assert ok, failures


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def block_shrink(v, groups, t):
    out = np.zeros_like(v)
    for g in groups:
        idx = list(g)
        nrm = float(np.linalg.norm(v[idx]))
        if nrm > t:
            out[idx] = (1.0 - t / nrm) * v[idx]
    return out


def cvxpy_sorted_l1_prox(v, a_scale, mu, step):
    b = cp.Variable(v.size)
    diffs = np.append(mu[:-1] - mu[1:], mu[-1])
    F = a_scale * cp.sum(cp.hstack([diffs[k] * cp.sum_largest(cp.abs(b), k + 1)
                                    for k in range(mu.size)]))
    cp.Problem(cp.Minimize(0.5 * cp.sum_squares(b - v) + step * F)).solve(
        solver=cp.CLARABEL, **CLARABEL_TIGHT)
    return np.asarray(b.value, dtype=float)


@pytest.mark.filterwarnings("ignore:Solution may be inaccurate")
def test_criterion_7_prox_oracles(capsys):
    # Clarabel sometimes flags reduced accuracy at the tight settings; the
    # 1e-6 agreement bound below is what decides whether that matters.
    rng = np.random.default_rng(61)
    worst_slope = 0.0
    worst_closed = 0.0
    ok = False
    try:
        for i in range(1000):
            p = int(rng.integers(1, 7))
            mu = np.sort(np.abs(rng.standard_normal(p)))[::-1] + 0.05
            if i % 5 == 0:
                mu = np.round(mu, 1) + 0.05  # force ties
            a_scale = float(rng.lognormal(0.0, 0.7))
            step = float(rng.lognormal(-0.5, 0.8))
            v = 3.0 * rng.standard_normal(p)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                ref = cvxpy_sorted_l1_prox(v, a_scale, mu, step)
            mine = SortedL1(a_scale, SlopeWeights(mu)).prox(v, step)
            worst_slope = max(worst_slope, float(np.max(np.abs(mine - ref))))
        for i in range(1000):
            p = int(rng.integers(2, 9))
            lam = float(rng.lognormal(-0.5, 0.7))
            step = float(rng.lognormal(-0.5, 0.8))
            v = 3.0 * rng.standard_normal(p)
            d1 = L1(lam).prox(v, step) - soft_threshold(v, step * lam)
            divisors = [m for m in range(1, p + 1) if p % m == 0]
            part = GroupPartition.contiguous(p, int(rng.choice(divisors)))
            d2 = GroupL2(part, lam).prox(v, step) - block_shrink(
                v, part.groups, step * lam)
            worst_closed = max(worst_closed, float(np.max(np.abs(d1))),
                               float(np.max(np.abs(d2))))
        ok = worst_slope <= 1e-6 and worst_closed <= 1e-12
    finally:
        verdict(capsys, 7, "prox-oracles", ok)
    assert ok, f"sorted-l1 vs cvxpy {worst_slope:.3e}, closed forms {worst_closed:.3e}"


def angular_grid_minimum(X, c0, points=200_001):
    # exhaustive search over the unit circle restricted to |d_1| <= c0 |d_0|
    theta = np.linspace(0.0, 2.0 * np.pi, points)
    d = np.stack([np.cos(theta), np.sin(theta)])
    feasible = np.abs(d[1]) <= c0 * np.abs(d[0])
    values = np.linalg.norm(X @ d[:, feasible], axis=0) / np.sqrt(X.shape[0])
    return float(values.min())


def test_criterion_8_re_constants(capsys):
    # multistart restricted-eigenvalue estimates against an exhaustive
    # angular grid on correlated two-column designs, plus the orthonormal
    # closed form.
    spec = ConeSpec.re((0,), c0=3.0)
    gaps = {}
    ok = False
    try:
        for rho in (0.0, 0.5, 0.9):
            X = np.sqrt(2.0) * np.array([[1.0, rho],
                                         [0.0, np.sqrt(1.0 - rho * rho)]])
            estimate = re_type_constant(X, spec)
            gaps[rho] = abs(estimate.value - angular_grid_minimum(X, 3.0))
        exact = re_type_constant(4.0 * np.eye(16), ConeSpec.re((0, 2)))
        ok = (max(gaps.values()) <= 1e-3
              and exact.value == 1.0 and exact.status == "exact")
    finally:
        verdict(capsys, 8, "re-constants", ok)
    assert ok, gaps


def test_criterion_9_basic_inequality(capsys):
    # the optimality comparison must hold at 100 random trial points per
    # solved instance, within ten times the solver's gap tolerance.
    n, p = 30, 60
    X = normalized_design(n, p, 71)
    prob, _ = planted(X, 4, 72, amplitude=3.0)
    part = GroupPartition.contiguous(p, 20)
    cone = PolyhedralCone.from_partition(part)
    penalties = [
        L1(recommended_tuning("l1", X=X, sigma=1.0)),
        GroupL2(part, recommended_tuning("group", X=X, sigma=1.0,
                                         partition=part)),
        SortedL1(8.0, slope_weights(p, n, 1.0)),
        ConeNorm(cone, recommended_tuning("cone", X=X, sigma=1.0, cone=cone)),
    ]
    rng = np.random.default_rng(73)
    failures = []
    ok = False
    try:
        for pen in penalties:
            for rep_seed in (81, 82, 83, 84, 85):
                obs = sample_observation(prob, rep_seed)
                res = solve(obs.y, X, pen)
                trials = [
                    res.beta_hat
                    + (0.03, 0.3, 3.0)[t % 3] * rng.standard_normal(p)
                    for t in range(100)
                ]
                report = basic_inequality_check(res, prob, obs, pen, trials)
                assert report.n_trials == 100
                if not report.passed:
                    failures.append((pen.kind, rep_seed,
                                     report.worst_violation, report.tol))
        ok = not failures
    finally:
        verdict(capsys, 9, "basic-inequality", ok)
    assert ok, failures
