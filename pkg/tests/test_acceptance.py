"""Acceptance suite.

Each numbered criterion runs at its pinned tolerance and prints one
PASS/FAIL line.  The experiment criteria (6-9) share session-scoped
fixtures over the frozen seeds; reruns for the determinism criterion
recompute everything from scratch and compare written report bytes.

Two checks are known-red and documented in the project decision log:
the per-seed avg_radius monotonicity clause of criterion 6 and the
vote-count direction trend invariant.  Both fail for verified
data-distribution reasons at this scale, not implementation defects.
"""

import math
import time

import numpy as np
import pytest

from privsmooth.ape import ApeGrid, IntervalSet, expanded_inference_set
from privsmooth.harness import (
    InversionConfig,
    RecommendationConfig,
    run_ablation,
    run_inversion_experiment,
    run_recommendation_experiment,
    write_inversion_report,
    write_recommendation_report,
)
from privsmooth.nn import MlpModel, TrainConfig, loss_and_gradients
from privsmooth.numerics import (
    RngStream,
    clopper_pearson_lower,
    std_normal_cdf,
    std_normal_inv_cdf,
)
from privsmooth.smoothing import SmoothingParams, certify, radius_from_bounds

ACCEPT_SEEDS = (1, 2, 3)

# budget tolerance for ASR comparisons: two attack successes out of 50
ASR_TOL = 2 / 50


def report_line(criterion, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {criterion}: {status}{suffix}")


@pytest.fixture(scope="session")
def recommendation_runs():
    t0 = time.perf_counter()
    reports = {seed: run_recommendation_experiment(RecommendationConfig(seed=seed))
               for seed in ACCEPT_SEEDS}
    return reports, time.perf_counter() - t0


@pytest.fixture(scope="session")
def ablation_runs():
    return {seed: run_ablation(RecommendationConfig(seed=seed)) for seed in ACCEPT_SEEDS}


@pytest.fixture(scope="session")
def inversion_runs():
    t0 = time.perf_counter()
    reports = {seed: run_inversion_experiment(InversionConfig(seed=seed))
               for seed in ACCEPT_SEEDS}
    return reports, time.perf_counter() - t0


def test_criterion_1_numerics_oracles():
    t0 = time.perf_counter()
    for alpha in (0.05, 0.001):
        for n in range(1, 21):
            for k in range(n + 1):
                p = clopper_pearson_lower(k, n, alpha)
                if k == 0:
                    assert p == 0.0
                    continue
                tail = sum(
                    math.comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(k, n + 1)
                )
                assert abs(tail - alpha) <= 1e-7
    worst = 0.0
    for x in np.linspace(-6.0, 6.0, 1201):
        x = float(x)
        worst = max(worst, abs(std_normal_inv_cdf(std_normal_cdf(x)) - x))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-7 and elapsed < 10.0
    report_line(1, ok, f"roundtrip max err {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-7
    assert elapsed < 10.0


def test_criterion_2_radius_identity():
    worst = 0.0
    for sigma in (0.5, 1.0, 3.0):
        for p in np.linspace(0.505, 0.995, 99):
            p = float(p)
            lhs = radius_from_bounds(sigma, p, 1.0 - p)
            rhs = sigma * std_normal_inv_cdf(p)
            worst = max(worst, abs(lhs - rhs))
    report_line(2, worst <= 1e-12, f"max deviation {worst:.2e}")
    assert worst <= 1e-12


def test_criterion_3_gradient_check():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        d = int(rng.integers(2, 5))
        h = int(rng.integers(3, 7))
        k = int(rng.integers(2, 5))
        # parameters bounded away from the ReLU and |w| kinks
        model = MlpModel(
            w1=rng.uniform(0.2, 1.0, (h, d)) * rng.choice([-1.0, 1.0], (h, d)),
            b1=rng.uniform(0.1, 0.5, h) * rng.choice([-1.0, 1.0], h),
            w2=rng.uniform(0.2, 1.0, (k, h)) * rng.choice([-1.0, 1.0], (k, h)),
            b2=rng.uniform(0.1, 0.5, k) * rng.choice([-1.0, 1.0], k),
        )
        X = rng.normal(size=(4, d))
        y = rng.integers(0, k, 4)
        mask = rng.random(d) < 0.5
        cfg = TrainConfig(l1_lambda=0.05, l1_mask=mask)
        _, grads = loss_and_gradients(model, X, y, cfg)
        eps = 1e-5
        for name in ("w1", "b1", "w2", "b2"):
            param = getattr(model, name)
            grad = getattr(grads, name)
            it = np.nditer(param, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = param[ix]
                param[ix] = orig + eps
                lp, _ = loss_and_gradients(model, X, y, cfg)
                param[ix] = orig - eps
                lm, _ = loss_and_gradients(model, X, y, cfg)
                param[ix] = orig
                fd = (lp - lm) / (2 * eps)
                scale = max(abs(fd), abs(grad[ix]), 1e-6)
                worst = max(worst, abs(grad[ix] - fd) / scale)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 30.0
    report_line(3, ok, f"max rel err {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-4
    assert elapsed < 30.0


def test_criterion_4_analytic_certification():
    def base(X):
        return (X[:, 0] > 0.0).astype(int)

    params = SmoothingParams(sigma=1.0, n=10_000, n0=100, alpha=0.001)
    x = np.array([1.0])  # true certified radius is the margin, exactly 1
    in_window = 0
    for seed in range(100):
        cert = certify(base, x, params, RngStream(seed, 4040))
        if cert is not None and cert.label == 1 and 0.9 <= cert.radius <= 1.0:
            in_window += 1
    ok = in_window >= 95
    report_line(4, ok, f"{in_window}/100 runs inside [0.9, 1.0]")
    assert in_window >= 95


def test_criterion_5_expansion_oracle():
    grid = ApeGrid(0.0, 10.0, 0.1)
    baseline = IntervalSet([(2.0, 5.0)])
    out = expanded_inference_set(baseline, lambda z: 1.0, grid)
    exact = out.intervals == ((2.0 - 1.0, 5.0 + 1.0),)

    rng = np.random.default_rng(55)
    superset_ok = True
    for _ in range(1000):
        k = int(rng.integers(1, 4))
        raw = np.sort(rng.uniform(0.0, 10.0, 2 * k))
        baseline = IntervalSet([(float(raw[2 * i]), float(raw[2 * i + 1])) for i in range(k)])
        radii = {}

        def radius_at(z):
            if z not in radii:
                radii[z] = float(rng.uniform(0.0, 2.0)) if rng.random() < 0.7 else 0.0
            return radii[z]

        expanded = expanded_inference_set(baseline, radius_at, grid)
        if not expanded.contains(baseline):
            superset_ok = False
            break
    ok = exact and superset_ok
    report_line(5, ok, f"uniform-R exact: {exact}, superset x1000: {superset_ok}")
    assert exact
    assert superset_ok


def _monotone(values) -> bool:
    return all(b >= a for a, b in zip(values, values[1:]))


def test_criterion_6_recommendation_trend_suite(recommendation_runs):
    reports, elapsed = recommendation_runs
    clause = {
        "base-mass-right-of-B": True,
        "abstention-nondecreasing": True,
        "avg-radius-nondecreasing": True,
        "expansion-nondecreasing": True,
        "expansion-positive-at-3": True,
        "runtime<15min": elapsed < 900.0,
    }
    for seed, rep in reports.items():
        if any(lo < rep.threshold_b - 1e-9 for lo, _ in rep.histograms["base"]):
            clause["base-mass-right-of-B"] = False
        if rep.base_expansion != 0.0:
            clause["base-mass-right-of-B"] = False
        assert [row.sigma for row in rep.rows] == [1.0, 2.0, 3.0]
        if not _monotone([row.abstention_rate for row in rep.rows]):
            clause["abstention-nondecreasing"] = False
        if not _monotone([row.avg_radius for row in rep.rows]):
            clause["avg-radius-nondecreasing"] = False
        if not _monotone([row.empirical_expansion for row in rep.rows]):
            clause["expansion-nondecreasing"] = False
        if not rep.rows[-1].empirical_expansion > 0.0:
            clause["expansion-positive-at-3"] = False
    failed = sorted(name for name, ok in clause.items() if not ok)
    report_line(6, not failed, f"elapsed {elapsed:.0f}s" + (f"; failed: {failed}" if failed else ""))
    assert not failed, (
        f"criterion 6 clauses failed: {failed}. The avg-radius clause is a "
        "verified desk-scale spec defect; see the decision log entry on "
        "avg_radius monotonicity (thin-tailed synthetic attribute distribution "
        "keeps the per-sigma certified-radius average flat, so the sigma=2 to "
        "sigma=3 comparison is systematically non-monotone)."
    )


def test_criterion_7_ablation_trends(ablation_runs):
    ok = True
    details = []
    for seed, rep in ablation_runs.items():
        cells = {(row.n_votes, row.alpha): row.empirical_expansion for row in rep.rows}
        ref = cells[(1000, 0.01)]
        small_n = cells[(100, 0.01)]
        big_alpha = cells[(1000, 0.99)]
        seed_ok = small_n >= ref and big_alpha >= ref
        ok = ok and seed_ok
        details.append(f"seed {seed}: {ref:.2f}/{small_n:.2f}/{big_alpha:.2f}")
    report_line(7, ok, "; ".join(details))
    assert ok


def test_criterion_8_inversion_defense_suite(inversion_runs):
    reports, elapsed = inversion_runs
    clause = {
        "undefended-asr>=0.6": True,
        "asr-nonincreasing-in-sigma": True,
        "largest-sigma-halves-asr": True,
        "equal-accuracy-cell-exists": True,
        "runtime<20min": elapsed < 1200.0,
    }
    for seed, rep in reports.items():
        base = rep.baseline
        if base.asr < 0.6:
            clause["undefended-asr>=0.6"] = False
        for n in sorted({row.n_votes for row in rep.rows}):
            series = [row.asr for row in rep.rows if row.n_votes == n]
            if any(b > a + ASR_TOL for a, b in zip(series, series[1:])):
                clause["asr-nonincreasing-in-sigma"] = False
        n100 = [row for row in rep.rows if row.n_votes == 100]
        if n100[-1].asr > 0.5 * base.asr:
            clause["largest-sigma-halves-asr"] = False
        if not any(row.accuracy == base.accuracy and row.asr < base.asr for row in rep.rows):
            clause["equal-accuracy-cell-exists"] = False
    failed = sorted(name for name, ok in clause.items() if not ok)
    report_line(8, not failed, f"elapsed {elapsed:.0f}s" + (f"; failed: {failed}" if failed else ""))
    assert not failed


def test_criterion_9_byte_identical_reports(tmp_path_factory, recommendation_runs, inversion_runs):
    rec_reports, _ = recommendation_runs
    inv_reports, _ = inversion_runs
    root = tmp_path_factory.mktemp("determinism")
    mismatches = []
    for seed in ACCEPT_SEEDS:
        first = root / f"rec_{seed}_run1"
        second = root / f"rec_{seed}_run2"
        write_recommendation_report(rec_reports[seed], first)
        write_recommendation_report(
            run_recommendation_experiment(RecommendationConfig(seed=seed)), second
        )
        for path in sorted(first.iterdir()):
            if path.read_bytes() != (second / path.name).read_bytes():
                mismatches.append(f"rec seed {seed}: {path.name}")

        first = root / f"inv_{seed}_run1"
        second = root / f"inv_{seed}_run2"
        write_inversion_report(inv_reports[seed], first)
        write_inversion_report(run_inversion_experiment(InversionConfig(seed=seed)), second)
        for path in sorted(first.iterdir()):
            if path.read_bytes() != (second / path.name).read_bytes():
                mismatches.append(f"inv seed {seed}: {path.name}")
    report_line(9, not mismatches, f"mismatches: {mismatches}" if mismatches else "")
    assert not mismatches


def test_trend_invariant_conservative_expansion(recommendation_runs):
    """Expansion at least the average certified radius along the trajectory."""
    reports, _ = recommendation_runs
    for seed, rep in reports.items():
        for row in rep.rows:
            assert row.empirical_expansion >= row.avg_trajectory_radius, (
                f"seed {seed} sigma {row.sigma}: expansion {row.empirical_expansion} "
                f"below avg trajectory radius {row.avg_trajectory_radius}"
            )


def test_trend_invariant_vote_count_direction(inversion_runs):
    """More votes should not raise attack success beyond tolerance.

    Known-red: at this toy scale the vote-noise component of the defense
    dominates, so the cleaner N=100 oracle is easier to attack at middle
    noise scales; see the decision log entry on the vote-count direction.
    """
    reports, _ = inversion_runs
    violations = []
    for seed, rep in reports.items():
        by_sigma = {}
        for row in rep.rows:
            by_sigma.setdefault(row.sigma, {})[row.n_votes] = row.asr
        for sigma, cells in sorted(by_sigma.items()):
            if cells[100] > cells[10] + ASR_TOL:
                violations.append(f"seed {seed} sigma {sigma}: {cells[100]:.2f} > {cells[10]:.2f}+tol")
    assert not violations, (
        "vote-count direction violated (documented desk-scale limitation): "
        + "; ".join(violations)
    )
