import math

import numpy as np
import pytest

from randlsq.bases import (
    chebyshev_family,
    equal_measure_piecewise_family,
    legendre_family,
    trigonometric_family,
)
from randlsq.estimator import QuadratureSpec, fit_least_squares, l2_error
from randlsq.experiments import (
    OptimalMTable,
    deterministic_gap_bound,
    deterministic_stability_table,
    error_vs_m_curve,
    instability_onset,
    noiseless_bound_experiment,
    noisy_bound_experiment,
    optimal_m_curve,
    scaling_exponent,
    target_function,
)
from randlsq.measures import uniform_measure
from randlsq.sampling import draw_iid
from randlsq.stability import accuracy_epsilon, stability_budget


def test_target_registry():
    f = target_function("runge")
    assert f.sup_bound == 1.0
    assert f.fn(np.array([0.0]))[0] == 1.0
    with pytest.raises(ValueError):
        target_function("nope")


@pytest.mark.parametrize("label", ["runge", "abs", "zero"])
def test_targets_respect_sup_bound(label):
    f = target_function(label)
    x = np.linspace(-1, 1, 4001)
    assert np.max(np.abs(f.fn(x))) <= f.sup_bound + 1e-15


# --- error vs m ---------------------------------------------------------------

def test_error_vs_m_shape_and_reproducibility():
    f = target_function("runge")
    fam = legendre_family()
    recs = error_vs_m_curve(f, fam, 60, m_values=range(1, 41), seed=3)
    errs = {r.m: r.error for r in recs}
    assert len(recs) == 40
    # constant fit lands near the m=1 best error, up to sampling noise
    from randlsq.bases import best_error

    e1 = best_error(f.fn, fam, 1)
    assert abs(errs[1] - e1) < 0.3 * e1 + 0.05
    # the curve improves somewhere in the stable range
    assert min(errs.values()) < errs[1]
    recs2 = error_vs_m_curve(f, fam, 60, m_values=range(1, 41), seed=3)
    assert recs == recs2


def test_error_vs_m_matches_direct_fit():
    f = target_function("abs")
    fam = chebyshev_family()
    n, m = 120, 7
    recs = error_vs_m_curve(f, fam, n, m_values=[m], seed=11)
    s = draw_iid(fam.measure, n, 11)
    fit = fit_least_squares(fam, m, s, f.fn(s.points)).truncated(f.sup_bound)
    direct = l2_error(f.fn, fit, QuadratureSpec(fam.measure))
    assert recs[0].error == pytest.approx(direct, rel=1e-12)
    assert recs[0].gap == pytest.approx(fit.gap, rel=1e-12)


def test_instability_onset_detects_first_blowup():
    class R:
        def __init__(self, m, error):
            self.m = m
            self.error = error

    recs = [R(1, 1.0), R(2, 0.1), R(3, 0.05), R(4, 0.7), R(5, 2.0)]
    assert instability_onset(recs, factor=10.0) == 4
    assert instability_onset(recs[:3], factor=10.0) is None


# --- optimal m ------------------------------------------------------------------

def test_optimal_m_single_point():
    f = target_function("abs")
    table, recs = optimal_m_curve(f, legendre_family(), [1], trials=3, seed=1)
    assert table.mean_m[0] == 1.0
    assert all(r.m == 1 for r in recs)


def test_optimal_m_reasonable_and_parallel_identical():
    f = target_function("abs")
    fam = legendre_family()
    t1, r1 = optimal_m_curve(f, fam, [25, 60], trials=4, seed=9, jobs=1)
    t2, r2 = optimal_m_curve(f, fam, [25, 60], trials=4, seed=9, jobs=2)
    assert r1 == r2
    assert np.array_equal(t1.trial_m, t2.trial_m, equal_nan=True)
    assert np.all(t1.mean_m >= 1.0)
    assert np.all(t1.mean_m <= np.array([25, 60]))


def test_optimal_m_records_have_gap():
    f = target_function("runge")
    table, recs = optimal_m_curve(f, chebyshev_family(), [30], trials=2, seed=4)
    for r in recs:
        assert np.isfinite(r.gap)


# --- scaling exponent --------------------------------------------------------------

def test_scaling_exponent_exact_sqrt():
    n_values = [16, 32, 64, 128, 256, 512]
    means = [math.sqrt(n) for n in n_values]
    est = scaling_exponent(OptimalMTable.from_means(n_values, means))
    assert est.slope == pytest.approx(0.5, abs=1e-12)
    assert est.ci_low == pytest.approx(est.ci_high, abs=1e-12)


def test_scaling_exponent_exact_linear():
    n_values = [50, 100, 200, 400, 800]
    means = [0.1 * n for n in n_values]
    est = scaling_exponent(OptimalMTable.from_means(n_values, means))
    assert est.slope == pytest.approx(1.0, abs=1e-12)


def test_scaling_exponent_uses_upper_half():
    # lower half is garbage; upper half is exactly linear
    n_values = [10, 20, 400, 800, 1600]
    means = [5.0, 2.0, 40.0, 80.0, 160.0]
    est = scaling_exponent(OptimalMTable.from_means(n_values, means))
    assert est.slope == pytest.approx(1.0, abs=1e-12)
    assert est.n_used == (400, 800, 1600)


def test_scaling_exponent_degenerate_rejected():
    with pytest.raises(ValueError):
        scaling_exponent(OptimalMTable.from_means([10, 20, 30, 40], [1, 2, 3, 4]))
    with pytest.raises(ValueError):
        scaling_exponent(
            OptimalMTable.from_means([10, 20, 30, 40, 50], [0.5, 1, 2, 3, 4])
        )


# --- bound experiments ----------------------------------------------------------------

def test_noiseless_bound_in_span_target():
    # zero target lies in every span: mean error ~ 0 <= bound
    f = target_function("zero")
    rep = noiseless_bound_experiment(f, chebyshev_family(), 500, trials=20, seed=6)
    assert rep.applicable
    assert rep.m == stability_budget(chebyshev_family(), 500, 1.0)
    assert rep.mean_sq_error <= 1e-20
    assert rep.passed


def test_noiseless_bound_runge():
    f = target_function("runge")
    rep = noiseless_bound_experiment(f, legendre_family(), 400, trials=30, seed=2)
    assert rep.applicable and rep.passed
    eps = accuracy_epsilon(400, 1.0)
    expected = (1 + eps) * rep.best_approx_error**2 + 8.0 / 400
    assert rep.bound == pytest.approx(expected, rel=1e-12)


def test_noiseless_bound_inapplicable():
    f = target_function("runge")
    rep = noiseless_bound_experiment(f, legendre_family(), 3, trials=5, seed=1)
    assert not rep.applicable
    assert rep.passed is None


def test_epsilon_term_value():
    assert accuracy_epsilon(10**4, 1.0) == pytest.approx(0.033316121559817655, rel=1e-12)


def test_noisy_bound_sigma_zero_matches_noiseless():
    f = target_function("abs")
    fam = chebyshev_family()
    noiseless = noiseless_bound_experiment(f, fam, 300, trials=15, seed=8)
    noisy = noisy_bound_experiment(
        f, fam, 300, sigma=0.0, trials=15, seed=8, m_values=[noiseless.m]
    )[0]
    assert noisy.mean_sq_error == noiseless.mean_sq_error
    assert [r.error for r in noisy.records] == [r.error for r in noiseless.records]


def test_noisy_bound_sweeps_below_budget():
    f = target_function("abs")
    fam = chebyshev_family()
    budget = stability_budget(fam, 1000, 1.0)
    reps = noisy_bound_experiment(f, fam, 1000, sigma=0.1, trials=10, seed=3)
    assert [rep.m for rep in reps] == list(range(1, budget + 1))
    for rep in reps:
        assert rep.bound >= 8 * 0.1**2 * rep.m / 1000


def test_noisy_variance_term_isolated():
    # zero target: the mean squared error is dominated by the noise term
    f = target_function("zero")
    fam = legendre_family()
    budget = stability_budget(fam, 1000, 1.0)
    rep = noisy_bound_experiment(
        f, fam, 1000, sigma=1.0, trials=60, seed=77, m_values=[budget]
    )[0]
    assert rep.mean_sq_error <= 8.0 * budget / 1000 * 1.05
    assert rep.mean_sq_error > 0.0


# --- deterministic stability -------------------------------------------------------------

def test_det_table_trig_exact():
    recs = deterministic_stability_table(trigonometric_family(), [21], [21])
    assert len(recs) == 1
    assert recs[0].gap <= 1e-12


def test_det_table_legendre_bound():
    recs = deterministic_stability_table(legendre_family(), [256], [5])
    (rec,) = recs
    assert rec.bounds["stability_bound"] == pytest.approx(2 * 16 / 256)
    assert rec.gap <= rec.bounds["stability_bound"]


def test_det_table_chebyshev_bound():
    recs = deterministic_stability_table(chebyshev_family(), [1000], [50])
    (rec,) = recs
    assert rec.bounds["stability_bound"] == pytest.approx(math.pi * 49 / 1000)
    assert rec.gap <= rec.bounds["stability_bound"]


def test_det_table_piecewise():
    fam = equal_measure_piecewise_family(uniform_measure(-1, 1), 12)
    recs = deterministic_stability_table(fam, [12], [12])
    assert len(recs) == 1
    assert recs[0].gap <= 1e-14


def test_det_table_skips_invalid_combos():
    recs = deterministic_stability_table(trigonometric_family(), [9], [4, 11, 7])
    assert [r.m for r in recs] == [7]


def test_det_gap_bound_values():
    assert deterministic_gap_bound(legendre_family(), 5, 256) == pytest.approx(0.125)
    assert deterministic_gap_bound(chebyshev_family(), 50, 1000) == pytest.approx(
        math.pi * 49 / 1000
    )
