"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The heavy benchmark
cells are shared across criteria through a lazy module cache; everything is
seeded, so repeated runs reproduce the same numbers.
"""

import time

import numpy as np
import pytest

from fblr.bilinear import FblrConfig, fblr_fit, step_penalty_quadform, tilde_x
from fblr.covariance import (
    SeparableCov,
    excess_risk_oracle,
    flipflop_factors,
    gamma_sequence,
    seminorm0_quadform,
)
from fblr.flr import flr_fit_representer, flr_fit_ridge_form
from fblr.grids import (
    Func1D,
    QuadForm,
    bilinear_batch,
    center_dataset,
    make_uniform_grid,
)
from fblr.kernels import CustomGram, cosine_covariance, rkhs_quadform
from fblr.simulate import (
    SettingSpec,
    fit_rate_slope,
    make_setting_data,
    mix_seed,
    run_benchmark,
    sample_gp_separable,
)
from fblr.bilinear import PenaltyForms, PenaltyMode, penalty_j
from fblr.kernels import SecondDerivRoughness

BASE_SEED = 20260810
NS = [32, 64, 128, 256]

_cache: dict = {}


def _cell(key):
    if key in _cache:
        return _cache[key]
    t0 = time.perf_counter()
    if key == "A":
        out = run_benchmark([(1, 1.0)], NS, ["fblr"], 20, BASE_SEED, keep_fits=True)
    elif key == "B":
        out = run_benchmark([(1, 2.0)], NS, ["fblr"], 20, BASE_SEED, keep_fits=True)
    elif key == "C":
        out = run_benchmark(
            [(1, 1.0)], [128], ["fblr", "fblr_est"], 20, BASE_SEED, keep_fits=True
        )
    elif key == "D":
        out = run_benchmark(
            [(1, 1.0)], [256], ["fblr", "ridge", "flr_vecstar", "flr_vec"],
            20, BASE_SEED, keep_fits=True,
        )
    elif key == "E":
        out = run_benchmark(
            [(5, 1.0)], [256], ["fblr", "fblr_r2"], 20, BASE_SEED, keep_fits=True
        )
    elif key == "G":
        out = run_benchmark([(1, 1.0)], [128], ["fblr", "fblr_cv"], 10, BASE_SEED)
    else:  # pragma: no cover
        raise KeyError(key)
    _cache[key] = out
    _cache[key + "_seconds"] = time.perf_counter() - t0
    return out


def _report(num: int, passed: bool, detail: str) -> bool:
    print(f"criterion {num:2d}: {'PASS' if passed else 'FAIL'} - {detail}")
    return passed


def test_criterion_01_rate_reproduction():
    res = _cell("A")
    means = [res.mean_risk("fblr", 1, 1.0, n) for n in NS]
    slope, se = fit_rate_slope(NS, means)
    seconds = _cache["A_seconds"]
    ok = -1.05 <= slope <= -0.55 and seconds <= 900
    assert _report(
        1, ok,
        f"slope {slope:.3f} (se {se:.3f}) vs target -0.8, band [-1.05, -0.55]; "
        f"cell runtime {seconds:.0f}s <= 900s",
    )


def test_criterion_02_smoothness_ordering():
    res1, res2 = _cell("A"), _cell("B")
    s1, _ = fit_rate_slope(NS, [res1.mean_risk("fblr", 1, 1.0, n) for n in NS])
    s2, _ = fit_rate_slope(NS, [res2.mean_risk("fblr", 1, 2.0, n) for n in NS])
    ok = s2 <= s1 + 0.05
    assert _report(2, ok, f"slope(r_c=2) {s2:.3f} <= slope(r_c=1) {s1:.3f} + 0.05")


def test_criterion_03_estimated_vs_true_covariance():
    res = _cell("C")
    m_true = res.mean_risk("fblr", 1, 1.0, 128)
    m_est = res.mean_risk("fblr_est", 1, 1.0, 128)
    ratio = m_est / m_true
    ok = ratio <= 1.5
    assert _report(3, ok, f"est/true mean-risk ratio {ratio:.3f} <= 1.5")


def test_criterion_04_baseline_dominance():
    res = _cell("D")
    mf = res.mean_risk("fblr", 1, 1.0, 256)
    mr = res.mean_risk("ridge", 1, 1.0, 256)
    ms = res.mean_risk("flr_vecstar", 1, 1.0, 256)
    ok = mf < mr and mf < ms
    assert _report(
        4, ok, f"fblr {mf:.4f} < ridge {mr:.4f} and < stacked-star {ms:.4f}"
    )


def test_criterion_05_stacking_order():
    res = _cell("D")
    ms = res.mean_risk("flr_vecstar", 1, 1.0, 256)
    mv = res.mean_risk("flr_vec", 1, 1.0, 256)
    ok = ms <= mv
    assert _report(5, ok, f"stacked-star {ms:.4f} <= stacked {mv:.4f}")


def test_criterion_06_rank_two_payoff():
    res = _cell("E")
    m1 = res.mean_risk("fblr", 5, 1.0, 256)
    m2 = res.mean_risk("fblr_r2", 5, 1.0, 256)
    ok = m2 < m1
    assert _report(6, ok, f"two-term {m2:.4f} < one-term {m1:.4f} on the two-term truth")


def test_criterion_07_exact_penalty_identities():
    rng = np.random.default_rng(BASE_SEED)
    gs, gt = make_uniform_grid(17), make_uniform_grid(13)
    cs, _ = cosine_covariance(1.0, 30, gs)
    ct, _ = cosine_covariance(1.0, 30, gt)
    forms = PenaltyForms(
        m0s=seminorm0_quadform(cs, gs),
        mks=rkhs_quadform(SecondDerivRoughness(), gs),
        m0t=seminorm0_quadform(ct, gt),
        mkt=rkhs_quadform(SecondDerivRoughness(), gt),
    )
    worst_scale = 0.0
    worst_decouple = 0.0
    for _ in range(100):
        a = Func1D(gs, rng.standard_normal(17))
        b = Func1D(gt, rng.standard_normal(13))
        la, lb = 10.0 ** rng.uniform(-6, 1, size=2)
        c = np.exp(rng.uniform(-2, 2))
        for mode in PenaltyMode:
            j1 = penalty_j(a, b, la, lb, forms, mode)
            j2 = penalty_j(
                Func1D(gs, c * a.values), Func1D(gt, b.values / c), la, lb, forms, mode
            )
            worst_scale = max(worst_scale, abs(j1 - j2) / max(abs(j1), 1e-300))
        a0, ak = forms.m0s.value(a), forms.mks.value(a)
        b0, bk = forms.m0t.value(b), forms.mkt.value(b)
        lhs = a0 * b0 + penalty_j(a, b, la, lb, forms, PenaltyMode.CANDIDATE3)
        rhs = (a0 + la * ak) * (b0 + lb * bk)
        worst_decouple = max(worst_decouple, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    ok = worst_scale <= 1e-12 and worst_decouple <= 1e-12
    assert _report(
        7, ok,
        f"scale invariance dev {worst_scale:.2e}, decoupling dev {worst_decouple:.2e} (<= 1e-12)",
    )


def test_criterion_08_variance_identity():
    grid = make_uniform_grid(21)
    c_mat, model = cosine_covariance(1.0, 60, grid)
    rng = np.random.default_rng(BASE_SEED + 8)
    f = Func1D(grid, rng.standard_normal(21))
    g = Func1D(grid, rng.standard_normal(21))
    x = sample_gp_separable(model, model, 20000, mix_seed(BASE_SEED, 8))
    vals = bilinear_batch(f, x, g)
    form = seminorm0_quadform(c_mat, grid)
    want = form.value(f) * form.value(g)
    rel = abs(np.var(vals) - want) / want
    ok = rel <= 0.05
    assert _report(
        8, ok, f"MC variance {np.var(vals):.4f} vs closed form {want:.4f}, rel dev {rel:.3f} <= 0.05"
    )


def test_criterion_09_solver_equivalence():
    rng = np.random.default_rng(BASE_SEED + 9)
    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(5, 21))
        n = int(rng.integers(3, 11))
        g = make_uniform_grid(m)
        a = rng.standard_normal((m, m))
        gram = a @ a.T + 0.5 * m * np.eye(m)
        x = rng.standard_normal((n, m))
        y = rng.standard_normal(n)
        lam = 10.0 ** rng.uniform(-6, 0)
        inv = np.linalg.inv(gram)
        ridge = flr_fit_ridge_form(x, y, g, QuadForm(g, lam * 0.5 * (inv + inv.T)))
        rep = flr_fit_representer(x, y, g, gram, lam)
        scale = np.max(np.abs(rep.coef.values))
        worst = max(worst, float(np.max(np.abs(ridge.coef.values - rep.coef.values))) / scale)

    # half-step against an independently assembled dense quadratic program
    gs = gt = make_uniform_grid(8)
    cs, _ = cosine_covariance(1.0, 16, gs)
    forms = PenaltyForms(
        m0s=seminorm0_quadform(cs, gs),
        mks=rkhs_quadform(SecondDerivRoughness(), gs),
        m0t=seminorm0_quadform(cs, gt),
        mkt=rkhs_quadform(SecondDerivRoughness(), gt),
    )
    ds = center_dataset(rng.standard_normal((6, 8, 8)), rng.standard_normal(6), gs, gt)
    alpha = Func1D(gs, rng.standard_normal(8))
    la, lb = 3e-4, 2e-5
    pen = step_penalty_quadform(alpha, la, lb, forms.m0s, forms.mks, forms.m0t, forms.mkt)
    lines = tilde_x(alpha, ds)
    fit = flr_fit_ridge_form(lines, ds.y, gt, pen)
    wt = gt.weights
    q = np.zeros((8, 8))
    rhs = np.zeros(8)
    for i in range(6):
        wx = wt * lines[i]
        q += np.outer(wx, wx) / 6
        rhs += ds.y[i] * wx / 6
    beta_oracle = np.linalg.solve(q + pen.m_matrix, rhs)
    step_dev = float(np.max(np.abs(fit.coef.values - beta_oracle)))
    ok = worst <= 1e-6 and step_dev <= 1e-8
    assert _report(
        9, ok,
        f"dual-form worst rel dev {worst:.2e} <= 1e-6; half-step vs dense QP dev {step_dev:.2e} <= 1e-8",
    )


def test_criterion_10_descent_monotonicity():
    traces = []
    for key in ("A", "B", "C", "D", "E"):
        res = _cell(key)
        for fit in res.fits.values():
            if hasattr(fit, "objective_trace"):
                traces.append(np.asarray(fit.objective_trace))
            elif hasattr(fit, "fits"):  # multi-term fits carry one trace per stage
                traces.extend(np.asarray(f.objective_trace) for f in fit.fits)
    checked = 0
    worst = 0.0
    for tr in traces:
        if tr.size < 2:
            continue
        checked += 1
        rel = np.max((tr[1:] - tr[:-1]) / np.maximum(np.abs(tr[:-1]), 1e-300))
        worst = max(worst, float(rel))
    ok = checked > 100 and worst <= 1e-9
    assert _report(
        10, ok,
        f"{checked} recorded traces, worst relative half-step increase {worst:.2e} <= 1e-9",
    )


def test_criterion_11_gamma_alignment():
    grid = make_uniform_grid(201)
    r_c = 1.0
    c_mat, _ = cosine_covariance(r_c, 200, grid)
    m0 = seminorm0_quadform(c_mat, grid)
    k_mat, _ = cosine_covariance(1.0, 200, grid)  # aligned kernel, unit decay
    mk = rkhs_quadform(CustomGram(k_mat), grid)
    seq = gamma_sequence(m0, mk, 30)
    k = np.arange(1, 11)
    target = k ** (-2.0 * r_c) * k ** (-2.0)
    rel = float(np.max(np.abs(seq.gammas[:10] - target) / target))

    from fblr.cli import main

    rc = main([
        "diag-gamma", "--kernel", "cosine", "--kernel-rc", "1",
        "--rc", "1", "--k", "30", "--grid-len", "201",
    ])
    fitted_dev = abs(seq.fitted_r - (r_c + 1.0))
    ok = rel < 0.05 and fitted_dev <= 0.3 and rc == 0
    assert _report(
        11, ok,
        f"max rel gamma dev (k<=10) {rel:.2e} < 0.05; fitted_r {seq.fitted_r:.3f} "
        f"within 0.3 of r_c+1 = {r_c + 1:.1f}",
    )


def test_criterion_12_flipflop_recovery():
    grid = make_uniform_grid(20)
    c_mat, model = cosine_covariance(1.0, 50, grid)
    x = sample_gp_separable(model, model, 500, mix_seed(BASE_SEED, 12))
    ca, cb, _, converged = flipflop_factors(x, grid.h)
    err2 = (
        np.linalg.norm(ca) ** 2 * np.linalg.norm(cb) ** 2
        - 2 * np.trace(ca.T @ c_mat) * np.trace(cb.T @ c_mat)
        + np.linalg.norm(c_mat) ** 4
    )
    rel = float(np.sqrt(max(err2, 0.0)) / np.linalg.norm(c_mat) ** 2)
    ok = rel < 0.15 and converged
    assert _report(12, ok, f"Kronecker relative error {rel:.3f} < 0.15 (converged={converged})")


def test_criterion_13_noiseless_recovery():
    seed = mix_seed(BASE_SEED, 13)
    sd = make_setting_data(SettingSpec.from_id(1, 1.0, n=256, seed=seed, sigma=0.0))
    cfg = FblrConfig(lambda_alpha=1e-8, lambda_beta=1e-8, covariance=sd.cov_true)
    fit = fblr_fit(sd.data, cfg)
    risk = excess_risk_oracle(
        fit.coefficient_field() - sd.truth.b_field, sd.cov_true,
        sd.data.s_grid, sd.data.t_grid,
    )
    ratio = risk / sd.null_risk
    ok = ratio < 1e-3
    assert _report(13, ok, f"risk/null {ratio:.2e} < 1e-3 (risk {risk:.2e}, null {sd.null_risk:.1f})")


def test_criterion_14_igcv_vs_cv():
    res = _cell("G")
    m_igcv = res.mean_risk("fblr", 1, 1.0, 128)
    m_cv = res.mean_risk("fblr_cv", 1, 1.0, 128)
    t_igcv = res.total_seconds("fblr")
    t_cv = res.total_seconds("fblr_cv")
    ratio = m_igcv / m_cv
    speedup = t_cv / t_igcv
    ok = ratio <= 1.5 and speedup >= 3.0
    assert _report(
        14, ok,
        f"risk ratio igcv/cv {ratio:.3f} <= 1.5; wall-time speedup {speedup:.1f}x >= 3x",
    )
