import numpy as np
import pytest

from fblr.bilinear import (
    FblrConfig,
    PenaltyForms,
    PenaltyMode,
    build_forms,
    fblr_fit,
    igcv_fit,
    init_ridge_svd,
    normalize_pair,
    objective,
    penalty_j,
    predict,
    rank_r_fit,
    step_penalty_quadform,
    tilde_x,
)
from fblr.covariance import SeparableCov, excess_risk_oracle, seminorm0_quadform
from fblr.errors import (
    DegenerateIterateError,
    DegenerateStepNormError,
    PreconditionError,
)
from fblr.flr import flr_fit_ridge_form
from fblr.grids import Func1D, bilinear_batch, center_dataset, make_uniform_grid, quad_inner
from fblr.kernels import SecondDerivRoughness, cosine_covariance, rkhs_quadform
from fblr.simulate import SettingSpec, make_setting_data


def small_forms(rng, p, q):
    gs, gt = make_uniform_grid(p), make_uniform_grid(q)
    cs, _ = cosine_covariance(1.0, 2 * p, gs)
    ct, _ = cosine_covariance(1.0, 2 * q, gt)
    return gs, gt, PenaltyForms(
        m0s=seminorm0_quadform(cs, gs),
        mks=rkhs_quadform(SecondDerivRoughness(), gs),
        m0t=seminorm0_quadform(ct, gt),
        mkt=rkhs_quadform(SecondDerivRoughness(), gt),
    )


class TestPenaltyJ:
    @pytest.mark.parametrize("mode", list(PenaltyMode))
    def test_scale_invariance(self, mode):
        rng = np.random.default_rng(0)
        gs, gt, forms = small_forms(rng, 9, 7)
        a = Func1D(gs, rng.standard_normal(9))
        b = Func1D(gt, rng.standard_normal(7))
        c = 7.0
        j1 = penalty_j(a, b, 0.3, 0.05, forms, mode)
        a2 = Func1D(gs, c * a.values)
        b2 = Func1D(gt, b.values / c)
        j2 = penalty_j(a2, b2, 0.3, 0.05, forms, mode)
        assert j2 == pytest.approx(j1, rel=1e-12)

    @pytest.mark.parametrize("mode", list(PenaltyMode))
    def test_zero_tuning_values(self, mode):
        rng = np.random.default_rng(1)
        gs, gt, forms = small_forms(rng, 6, 6)
        a = Func1D(gs, rng.standard_normal(6))
        b = Func1D(gt, rng.standard_normal(6))
        assert penalty_j(a, b, 0.0, 0.0, forms, mode) == 0.0

    def test_decoupling_identity(self):
        rng = np.random.default_rng(2)
        gs, gt, forms = small_forms(rng, 8, 10)
        for _ in range(100):
            a = Func1D(gs, rng.standard_normal(8))
            b = Func1D(gt, rng.standard_normal(10))
            la, lb = 10.0 ** rng.uniform(-6, 1, size=2)
            a0 = forms.m0s.value(a)
            ak = forms.mks.value(a)
            b0 = forms.m0t.value(b)
            bk = forms.mkt.value(b)
            lhs = a0 * b0 + penalty_j(a, b, la, lb, forms, PenaltyMode.CANDIDATE3)
            rhs = (a0 + la * ak) * (b0 + lb * bk)
            assert lhs == pytest.approx(rhs, rel=1e-12)


class TestObjective:
    def _dataset(self, rng, p=6, q=6, n=4):
        gs, gt = make_uniform_grid(p), make_uniform_grid(q)
        x = rng.standard_normal((n, p, q))
        y = rng.standard_normal(n)
        return center_dataset(x, y, gs, gt)

    def test_zero_alpha_gives_mean_square(self):
        rng = np.random.default_rng(3)
        ds = self._dataset(rng)
        _, _, forms = small_forms(rng, 6, 6)
        a = Func1D(ds.s_grid, np.zeros(6))
        b = Func1D(ds.t_grid, rng.standard_normal(6))
        for mode in PenaltyMode:
            val = objective(a, b, ds, 0.4, 0.2, forms, mode)
            assert val == pytest.approx(float(ds.y @ ds.y) / ds.n, rel=1e-12)

    def test_noiseless_truth_at_zero_penalty(self):
        rng = np.random.default_rng(4)
        gs, gt, forms = small_forms(rng, 6, 6)
        a0 = Func1D(gs, rng.standard_normal(6))
        b0 = Func1D(gt, rng.standard_normal(6))
        x = rng.standard_normal((5, 6, 6))
        y = bilinear_batch(a0, x, b0)
        ds = center_dataset(x, y, gs, gt)
        # evaluate at the truth of the centered model
        val = objective(a0, b0, ds, 0.0, 0.0, forms)
        assert val <= 1e-10

    def test_matches_double_loop(self):
        rng = np.random.default_rng(5)
        ds = self._dataset(rng)
        _, _, forms = small_forms(rng, 6, 6)
        a = Func1D(ds.s_grid, rng.standard_normal(6))
        b = Func1D(ds.t_grid, rng.standard_normal(6))
        la, lb = 0.07, 0.003
        ws, wt = ds.s_grid.weights, ds.t_grid.weights
        loss = 0.0
        for i in range(ds.n):
            acc = 0.0
            for j in range(6):
                for k in range(6):
                    acc += ws[j] * a.values[j] * ds.x[i, j, k] * wt[k] * b.values[k]
            loss += (ds.y[i] - acc) ** 2
        want = loss / ds.n + penalty_j(a, b, la, lb, forms, PenaltyMode.CANDIDATE3)
        got = objective(a, b, ds, la, lb, forms, PenaltyMode.CANDIDATE3)
        assert got == pytest.approx(want, rel=1e-10)


class TestStepPenalty:
    def test_zero_form_raises(self):
        rng = np.random.default_rng(6)
        gs, gt, forms = small_forms(rng, 6, 6)
        fixed = Func1D(gs, rng.standard_normal(6))
        with pytest.raises(DegenerateStepNormError):
            step_penalty_quadform(
                fixed, 0.0, 0.0, forms.m0s, forms.mks, forms.m0t, forms.mkt
            )

    def test_roughness_free_fixed_function(self):
        # a constant has zero roughness: only the free kernel term survives
        rng = np.random.default_rng(7)
        gs, gt, forms = small_forms(rng, 6, 8)
        fixed = Func1D(gs, np.full(6, 2.0))
        lam_fixed, lam_free = 0.3, 0.11
        out = step_penalty_quadform(
            fixed, lam_fixed, lam_free, forms.m0s, forms.mks, forms.m0t, forms.mkt
        )
        want = lam_free * forms.m0s.value(fixed) * forms.mkt.m_matrix
        np.testing.assert_allclose(out.m_matrix, want, atol=1e-12 * np.max(np.abs(want)))

    def test_hand_assembled_coefficients(self):
        rng = np.random.default_rng(8)
        gs, gt, forms = small_forms(rng, 7, 5)
        fixed = Func1D(gs, rng.standard_normal(7))
        la, lb = 0.02, 0.9
        out = step_penalty_quadform(
            fixed, la, lb, forms.m0s, forms.mks, forms.m0t, forms.mkt
        )
        n0 = float(fixed.values @ forms.m0s.m_matrix @ fixed.values)
        nk = float(fixed.values @ forms.mks.m_matrix @ fixed.values)
        want = (la * nk) * forms.m0t.m_matrix + (lb * n0 + la * lb * nk) * forms.mkt.m_matrix
        np.testing.assert_allclose(out.m_matrix, want, rtol=1e-12)

    def test_one_way_specialization(self):
        # default candidate with the free-side tuning at zero keeps only the
        # covariance form scaled by the fixed block's kernel norm
        rng = np.random.default_rng(9)
        gs, gt, forms = small_forms(rng, 6, 6)
        fixed = Func1D(gs, rng.standard_normal(6))
        out = step_penalty_quadform(
            fixed, 0.25, 0.0, forms.m0s, forms.mks, forms.m0t, forms.mkt
        )
        want = 0.25 * forms.mks.value(fixed) * forms.m0t.m_matrix
        np.testing.assert_allclose(out.m_matrix, want, atol=1e-12 * np.max(np.abs(want)))


class TestTildeX:
    def test_outer_product(self):
        rng = np.random.default_rng(10)
        gs, gt = make_uniform_grid(6), make_uniform_grid(9)
        u = rng.standard_normal(6)
        v = rng.standard_normal(9)
        x = np.stack([np.outer(u, v), np.outer(2 * u, v)])
        ds = center_dataset(x, [0.0, 1.0], gs, gt)
        a = Func1D(gs, rng.standard_normal(6))
        lines = tilde_x(a, ds)
        # centered covariates are -+ 0.5 u v'; the contraction separates
        want = quad_inner(a, Func1D(gs, u)) * v
        np.testing.assert_allclose(lines[1] - lines[0], want, rtol=1e-10)
        np.testing.assert_allclose(lines[0], -0.5 * want, rtol=1e-10)

    def test_zero_alpha(self):
        rng = np.random.default_rng(11)
        gs, gt = make_uniform_grid(5), make_uniform_grid(4)
        ds = center_dataset(rng.standard_normal((3, 5, 4)), rng.standard_normal(3), gs, gt)
        lines = tilde_x(Func1D(gs, np.zeros(5)), ds)
        assert np.all(lines == 0.0)

    def test_matches_double_loop(self):
        rng = np.random.default_rng(12)
        gs, gt = make_uniform_grid(6), make_uniform_grid(6)
        ds = center_dataset(rng.standard_normal((4, 6, 6)), rng.standard_normal(4), gs, gt)
        a = Func1D(gs, rng.standard_normal(6))
        lines = tilde_x(a, ds)
        for i in range(4):
            for k in range(6):
                want = sum(
                    gs.weights[j] * a.values[j] * ds.x[i, j, k] for j in range(6)
                )
                assert lines[i, k] == pytest.approx(want, abs=1e-12)


class TestInitRidgeSvd:
    def test_recovers_rank_one_direction(self):
        sd = make_setting_data(SettingSpec.from_id(1, 1.0, n=200, seed=77, sigma=0.0, grid_len=30))
        a0, fallback = init_ridge_svd(sd.data)
        truth = sd.truth.alpha0.values
        corr = abs(np.corrcoef(a0.values, truth)[0, 1])
        assert not fallback
        assert corr > 0.9

    def test_zero_response_falls_back(self):
        rng = np.random.default_rng(13)
        gs = make_uniform_grid(5)
        ds = center_dataset(rng.standard_normal((6, 5, 5)), np.zeros(6), gs, gs)
        a0, fallback = init_ridge_svd(ds)
        assert fallback
        np.testing.assert_array_equal(a0.values, np.ones(5))

    def test_tiny_ridge_matches_least_squares(self):
        rng = np.random.default_rng(14)
        gs = make_uniform_grid(4)
        x = rng.standard_normal((30, 4, 4))
        y = rng.standard_normal(30)
        ds = center_dataset(x, y, gs, gs)
        design = (ds.x * gs.weights[:, None] * gs.weights[None, :]).reshape(30, -1)
        b_ls, *_ = np.linalg.lstsq(design, ds.y, rcond=None)
        u_ls, _, _ = np.linalg.svd(b_ls.reshape(4, 4), full_matrices=False)
        a0, _ = init_ridge_svd(ds, ridge_grid=[1e-14])
        direction = u_ls[:, 0]
        if direction[np.argmax(np.abs(direction))] < 0:
            direction = -direction
        np.testing.assert_allclose(a0.values, direction, atol=1e-5)


class TestNormalizePair:
    def test_scaled_pairs_normalize_identically(self):
        rng = np.random.default_rng(15)
        g = make_uniform_grid(7)
        a = Func1D(g, rng.standard_normal(7))
        b = Func1D(g, rng.standard_normal(7))
        na1, nb1 = normalize_pair(a, b)
        na2, nb2 = normalize_pair(Func1D(g, 2 * a.values), Func1D(g, b.values / 2))
        np.testing.assert_allclose(na1.values, na2.values, atol=1e-12)
        np.testing.assert_allclose(nb1.values, nb2.values, atol=1e-12)

    def test_fixed_point(self):
        rng = np.random.default_rng(16)
        g = make_uniform_grid(6)
        a, b = normalize_pair(
            Func1D(g, rng.standard_normal(6)), Func1D(g, rng.standard_normal(6))
        )
        a2, b2 = normalize_pair(a, b)
        np.testing.assert_allclose(a2.values, a.values, atol=1e-14)
        np.testing.assert_allclose(b2.values, b.values, atol=1e-14)
        assert quad_inner(a, a) == pytest.approx(1.0, abs=1e-10)
        assert a.values[np.argmax(np.abs(a.values))] > 0

    def test_product_unchanged(self):
        rng = np.random.default_rng(17)
        g = make_uniform_grid(8)
        a = Func1D(g, rng.standard_normal(8))
        b = Func1D(g, rng.standard_normal(8))
        na, nb = normalize_pair(a, b)
        np.testing.assert_allclose(
            np.outer(na.values, nb.values), np.outer(a.values, b.values), atol=1e-12
        )

    def test_zero_input(self):
        g = make_uniform_grid(4)
        with pytest.raises(DegenerateIterateError):
            normalize_pair(Func1D(g, np.zeros(4)), Func1D(g, np.ones(4)))


def tiny_setting(n=64, grid_len=20, sigma=0.5, seed=5):
    return make_setting_data(
        SettingSpec.from_id(1, 1.0, n=n, seed=seed, sigma=sigma, grid_len=grid_len)
    )


class TestFblrFit:
    def test_noiseless_recovery(self):
        sd = tiny_setting(n=64, grid_len=24, sigma=0.0)
        cfg = FblrConfig(lambda_alpha=1e-8, lambda_beta=1e-8, covariance=sd.cov_true)
        fit = fblr_fit(sd.data, cfg)
        risk = excess_risk_oracle(
            fit.coefficient_field() - sd.truth.b_field, sd.cov_true,
            sd.data.s_grid, sd.data.t_grid,
        )
        assert risk < 1e-3 * sd.null_risk

    def test_objective_trace_nonincreasing(self):
        sd = tiny_setting()
        cfg = FblrConfig(lambda_alpha=1e-6, lambda_beta=1e-6, covariance=sd.cov_true)
        fit = fblr_fit(sd.data, cfg)
        tr = fit.objective_trace
        assert np.all(tr[1:] <= tr[:-1] * (1 + 1e-9) + 1e-12 * tr[0])

    def test_invariant_to_initializer_scale(self):
        sd = tiny_setting()
        cfg = FblrConfig(lambda_alpha=1e-6, lambda_beta=1e-6, covariance=sd.cov_true)
        a0, _ = init_ridge_svd(sd.data, cfg.lambda_grid)
        fit1 = fblr_fit(sd.data, cfg, alpha_init=a0)
        scaled = Func1D(a0.grid, 13.7 * a0.values)
        fit2 = fblr_fit(sd.data, cfg, alpha_init=scaled)
        np.testing.assert_allclose(fit1.alpha_hat.values, fit2.alpha_hat.values, atol=1e-8)
        np.testing.assert_allclose(fit1.beta_hat.values, fit2.beta_hat.values, atol=1e-8)

    def test_beta_step_matches_dense_quadratic_oracle(self):
        rng = np.random.default_rng(18)
        gs, gt, forms = small_forms(rng, 8, 8)
        ds = center_dataset(rng.standard_normal((6, 8, 8)), rng.standard_normal(6), gs, gt)
        alpha = Func1D(gs, rng.standard_normal(8))
        la, lb = 1e-3, 1e-4
        pen = step_penalty_quadform(alpha, la, lb, forms.m0s, forms.mks, forms.m0t, forms.mkt)
        lines = tilde_x(alpha, ds)
        fit = flr_fit_ridge_form(lines, ds.y, gt, pen)
        # independent assembly of the normal equations
        wt = gt.weights
        q = np.zeros((8, 8))
        b = np.zeros(8)
        for i in range(6):
            wx = wt * lines[i]
            q += np.outer(wx, wx) / 6
            b += ds.y[i] * wx / 6
        beta_oracle = np.linalg.solve(q + pen.m_matrix, b)
        np.testing.assert_allclose(fit.coef.values, beta_oracle, atol=1e-8)

    def test_alpha_step_reduces_to_one_way_fit(self):
        # with beta frozen, one alpha half-step is exactly a one-way fit on
        # the contracted column functions with the induced penalty
        rng = np.random.default_rng(19)
        gs, gt, forms = small_forms(rng, 7, 6)
        ds = center_dataset(rng.standard_normal((9, 7, 6)), rng.standard_normal(9), gs, gt)
        beta = Func1D(gt, rng.standard_normal(6))
        la, lb = 2e-4, 5e-3
        lines = np.einsum("q,npq->np", gt.weights * beta.values, ds.x)
        n0 = float(beta.values @ forms.m0t.m_matrix @ beta.values)
        nk = float(beta.values @ forms.mkt.m_matrix @ beta.values)
        pen_mat = (lb * nk) * forms.m0s.m_matrix + (la * n0 + la * lb * nk) * forms.mks.m_matrix
        from fblr.grids import QuadForm

        direct = flr_fit_ridge_form(lines, ds.y, gs, QuadForm(gs, pen_mat))
        from fblr.bilinear import _HalfStep

        step = _HalfStep(ds, forms, PenaltyMode.CANDIDATE3, "s", 0.0)
        via_step = step.solve(beta, lb, la)
        np.testing.assert_allclose(via_step.coef.values, direct.coef.values, atol=1e-8)

    def test_zero_tuning_raises(self):
        sd = tiny_setting(n=32, grid_len=12)
        cfg = FblrConfig(lambda_alpha=0.0, lambda_beta=0.0, covariance=sd.cov_true)
        with pytest.raises(DegenerateStepNormError):
            fblr_fit(sd.data, cfg)

    def test_tune_marker_rejected(self):
        sd = tiny_setting(n=16, grid_len=10)
        with pytest.raises(ValueError):
            fblr_fit(sd.data, FblrConfig(covariance=sd.cov_true))

    def test_requires_centered_data(self):
        from fblr.grids import TwoWayDataset

        g = make_uniform_grid(6)
        ds = TwoWayDataset(
            s_grid=g, t_grid=g, x=np.zeros((4, 6, 6)), y=np.zeros(4),
            centered=False, x_mean=np.zeros((6, 6)), y_mean=0.0,
        )
        cfg = FblrConfig(lambda_alpha=1e-4, lambda_beta=1e-4,
                         covariance=SeparableCov(np.eye(6), np.eye(6)))
        with pytest.raises(PreconditionError):
            fblr_fit(ds, cfg)


class TestIgcvFit:
    def test_singleton_grid_equals_fixed_fit(self):
        sd = tiny_setting()
        lam = 3e-6
        tuned = igcv_fit(
            sd.data,
            FblrConfig(lambda_grid=np.array([lam]), covariance=sd.cov_true),
        )
        fixed = fblr_fit(
            sd.data,
            FblrConfig(lambda_alpha=lam, lambda_beta=lam,
                       lambda_grid=np.array([lam]), covariance=sd.cov_true),
        )
        np.testing.assert_array_equal(tuned.alpha_hat.values, fixed.alpha_hat.values)
        np.testing.assert_array_equal(tuned.beta_hat.values, fixed.beta_hat.values)
        assert tuned.lambda_alpha == fixed.lambda_alpha == lam

    def test_deterministic(self):
        sd1 = tiny_setting(seed=8)
        sd2 = tiny_setting(seed=8)
        cfg = FblrConfig(covariance=sd1.cov_true)
        f1 = igcv_fit(sd1.data, cfg)
        f2 = igcv_fit(sd2.data, cfg)
        np.testing.assert_array_equal(f1.alpha_hat.values, f2.alpha_hat.values)
        np.testing.assert_array_equal(f1.beta_hat.values, f2.beta_hat.values)
        assert (f1.lambda_alpha, f1.lambda_beta) == (f2.lambda_alpha, f2.lambda_beta)

    def test_mixed_fixed_and_tuned(self):
        sd = tiny_setting()
        cfg = FblrConfig(lambda_alpha=1e-6, lambda_beta="tune", covariance=sd.cov_true)
        fit = igcv_fit(sd.data, cfg)
        assert fit.lambda_alpha == 1e-6
        assert fit.lambda_beta in FblrConfig().lambda_grid


class TestRankR:
    def test_single_stage_equals_igcv(self):
        sd = tiny_setting()
        cfg = FblrConfig(covariance=sd.cov_true)
        rr = rank_r_fit(sd.data, 1, cfg)
        solo = igcv_fit(sd.data, cfg)
        np.testing.assert_array_equal(rr.b_field, solo.coefficient_field())

    def test_training_rss_nonincreasing(self):
        sd = tiny_setting(n=96)
        cfg = FblrConfig(covariance=sd.cov_true)
        rr = rank_r_fit(sd.data, 3, cfg)
        resid = sd.data.y.copy()
        rss = [float(resid @ resid)]
        for fit in rr.fits:
            resid = resid - bilinear_batch(fit.alpha_hat, sd.data.x, fit.beta_hat)
            resid = resid - resid.mean()
            rss.append(float(resid @ resid))
        for a, b in zip(rss, rss[1:]):
            assert b <= a * (1 + 1e-9) + 1e-12 * rss[0]

    def test_needs_positive_rank(self):
        sd = tiny_setting(n=16, grid_len=10)
        with pytest.raises(ValueError):
            rank_r_fit(sd.data, 0, FblrConfig(covariance=sd.cov_true))


class TestPredict:
    def test_mean_field_maps_to_intercept(self):
        sd = tiny_setting()
        cfg = FblrConfig(lambda_alpha=1e-6, lambda_beta=1e-6, covariance=sd.cov_true)
        fit = fblr_fit(sd.data, cfg)
        assert predict(fit, fit.x_mean) == pytest.approx(fit.mu_hat, abs=1e-12)

    def test_batch_matches_singles(self):
        rng = np.random.default_rng(20)
        sd = tiny_setting()
        cfg = FblrConfig(lambda_alpha=1e-6, lambda_beta=1e-6, covariance=sd.cov_true)
        fit = fblr_fit(sd.data, cfg)
        xs = rng.standard_normal((5, 20, 20))
        batch = predict(fit, xs)
        singles = [predict(fit, xs[i]) for i in range(5)]
        np.testing.assert_allclose(batch, singles, rtol=1e-13)

    def test_training_reconstruction_noiseless(self):
        sd = tiny_setting(n=64, grid_len=24, sigma=0.0)
        cfg = FblrConfig(lambda_alpha=1e-10, lambda_beta=1e-10, covariance=sd.cov_true)
        fit = fblr_fit(sd.data, cfg)
        raw_x = sd.data.x + sd.data.x_mean
        raw_y = sd.data.y + sd.data.y_mean
        preds = predict(fit, raw_x)
        scale = float(np.max(np.abs(raw_y)))
        assert np.max(np.abs(preds - raw_y)) < 1e-3 * scale
