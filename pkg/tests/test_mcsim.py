"""Seeded samplers, marginal tests, trend experiments, and subsequences."""

import numpy as np
import pytest
from scipy import stats

from potkernels import (
    AR1,
    ARk,
    ExperimentConfig,
    ExpKernel,
    IdentityError,
    KilledWalk,
    MinKernel,
    RankOneUpdate,
    Window,
    analytic_median_band,
    build_kernel,
    calibration_band,
    gamma_marginal_test,
    kernel_diagonal,
    killed_walk_potential,
    limsup_experiment,
    predict,
    sample_gaussian,
    sample_permanental,
    sparse_subsequence,
)


def covariance_zscores(spec, n, seed, trials):
    """Largest standardized gap between sample and model covariance."""
    paths = sample_gaussian(spec, n, seed=seed, trials=trials).values
    U = np.asarray(build_kernel(spec, Window(0, n)).entries)
    emp = paths.T @ paths / trials
    # Var(xi_j xi_k) = U_jj U_kk + U_jk^2 for centered Gaussians
    sd = np.sqrt((np.outer(np.diag(U), np.diag(U)) + U**2) / trials)
    return np.abs(emp - U) / sd


class TestGaussianSampler:
    @pytest.mark.parametrize(
        "spec",
        [
            MinKernel(s=np.arange(1.0, 9.0)),
            ExpKernel(v=np.cumsum([0.1, 0.5, 1.2, 0.3, 0.9, 0.2, 1.5, 0.4])),
            AR1(x=np.full(7, 0.5)),
        ],
        ids=["min", "exp-varying", "ar1"],
    )
    def test_exact_covariance(self, spec):
        z = covariance_zscores(spec, 8, seed=3, trials=40_000)
        assert z.max() < 5.0

    def test_deterministic_replay(self):
        spec = AR1(x=np.full(9, 0.5))
        a = sample_gaussian(spec, 10, seed=11, trials=4).values
        b = sample_gaussian(spec, 10, seed=11, trials=4).values
        assert np.array_equal(a, b)
        c = sample_gaussian(spec, 10, seed=12, trials=4).values
        assert not np.array_equal(a, c)

    def test_killed_walk_dense_route(self):
        spec = KilledWalk(step_rates={-1: 0.5, 1: 0.5}, beta=1.0, radius=8)
        batch = sample_gaussian(spec, 17, seed=5, trials=6)
        assert batch.values.shape == (6, 17)
        with pytest.raises(ValueError):
            sample_gaussian(spec, 16, seed=5, trials=2)

    def test_asymmetric_update_refused(self):
        spec = RankOneUpdate(base=ExpKernel(v=np.arange(6.0)), k=1, l=2, b=0.5)
        with pytest.raises(ValueError):
            sample_gaussian(spec, 6, seed=1, trials=2)


class TestKernelDiagonal:
    @pytest.mark.parametrize(
        "spec",
        [
            MinKernel(s=np.arange(1.0, 13.0)),
            ExpKernel(v=np.cumsum(np.full(12, 0.4))),
            AR1(x=np.full(11, 0.5)),
            AR1(x=np.sort(np.random.default_rng(0).uniform(0.3, 0.9, 11))),
            ARk(p=(0.5, 0.25)),
            ARk(p=(1 / 3, 5 / 9, 1 / 9)),
        ],
        ids=["min", "exp", "ar1-const", "ar1-vary", "ark", "ark-drift"],
    )
    def test_matches_dense_diagonal(self, spec):
        dense = np.diag(np.asarray(build_kernel(spec, Window(0, 12)).entries))
        np.testing.assert_allclose(kernel_diagonal(spec, 12), dense, rtol=1e-12)


class TestPermanentalSampler:
    def test_zero_f_unit_alpha_half_is_squared_gaussian(self):
        spec = AR1(x=np.full(5, 0.5))
        perm = sample_permanental(spec, None, k_half=1, n=6, seed=22, trials=50)
        gauss = sample_gaussian(spec, 6, seed=22, trials=50)
        assert np.array_equal(perm.values, gauss.values**2 / 2.0)

    def test_marginal_means(self):
        spec = ExpKernel(v=np.cumsum(np.full(20, 0.3)))
        f = np.full(20, 0.8)
        batch = sample_permanental(spec, f, k_half=2, n=20, seed=9, trials=40_000)
        alpha = 1.0
        expected = alpha * (kernel_diagonal(spec, 20) + batch.a_vec**2)
        got = batch.values.mean(axis=0)
        np.testing.assert_allclose(got, expected, rtol=0.05)

    def test_values_nonnegative_and_ledger(self):
        s = np.arange(1.0, 16.0)
        spec = MinKernel(s=s)
        f = np.ones(15)
        batch = sample_permanental(spec, f, k_half=1, n=10, seed=4, trials=200, l=2)
        assert np.all(batch.values >= 0)
        assert batch.alpha == 0.5
        assert batch.rho > 0
        assert batch.sandwich is not None
        assert np.all(batch.a_vec <= np.sqrt(f[2:12]) + 1e-10)

    def test_half_integer_alpha_only(self):
        spec = AR1(x=np.full(5, 0.5))
        with pytest.raises(ValueError):
            sample_permanental(spec, None, k_half=1.5, n=6, seed=1, trials=2)


class TestGammaMarginals:
    def test_exp_kernel_passes(self):
        spec = ExpKernel(v=np.arange(30.0))
        rep = gamma_marginal_test(spec, None, 0.5, [2, 10, 30], 20_000, seed=10)
        assert rep.alpha == 0.5
        assert all(r.passed for r in rep.records)
        assert all(r.statistic < r.critical for r in rep.records)

    def test_nonzero_f_passes(self):
        spec = AR1(x=np.full(29, 0.5))
        rep = gamma_marginal_test(spec, np.ones(30), 1.0, [3, 20], 20_000, seed=10)
        assert all(r.passed for r in rep.records)

    def test_report_carries_expected_means(self):
        spec = ExpKernel(v=np.arange(30.0))
        for alpha in (0.5, 1.5):
            rep = gamma_marginal_test(spec, None, alpha, [10], 20_000, seed=10)
            rec = rep.records[0]
            assert rec.expected_mean == pytest.approx(alpha)
            assert rec.sample_mean == pytest.approx(alpha, rel=0.05)

    def test_statistic_detects_wrong_scale(self):
        # normalize by the wrong diagonal and the distance must blow past
        # the 5% critical value
        spec = ExpKernel(v=np.arange(30.0))
        batch = sample_permanental(spec, None, k_half=1, n=30, seed=10, trials=20_000)
        t = np.sort(batch.values[:, 9] / 3.0)
        from scipy.special import gammainc

        from potkernels.mcsim import KS_CRITICAL_5PCT, _ks_statistic

        stat = _ks_statistic(gammainc(0.5, t))
        assert stat > KS_CRITICAL_5PCT / np.sqrt(t.size)

    def test_rejects_non_half_integer_alpha(self):
        spec = ExpKernel(v=np.arange(10.0))
        with pytest.raises(ValueError):
            gamma_marginal_test(spec, None, 0.7, [2], 1000, seed=1)


class TestTrendExperiment:
    def test_running_max_monotone_and_deterministic(self):
        spec = ExpKernel(v=np.arange(1.0, 3001.0))
        pred = predict(spec, "zero", 0.5, gaps="separated")
        cfg = ExperimentConfig(
            spec=spec, alpha=0.5, checkpoints=(300, 3000), trials=11, seed=42
        )
        rep = limsup_experiment(cfg, pred)
        assert np.all(np.diff(rep.raw_max, axis=1) >= 0)
        phi = pred.normalizer(np.array(rep.checkpoints))
        np.testing.assert_allclose(rep.normalized, rep.raw_max / phi, rtol=1e-14)
        again = limsup_experiment(cfg, pred)
        assert np.array_equal(rep.normalized, again.normalized)

    def test_report_serialization(self):
        spec = ExpKernel(v=np.arange(1.0, 501.0))
        pred = predict(spec, "zero", 0.5, gaps="separated")
        cfg = ExperimentConfig(
            spec=spec, alpha=0.5, checkpoints=(100, 500), trials=3, seed=1
        )
        doc = limsup_experiment(cfg, pred).to_json()
        assert doc["citation"] == "trend-direction"
        assert len(doc["median"]) == 2

    def test_gaussian_lil_mode(self):
        logs = np.arange(1, 3001) * np.log(2.0)
        cfg = ExperimentConfig(
            spec=None,
            alpha=None,
            checkpoints=(300, 3000),
            trials=11,
            seed=42,
            mode="gaussian-lil",
            log_s=logs,
        )
        rep = limsup_experiment(cfg)
        assert rep.theorem == "gaussian-lil"
        assert 0.5 < rep.median[-1] < 1.4

    def test_checkpoint_validation(self):
        spec = ExpKernel(v=np.arange(1.0, 101.0))
        pred = predict(spec, "zero", 0.5, gaps="separated")
        cfg = ExperimentConfig(
            spec=spec, alpha=0.5, checkpoints=(100, 50), trials=3, seed=1
        )
        with pytest.raises(ValueError):
            limsup_experiment(cfg, pred)


class TestCalibrationBand:
    def test_band_covers_surrogate_median(self):
        # brute-force the iid Gamma(1/2) surrogate the band is built from
        n, trials, reps = 200, 5, 400
        diag = np.ones(n)
        phi = np.log(n)
        lo, hi = analytic_median_band(diag, phi, 0.5, trials, coverage=0.95)
        r = np.random.default_rng(17)
        meds = np.median(
            r.gamma(0.5, size=(reps, trials, n)).max(axis=2) / phi, axis=1
        )
        cover = np.mean((meds >= lo) & (meds <= hi))
        assert 0.90 <= cover <= 0.995

    def test_requires_odd_trials(self):
        with pytest.raises(ValueError):
            analytic_median_band(np.ones(10), 1.0, 0.5, 4)

    def test_spec_front_end(self):
        spec = ExpKernel(v=np.arange(1.0, 501.0))
        pred = predict(spec, "zero", 0.5, gaps="separated")
        lo, hi = calibration_band(spec, pred, 0.5, 500, 11)
        assert 0 < lo < hi


class TestSparseSubsequence:
    def setup_method(self):
        idx = np.arange(1, 41)
        self.M = 0.5 ** np.abs(np.subtract.outer(idx, idx))

    def test_geometric_skips_every_other(self):
        res = sparse_subsequence(self.M, 0.25, 10)
        assert res.indices == tuple(range(1, 20, 2))
        assert not res.partial
        assert res.epsilon == 0.25

    def test_partial_when_window_runs_out(self):
        res = sparse_subsequence(self.M, 0.25, 25)
        assert res.partial
        assert len(res.indices) < 25

    def test_loose_epsilon_keeps_consecutive(self):
        res = sparse_subsequence(self.M, 0.6, 10)
        assert res.indices == tuple(range(1, 11))

    def test_callable_accessor(self):
        acc = lambda i, j: 0.5 ** abs(i - j)
        res = sparse_subsequence(acc, 0.25, 5, limit=40, row_norm=3.0, col_norm=3.0)
        assert res.indices == (1, 3, 5, 7, 9)

    def test_callable_requires_norms(self):
        acc = lambda i, j: 0.5 ** abs(i - j)
        with pytest.raises(ValueError):
            sparse_subsequence(acc, 0.25, 5, limit=40)

    def test_understated_norms_break_growth_bound(self):
        acc = lambda i, j: 0.5 ** abs(i - j)
        with pytest.raises(IdentityError) as err:
            sparse_subsequence(
                acc, 0.01, 8, limit=40, row_norm=0.01, col_norm=0.01
            )
        assert err.value.key == "subsequence-growth-bound"
