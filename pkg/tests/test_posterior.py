"""Tests for conjugate capacity and detection posteriors."""

import numpy as np
import pytest
import scipy.stats

from postfeas.errors import (
    CountOutOfRange,
    DimensionMismatch,
    DomainError,
    EmptyInput,
    RankDeficient,
    SingularPrecision,
)
from postfeas.posterior import (
    BetaPosteriorMatrix,
    NigPrior,
    OlsFit,
    PredictiveT,
    fit_beta_binomial,
    fit_nig,
    fit_ols,
    load_panel_data,
    ols_predictive_quantile,
    predictive,
    predictive_array,
    predictive_quantile,
    q_matrix_draws,
    sample_predictive,
    sample_q_matrix,
)
from postfeas.stats import Rng


def make_regression(gen, n, d, sigma=0.7):
    """Synthetic linear data with an intercept column."""
    design = np.column_stack([np.ones(n), gen.uniform(-1.0, 1.0, (n, d - 1))])
    beta = gen.normal(0.0, 1.0, d)
    y = design @ beta + sigma * gen.standard_normal(n)
    return design, y, beta, sigma


class TestFitNig:
    def test_empty_data_returns_prior(self):
        prior = NigPrior.default(3)
        post = fit_nig(np.zeros((0, 3)), np.zeros(0), prior)
        assert post.n_obs == 0
        assert np.array_equal(post.mean, prior.mean)
        assert np.array_equal(post.precision, prior.precision)
        assert post.shape == prior.shape
        assert post.rate == prior.rate

    def test_closed_form_against_direct_inverse(self):
        gen = np.random.default_rng(11)
        design, y, _, _ = make_regression(gen, 25, 4)
        prior = NigPrior(
            mean=gen.normal(size=4),
            precision=np.diag(gen.uniform(0.5, 2.0, 4)),
            shape=3.0,
            rate=1.5,
        )
        post = fit_nig(design, y, prior)
        lam_n = prior.precision + design.T @ design
        m_n = np.linalg.solve(lam_n, prior.precision @ prior.mean + design.T @ y)
        assert np.allclose(post.precision, lam_n, rtol=0.0, atol=1e-12)
        assert np.allclose(post.mean, m_n, rtol=0.0, atol=1e-10)
        assert post.shape == prior.shape + 12.5
        rate_text = prior.rate + 0.5 * (
            y @ y + prior.mean @ prior.precision @ prior.mean - m_n @ lam_n @ m_n
        )
        assert abs(post.rate - rate_text) <= 1e-8

    def test_stable_rate_matches_textbook_form(self):
        gen = np.random.default_rng(12)
        for _ in range(20):
            n = int(gen.integers(5, 60))
            d = int(gen.integers(1, 5))
            design, y, _, _ = make_regression(gen, n, max(d, 2))
            prior = NigPrior(
                mean=gen.normal(size=design.shape[1]),
                precision=np.diag(gen.uniform(0.1, 3.0, design.shape[1])),
                shape=float(gen.uniform(0.5, 4.0)),
                rate=float(gen.uniform(0.5, 4.0)),
            )
            post = fit_nig(design, y, prior)
            lam_n = prior.precision + design.T @ design
            m_n = np.linalg.solve(
                lam_n, prior.precision @ prior.mean + design.T @ y
            )
            textbook = prior.rate + 0.5 * (
                y @ y
                + prior.mean @ prior.precision @ prior.mean
                - m_n @ lam_n @ m_n
            )
            assert abs(post.rate - textbook) <= 1e-8

    def test_rate_positive_on_random_data(self):
        gen = np.random.default_rng(13)
        for _ in range(50):
            n = int(gen.integers(1, 40))
            design = gen.normal(size=(n, 3))
            y = gen.normal(scale=5.0, size=n)
            post = fit_nig(design, y, NigPrior.default(3))
            assert post.rate > 0.0

    def test_flat_prior_limit_recovers_ols(self):
        gen = np.random.default_rng(14)
        design, y, _, _ = make_regression(gen, 80, 4)
        prior = NigPrior(
            mean=np.zeros(4), precision=1e-10 * np.eye(4), shape=2.0, rate=2.0
        )
        post = fit_nig(design, y, prior)
        fit = fit_ols(design, y)
        assert np.max(np.abs(post.mean - fit.coef)) <= 1e-6

    def test_two_stage_update_equals_batch(self):
        gen = np.random.default_rng(15)
        design, y, _, _ = make_regression(gen, 48, 3)
        prior = NigPrior(
            mean=gen.normal(size=3),
            precision=np.diag(gen.uniform(0.5, 2.0, 3)),
            shape=2.5,
            rate=1.2,
        )
        stage1 = fit_nig(design[:20], y[:20], prior)
        mid = NigPrior(
            mean=stage1.mean,
            precision=stage1.precision,
            shape=stage1.shape,
            rate=stage1.rate,
        )
        stage2 = fit_nig(design[20:], y[20:], mid)
        batch = fit_nig(design, y, prior)
        assert np.allclose(stage2.mean, batch.mean, rtol=0.0, atol=1e-10)
        assert np.allclose(stage2.precision, batch.precision, rtol=0.0, atol=1e-10)
        assert abs(stage2.shape - batch.shape) <= 1e-10
        assert abs(stage2.rate - batch.rate) <= 1e-10

    def test_posterior_precision_dominates_prior(self):
        gen = np.random.default_rng(16)
        design, y, _, _ = make_regression(gen, 30, 4)
        prior = NigPrior.default(4)
        post = fit_nig(design, y, prior)
        gap_eigs = np.linalg.eigvalsh(post.precision - prior.precision)
        assert np.min(gap_eigs) >= -1e-10
        assert post.shape == prior.shape + 15.0

    def test_indefinite_prior_precision_rejected(self):
        prior = NigPrior(
            mean=np.zeros(2),
            precision=np.array([[1.0, 2.0], [2.0, 1.0]]),
            shape=2.0,
            rate=2.0,
        )
        with pytest.raises(SingularPrecision):
            fit_nig(np.zeros((0, 2)), np.zeros(0), prior)

    def test_dimension_and_domain_errors(self):
        prior = NigPrior.default(3)
        with pytest.raises(DimensionMismatch):
            fit_nig(np.zeros(4), np.zeros(4), prior)
        with pytest.raises(DimensionMismatch):
            fit_nig(np.zeros((4, 3)), np.zeros(5), prior)
        with pytest.raises(DimensionMismatch):
            fit_nig(np.zeros((4, 2)), np.zeros(4), prior)
        bad = NigPrior(mean=np.zeros(3), precision=np.eye(3), shape=0.0, rate=2.0)
        with pytest.raises(DomainError):
            fit_nig(np.zeros((4, 3)), np.zeros(4), bad)


class TestPredictive:
    def fitted(self, seed=21, n=40):
        gen = np.random.default_rng(seed)
        design, y, _, _ = make_regression(gen, n, 3)
        post = fit_nig(design, y, NigPrior.default(3))
        x_ctx = np.array([1.0, 0.3, -0.4])
        return post, x_ctx

    def test_closed_form_fields(self):
        post, x = self.fitted()
        pred = predictive(post, x)
        lev = x @ np.linalg.solve(post.precision, x)
        assert pred.dof == 2.0 * post.shape
        assert abs(pred.loc - x @ post.mean) <= 1e-12
        expect = np.sqrt(post.rate / post.shape * (1.0 + lev))
        assert abs(pred.scale - expect) <= 1e-12 * expect

    def test_median_equals_loc(self):
        post, x = self.fitted()
        pred = predictive(post, x)
        assert predictive_quantile(pred, 0.5) == pytest.approx(pred.loc, abs=1e-12)

    def test_quantile_strictly_increasing(self):
        pred = PredictiveT(dof=7.0, loc=2.0, scale=1.5)
        ps = np.linspace(0.02, 0.98, 25)
        qs = np.array([predictive_quantile(pred, p) for p in ps])
        assert np.all(np.diff(qs) > 0.0)

    def test_sampler_matches_quantile(self):
        pred = PredictiveT(dof=9.0, loc=-1.0, scale=2.0)
        draws = predictive_array(pred, Rng.for_purpose(77, "pred-draws"), 10**5)
        q05 = predictive_quantile(pred, 0.05)
        emp = np.quantile(draws, 0.05)
        dens = scipy.stats.t.pdf((q05 - pred.loc) / pred.scale, 9.0) / pred.scale
        se = np.sqrt(0.05 * 0.95 / draws.size) / dens
        assert abs(emp - q05) <= 3.0 * se
        frac = np.mean(draws <= q05)
        assert abs(frac - 0.05) <= 3.0 * np.sqrt(0.05 * 0.95 / draws.size)

    def test_single_draw_reproducible(self):
        pred = PredictiveT(dof=5.0, loc=0.5, scale=1.1)
        rng = Rng.for_purpose(3, "one-draw")
        first = sample_predictive(pred, rng)
        again = sample_predictive(pred, rng.clone())
        assert first == again

    def test_large_sample_scale_limit(self):
        gen = np.random.default_rng(22)
        n, sigma = 10_000, 1.3
        design, y, _, _ = make_regression(gen, n, 3, sigma=sigma)
        post = fit_nig(design, y, NigPrior.default(3))
        x = np.array([1.0, 0.2, -0.5])
        lev = x @ np.linalg.solve(design.T @ design, x)
        target = sigma * np.sqrt(1.0 + lev)
        pred = predictive(post, x)
        assert abs(pred.scale - target) <= 0.02 * target

    def test_scale_decreases_with_data(self):
        # The context sits far outside the covariate cloud so the shrinking
        # leverage term dominates the noise in the variance estimate.
        gen = np.random.default_rng(23)
        design, y, _, _ = make_regression(gen, 2000, 3)
        x = np.array([1.0, 10.0, 10.0])
        scales = []
        for n in (20, 80, 320, 1280):
            post = fit_nig(design[:n], y[:n], NigPrior.default(3))
            scales.append(predictive(post, x).scale)
        assert np.all(np.diff(scales) < 0.0)

    def test_context_shape_checked(self):
        post, _ = self.fitted()
        with pytest.raises(DimensionMismatch):
            predictive(post, np.zeros(5))

    def test_quantile_domain(self):
        pred = PredictiveT(dof=4.0, loc=0.0, scale=1.0)
        for p in (-0.1, 0.0, 1.0, 1.3):
            with pytest.raises(DomainError):
                predictive_quantile(pred, p)


class TestOls:
    def test_exact_fit_collapses_interval(self):
        design = np.array(
            [[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0], [1.0, 4.0]]
        )
        y = design @ np.array([2.0, -3.0])
        fit = fit_ols(design, y)
        assert fit.s2 <= 1e-24
        x = np.array([1.0, 2.5])
        loc = float(x @ fit.coef)
        for p in (0.01, 0.5, 0.99):
            assert abs(ols_predictive_quantile(fit, x, p) - loc) <= 1e-10

    def test_median_is_point_prediction(self):
        gen = np.random.default_rng(31)
        design, y, _, _ = make_regression(gen, 50, 4)
        fit = fit_ols(design, y)
        x = np.array([1.0, 0.4, -0.2, 0.1])
        assert ols_predictive_quantile(fit, x, 0.5) == pytest.approx(
            float(x @ fit.coef), abs=1e-10
        )

    def test_residual_dof(self):
        gen = np.random.default_rng(32)
        design, y, _, _ = make_regression(gen, 90, 6)
        fit = fit_ols(design, y)
        assert fit.dof_resid == 84

    def test_closed_form_against_lstsq(self):
        gen = np.random.default_rng(33)
        design, y, _, _ = make_regression(gen, 40, 5)
        fit = fit_ols(design, y)
        ref, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
        assert np.allclose(fit.coef, ref, rtol=0.0, atol=1e-10)
        resid = y - design @ ref
        assert fit.s2 == pytest.approx(resid @ resid / 35.0, rel=1e-12)
        assert np.allclose(
            fit.xtx_inv, np.linalg.inv(design.T @ design), rtol=0.0, atol=1e-10
        )

    def test_lower_prediction_quantile_calibration(self):
        gen = np.random.default_rng(34)
        n, d, reps = 30, 3, 2000
        hits = 0
        for _ in range(reps):
            design = np.column_stack(
                [np.ones(n), gen.uniform(-1.0, 1.0, (n, d - 1))]
            )
            beta = gen.normal(0.0, 1.0, d)
            sigma = float(gen.uniform(0.5, 2.0))
            y = design @ beta + sigma * gen.standard_normal(n)
            fit = fit_ols(design, y)
            x_new = np.array([1.0, *gen.uniform(-1.0, 1.0, d - 1)])
            y_new = float(x_new @ beta + sigma * gen.standard_normal())
            if y_new < ols_predictive_quantile(fit, x_new, 0.05):
                hits += 1
        assert abs(hits / reps - 0.05) <= 0.015

    def test_rank_errors(self):
        with pytest.raises(RankDeficient):
            fit_ols(np.ones((3, 3)), np.zeros(3))
        dup = np.column_stack([np.ones(10), np.arange(10.0), np.arange(10.0)])
        with pytest.raises(RankDeficient):
            fit_ols(dup, np.zeros(10))

    def test_dimension_errors(self):
        fit = OlsFit(
            coef=np.zeros(3), s2=1.0, xtx_inv=np.eye(3), dof_resid=5
        )
        with pytest.raises(DimensionMismatch):
            ols_predictive_quantile(fit, np.zeros(2), 0.5)
        with pytest.raises(DimensionMismatch):
            fit_ols(np.zeros((4, 2)), np.zeros(3))


class TestBetaBinomial:
    def test_no_data_returns_prior(self):
        post = fit_beta_binomial(np.zeros((1, 2)), np.zeros(1))
        assert np.array_equal(post.a, np.ones((1, 2)))
        assert np.array_equal(post.b, np.ones((1, 2)))

    def test_saturated_cluster_cell(self):
        post = fit_beta_binomial(np.array([[480.0]]), np.array([480.0]))
        assert post.a[0, 0] == 481.0
        assert post.b[0, 0] == 1.0

    def test_update_arithmetic(self):
        detected = np.array([[3.0, 0.0], [7.0, 5.0]])
        sizes = np.array([10.0, 12.0])
        post = fit_beta_binomial(detected, sizes, a0=2.0, b0=0.5)
        assert np.array_equal(post.a, 2.0 + detected)
        assert np.array_equal(post.b, 0.5 + sizes[:, None] - detected)

    def test_posterior_mean_matches_monte_carlo(self):
        post = fit_beta_binomial(np.array([[2.0]]), np.array([6.0]))
        a, b = post.a[0, 0], post.b[0, 0]
        exact = a / (a + b)
        rng = Rng.for_purpose(99, "beta-mean")
        draws = rng.generator.beta(a, b, size=10**6)
        se = np.sqrt(a * b / ((a + b) ** 2 * (a + b + 1.0)) / draws.size)
        assert abs(draws.mean() - exact) <= 3.0 * se

    def test_mean_between_prior_and_empirical(self):
        gen = np.random.default_rng(41)
        for a0, b0 in ((1.0, 1.0), (2.0, 6.0)):
            n = gen.integers(2, 200, size=(8,)).astype(float)
            s = np.column_stack(
                [gen.integers(1, int(v), size=3) for v in n]
            ).T.astype(float)
            post = fit_beta_binomial(s, n, a0=a0, b0=b0)
            prior_mean = a0 / (a0 + b0)
            post_mean = post.a / (post.a + post.b)
            emp = s / n[:, None]
            lo = np.minimum(prior_mean, emp)
            hi = np.maximum(prior_mean, emp)
            inner = (s > 0) & (s < n[:, None]) & (np.abs(emp - prior_mean) > 1e-9)
            assert np.all(post_mean[inner] > lo[inner])
            assert np.all(post_mean[inner] < hi[inner])

    def test_count_and_domain_errors(self):
        with pytest.raises(CountOutOfRange):
            fit_beta_binomial(np.array([[5.0]]), np.array([4.0]))
        with pytest.raises(CountOutOfRange):
            fit_beta_binomial(np.array([[-1.0]]), np.array([4.0]))
        with pytest.raises(CountOutOfRange):
            fit_beta_binomial(np.array([[0.0]]), np.array([-1.0]))
        with pytest.raises(DomainError):
            fit_beta_binomial(np.array([[1.0]]), np.array([4.0]), a0=0.0)
        with pytest.raises(DimensionMismatch):
            fit_beta_binomial(np.array([1.0, 2.0]), np.array([4.0]))
        with pytest.raises(DimensionMismatch):
            fit_beta_binomial(np.array([[1.0]]), np.array([4.0, 5.0]))


class TestQMatrixSampling:
    def posterior(self, j=40, k=50):
        return BetaPosteriorMatrix(
            a=np.ones((j, k)),
            b=np.ones((j, k)),
            cluster_sizes=np.zeros(j),
            detection_counts=np.zeros((j, k)),
        )

    def test_entries_in_unit_interval(self):
        post = fit_beta_binomial(
            np.array([[3.0, 0.0], [7.0, 5.0]]), np.array([10.0, 12.0])
        )
        q = sample_q_matrix(post, Rng.for_purpose(5, "q"))
        assert q.shape == (2, 2)
        assert np.all((q > 0.0) & (q < 1.0))

    def test_uniform_prior_is_uniform(self):
        q = sample_q_matrix(self.posterior(), Rng.for_purpose(6, "q-unif"))
        flat = np.sort(q.ravel())
        n = flat.size
        grid = np.arange(1, n + 1) / n
        dist = np.max(
            np.maximum(np.abs(grid - flat), np.abs(grid - 1.0 / n - flat))
        )
        assert dist <= 1.6276 / np.sqrt(n)

    def test_fixed_stream_reproduces(self):
        post = self.posterior(5, 4)
        rng = Rng.for_purpose(7, "q-repro")
        first = sample_q_matrix(post, rng)
        again = sample_q_matrix(post, rng.clone())
        assert np.array_equal(first, again)

    def test_draw_stack_shape_and_determinism(self):
        post = fit_beta_binomial(
            np.array([[3.0, 0.0], [7.0, 5.0]]), np.array([10.0, 12.0])
        )
        rng = Rng.for_purpose(8, "q-stack")
        stack = q_matrix_draws(post, rng, 25)
        assert stack.shape == (25, 2, 2)
        assert np.all((stack > 0.0) & (stack < 1.0))
        assert np.array_equal(stack, q_matrix_draws(post, rng.clone(), 25))

    def test_draw_stack_count_validated(self):
        post = self.posterior(2, 2)
        with pytest.raises(CountOutOfRange):
            q_matrix_draws(post, Rng.for_purpose(9, "q-bad"), 0)


def write_panel_fixture(tmp_path, detections, clusters, weights):
    det = tmp_path / "detections.csv"
    clu = tmp_path / "clusters.csv"
    wts = tmp_path / "weights.csv"
    det.write_text(detections, encoding="utf-8")
    clu.write_text(clusters, encoding="utf-8")
    wts.write_text(weights, encoding="utf-8")
    return det, clu, wts


GOOD_DETECTIONS = (
    "cluster,gene,detected_count\n"
    "cB,g1,40\n"
    "cA,g1,10\n"
    "cA,g2,0\n"
    "cB,g3,55\n"
)
GOOD_CLUSTERS = "cluster,n_cells\ncB,60\ncA,25\n"
GOOD_WEIGHTS = "gene,weight\ng1,1.5\ng2,0.25\ng3,2.0\n"


class TestLoadPanelData:
    def test_good_fixture(self, tmp_path):
        paths = write_panel_fixture(
            tmp_path, GOOD_DETECTIONS, GOOD_CLUSTERS, GOOD_WEIGHTS
        )
        data = load_panel_data(*paths)
        assert data.genes == ("g1", "g2", "g3")
        assert data.clusters == ("cA", "cB")
        assert np.array_equal(data.weights, [1.5, 0.25, 2.0])
        assert np.array_equal(data.cluster_sizes, [25.0, 60.0])
        expect = np.array([[10.0, 0.0, 0.0], [40.0, 0.0, 55.0]])
        assert np.array_equal(data.detected, expect)

    def test_missing_pairs_default_to_zero(self, tmp_path):
        paths = write_panel_fixture(
            tmp_path,
            "cluster,gene,detected_count\ncA,g2,5\n",
            GOOD_CLUSTERS,
            GOOD_WEIGHTS,
        )
        data = load_panel_data(*paths)
        assert data.detected.sum() == 5.0
        assert data.detected[0, 1] == 5.0

    def test_whitespace_tolerated(self, tmp_path):
        paths = write_panel_fixture(
            tmp_path,
            "cluster, gene ,detected_count\n cA , g1 , 3\n",
            "cluster , n_cells\ncA, 25\n",
            "gene, weight\n g1 , 1.5\n",
        )
        data = load_panel_data(*paths)
        assert data.genes == ("g1",)
        assert data.detected[0, 0] == 3.0

    def test_unknown_references_rejected(self, tmp_path):
        paths = write_panel_fixture(
            tmp_path,
            "cluster,gene,detected_count\ncZ,g1,1\n",
            GOOD_CLUSTERS,
            GOOD_WEIGHTS,
        )
        with pytest.raises(DomainError, match="unknown cluster"):
            load_panel_data(*paths)
        paths = write_panel_fixture(
            tmp_path,
            "cluster,gene,detected_count\ncA,gZ,1\n",
            GOOD_CLUSTERS,
            GOOD_WEIGHTS,
        )
        with pytest.raises(DomainError, match="unknown gene"):
            load_panel_data(*paths)

    def test_duplicates_rejected(self, tmp_path):
        paths = write_panel_fixture(
            tmp_path,
            GOOD_DETECTIONS,
            GOOD_CLUSTERS,
            "gene,weight\ng1,1.0\ng1,2.0\n",
        )
        with pytest.raises(DomainError, match="duplicate gene"):
            load_panel_data(*paths)
        paths = write_panel_fixture(
            tmp_path,
            GOOD_DETECTIONS,
            "cluster,n_cells\ncA,25\ncA,30\ncB,60\n",
            GOOD_WEIGHTS,
        )
        with pytest.raises(DomainError, match="duplicate cluster"):
            load_panel_data(*paths)

    def test_bad_numerics_rejected(self, tmp_path):
        paths = write_panel_fixture(
            tmp_path,
            "cluster,gene,detected_count\ncA,g1,ten\n",
            GOOD_CLUSTERS,
            GOOD_WEIGHTS,
        )
        with pytest.raises(DomainError, match="not numeric"):
            load_panel_data(*paths)
        paths = write_panel_fixture(
            tmp_path,
            GOOD_DETECTIONS,
            GOOD_CLUSTERS,
            "gene,weight\ng1,heavy\ng2,0.25\ng3,2.0\n",
        )
        with pytest.raises(DomainError, match="not numeric"):
            load_panel_data(*paths)

    def test_header_and_shape_errors(self, tmp_path):
        paths = write_panel_fixture(
            tmp_path,
            "gene,cluster,detected_count\ncA,g1,1\n",
            GOOD_CLUSTERS,
            GOOD_WEIGHTS,
        )
        with pytest.raises(DomainError, match="expected header"):
            load_panel_data(*paths)
        paths = write_panel_fixture(
            tmp_path,
            "cluster,gene,detected_count\ncA,g1\n",
            GOOD_CLUSTERS,
            GOOD_WEIGHTS,
        )
        with pytest.raises(DomainError, match="fields"):
            load_panel_data(*paths)

    def test_empty_inputs_rejected(self, tmp_path):
        paths = write_panel_fixture(tmp_path, GOOD_DETECTIONS, GOOD_CLUSTERS, "")
        with pytest.raises(EmptyInput):
            load_panel_data(*paths)
        paths = write_panel_fixture(
            tmp_path, GOOD_DETECTIONS, GOOD_CLUSTERS, "gene,weight\n"
        )
        with pytest.raises(EmptyInput):
            load_panel_data(*paths)

    def test_count_bounds_enforced(self, tmp_path):
        paths = write_panel_fixture(
            tmp_path,
            "cluster,gene,detected_count\ncA,g1,26\n",
            GOOD_CLUSTERS,
            GOOD_WEIGHTS,
        )
        with pytest.raises(CountOutOfRange):
            load_panel_data(*paths)
        paths = write_panel_fixture(
            tmp_path,
            GOOD_DETECTIONS,
            "cluster,n_cells\ncA,0\ncB,60\n",
            GOOD_WEIGHTS,
        )
        with pytest.raises(CountOutOfRange):
            load_panel_data(*paths)
