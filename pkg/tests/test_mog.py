import math

import numpy as np
import pytest
from sklearn.base import clone

from paranneal.mog import (
    MixtureOfGaussians,
    MogObjectivePrior,
    WeightedGaussianMixture,
    draw_benchmark_objective,
    log_density,
    mog_mode_estimate,
    sample_mog,
    sample_wishart,
    weighted_em_step,
)
from paranneal.sampling import WeightedSampleSet, make_rng, resample_multinomial


def random_mixture(rng, C, d, spread=3.0):
    A = rng.normal(size=(C, d, d))
    covs = A @ np.swapaxes(A, 1, 2) / d + 0.2 * np.eye(d)
    return MixtureOfGaussians(rng.dirichlet(np.ones(C)), spread * rng.normal(size=(C, d)), covs)


def weighted_log_likelihood(mog, X, pi):
    return float(pi @ log_density(mog, X))


def gaussian_pdf_1d(x, mu, var):
    return np.exp(-0.5 * (x - mu) ** 2 / var) / np.sqrt(2 * np.pi * var)


class TestLogDensity:
    def test_single_component_peak(self):
        cov = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 0.5]])
        mog = MixtureOfGaussians([1.0], [[1.0, 2.0, 3.0]], [cov])
        expected = -1.5 * math.log(2 * math.pi) - 0.5 * math.log(np.linalg.det(cov))
        assert log_density(mog, [1.0, 2.0, 3.0]) == pytest.approx(expected, rel=1e-13)

    def test_symmetric_pair(self):
        mog = MixtureOfGaussians([0.5, 0.5], [[-1.0], [1.0]], [[[1.0]], [[1.0]]])
        expected = math.log(math.exp(-0.5) / math.sqrt(2 * math.pi))
        assert log_density(mog, [0.0]) == pytest.approx(expected, rel=1e-14)
        for x in (0.3, 1.7, 4.0):
            assert log_density(mog, [x]) == pytest.approx(log_density(mog, [-x]), rel=1e-14)

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(3)
        mog = MixtureOfGaussians([0.2, 0.3, 0.5], [[0.0], [2.0], [-1.0]], [[[1.0]], [[0.25]], [[4.0]]])
        xs = rng.normal(size=20) * 3
        direct = sum(
            w * gaussian_pdf_1d(xs, m[0], c[0, 0]) for w, m, c in zip(mog.weights, mog.means, mog.covariances)
        )
        np.testing.assert_allclose(log_density(mog, xs[:, None]), np.log(direct), rtol=1e-12)

    def test_far_point_stays_finite(self):
        mog = MixtureOfGaussians([1.0], [[0.0, 0.0]], [np.eye(2) * 1e-3])
        assert np.isfinite(log_density(mog, [1e3, 1e3]))

    def test_dimension_mismatch(self):
        mog = MixtureOfGaussians([1.0], [[0.0, 0.0]], [np.eye(2)])
        with pytest.raises(ValueError):
            log_density(mog, [0.0, 0.0, 0.0])

    def test_zero_weight_component(self):
        mog = MixtureOfGaussians([1.0, 0.0], [[0.0], [5.0]], [[[1.0]], [[1.0]]])
        assert log_density(mog, [5.0]) == pytest.approx(math.log(gaussian_pdf_1d(5.0, 0.0, 1.0)))


class TestMixtureValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            MixtureOfGaussians([0.5, 0.6], [[0.0], [1.0]], [[[1.0]], [[1.0]]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            MixtureOfGaussians([1.0], [[0.0, 0.0]], [np.eye(3)])

    def test_round_trip_dict(self):
        mog = random_mixture(np.random.default_rng(0), 3, 2)
        assert MixtureOfGaussians.from_dict(mog.to_dict()) == mog


class TestSample:
    def test_degenerate_weights(self):
        mog = MixtureOfGaussians([1.0, 0.0], [[0.0], [100.0]], [[[1.0]], [[1.0]]])
        x = sample_mog(mog, make_rng(0), 1000)
        assert np.all(np.abs(x) < 10)

    def test_component_frequencies(self):
        w = np.array([0.2, 0.5, 0.3])
        mog = MixtureOfGaussians(w, [[-100.0], [0.0], [100.0]], [[[1.0]]] * 3)
        x = sample_mog(mog, make_rng(1), 100_000)[:, 0]
        labels = np.digitize(x, [-50.0, 50.0])
        np.testing.assert_allclose(np.bincount(labels) / x.size, w, atol=0.01)

    def test_components_follow_weight_draw(self):
        mog = MixtureOfGaussians([0.4, 0.6], [[-100.0], [100.0]], [[[1.0]], [[1.0]]])
        comp = resample_multinomial(mog.weights, make_rng(5), 500)
        x = sample_mog(mog, make_rng(5), 500)[:, 0]
        np.testing.assert_array_equal(x > 0, comp == 1)

    def test_mean_converges(self):
        rng = np.random.default_rng(2)
        mog = random_mixture(rng, 3, 2)
        n = 100_000
        x = sample_mog(mog, make_rng(3), n)
        mean = mog.weights @ mog.means
        second = np.einsum("c,cij->ij", mog.weights, mog.covariances + np.einsum("ci,cj->cij", mog.means, mog.means))
        sd = np.sqrt(np.diag(second - np.outer(mean, mean)))
        assert np.all(np.abs(x.mean(axis=0) - mean) <= 3 * sd / np.sqrt(n))


class TestWeightedEM:
    def test_single_component_closed_form(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 3))
        pi = rng.dirichlet(np.ones(50))
        reg = np.diag([0.1, 0.2, 0.3])
        start = MixtureOfGaussians([1.0], [np.zeros(3)], [np.eye(3)])
        new = weighted_em_step(start, (X, pi), reg)
        mu = pi @ X
        cov = (pi[:, None] * (X - mu)).T @ (X - mu)
        assert new.weights[0] == pytest.approx(1.0)
        np.testing.assert_allclose(new.means[0], mu, rtol=1e-12)
        np.testing.assert_allclose(new.covariances[0], cov + reg, rtol=1e-12)

    def test_separated_clusters(self):
        rng = np.random.default_rng(1)
        X = np.r_[rng.normal(-10, 1, size=(200, 1)), rng.normal(10, 1, size=(200, 1))]
        pi = np.full(400, 1 / 400)
        start = MixtureOfGaussians([0.5, 0.5], [[-9.0], [9.0]], [[[1.0]], [[1.0]]])
        new = weighted_em_step(start, (X, pi), None)
        oracle = [X[:200, 0].mean(), X[200:, 0].mean()]
        np.testing.assert_allclose(new.means[:, 0], oracle, atol=0.1)

    def test_regularizer_additive(self):
        rng = np.random.default_rng(2)
        mog = random_mixture(rng, 3, 2)
        X = rng.normal(size=(40, 2)) * 3
        pi = rng.dirichlet(np.ones(40))
        plain = weighted_em_step(mog, (X, pi), None)
        r = np.array([0.3, 0.7])
        reg = weighted_em_step(mog, (X, pi), np.diag(r))
        for c in range(3):
            np.testing.assert_allclose(
                reg.covariances[c] - plain.covariances[c], np.diag(r) / plain.weights[c], rtol=1e-9, atol=1e-12
            )

    def test_accepts_weighted_sample_set(self):
        rng = np.random.default_rng(3)
        s = WeightedSampleSet.from_log_values(rng.normal(size=(30, 2)), rng.normal(size=30), 1.0)
        mog = random_mixture(rng, 2, 2)
        a = weighted_em_step(mog, s, np.eye(2) * 0.1)
        b = weighted_em_step(mog, (s.x, s.pi), np.eye(2) * 0.1)
        assert a == b

    def test_dead_component_respawn(self):
        X = np.array([[0.0], [0.1], [0.2]])
        pi = np.array([0.2, 0.7, 0.1])
        mog = MixtureOfGaussians([0.5, 0.5], [[0.0], [1e4]], [[[1.0]], [[1e-4]]])
        new, dead = weighted_em_step(mog, (X, pi), np.eye(1) * 0.01, respawn_cov=np.eye(1) * 0.5, return_info=True)
        assert dead == [1]
        assert new.means[1, 0] == 0.1
        assert new.covariances[1, 0, 0] == 0.5
        assert new.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert new.weights[1] == pytest.approx((1 / 20) / (1 + 1 / 20))

    def test_ascent_and_spd_random(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            C, d, n = rng.integers(1, 5), rng.integers(1, 4), rng.integers(20, 80)
            mog = random_mixture(rng, C, d)
            X = rng.normal(size=(n, d)) * 3
            pi = rng.dirichlet(np.ones(n))
            new = weighted_em_step(mog, (X, pi), None)
            assert weighted_log_likelihood(new, X, pi) >= weighted_log_likelihood(mog, X, pi) - 1e-9
            reg = weighted_em_step(mog, (X, pi), np.eye(d) * 0.01)
            assert abs(reg.weights.sum() - 1) <= 1e-9
            assert all(np.linalg.eigvalsh(c).min() > 0 for c in reg.covariances)


class TestModeEstimate:
    def test_single_component(self):
        mog = MixtureOfGaussians([1.0], [[1.5, -2.0]], [np.eye(2)])
        np.testing.assert_array_equal(mog_mode_estimate(mog), [1.5, -2.0])

    def test_dominant_component(self):
        mog = MixtureOfGaussians([0.9, 0.1], [[0.0], [10.0]], [[[1.0]], [[1.0]]])
        np.testing.assert_array_equal(mog_mode_estimate(mog, refine=False), [0.0])
        np.testing.assert_allclose(mog_mode_estimate(mog), [0.0], atol=1e-12)

    def test_tie_goes_to_lowest_index(self):
        mog = MixtureOfGaussians([0.5, 0.5], [[-5.0], [5.0]], [[[1.0]], [[1.0]]])
        np.testing.assert_array_equal(mog_mode_estimate(mog, refine=False), [-5.0])

    def test_near_coincident_means_against_grid(self):
        mog = MixtureOfGaussians([0.5, 0.5], [[0.0], [0.3]], [[[1.0]], [[0.05]]])
        grid = np.linspace(-4, 4, 10_000)
        density = log_density(mog, grid[:, None])
        best = grid[np.argmax(density)]
        probed = mog_mode_estimate(mog, refine=False)
        assert probed[0] == 0.3  # the narrow component has the higher density at its mean
        refined = mog_mode_estimate(mog)
        assert abs(refined[0] - best) <= grid[1] - grid[0]
        assert log_density(mog, refined) >= density.max() - 1e-9

    def test_refine_never_worse(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            mog = random_mixture(rng, 4, 2, spread=1.0)
            assert log_density(mog, mog_mode_estimate(mog)) >= log_density(mog, mog_mode_estimate(mog, refine=False))


class TestBenchmarkPrior:
    def test_single_component_weight(self):
        for seed in range(5):
            mog = draw_benchmark_objective(MogObjectivePrior(3, 1, 2.0), make_rng(seed))
            assert mog.weights.tolist() == [1.0]

    def test_tiny_scale_collapses_means(self):
        mog = draw_benchmark_objective(MogObjectivePrior(4, 6, 1e-12), make_rng(0))
        assert np.abs(mog.means).max() < 1e-4

    def test_mean_spread_follows_scale(self):
        mog = draw_benchmark_objective(MogObjectivePrior(2, 4000, 9.0), make_rng(1))
        assert mog.means.std() == pytest.approx(3.0, rel=0.05)

    def test_default_dof(self):
        assert MogObjectivePrior(5, 2, 1.0).wishart_dof == 7.0

    def test_reproducible(self):
        prior = MogObjectivePrior(3, 4, 5.0)
        assert draw_benchmark_objective(prior, make_rng(9)) == draw_benchmark_objective(prior, make_rng(9))

    def test_invalid_prior(self):
        with pytest.raises(ValueError):
            MogObjectivePrior(0, 1, 1.0)
        with pytest.raises(ValueError):
            MogObjectivePrior(2, 1, -1.0)

    def test_wishart_mean(self):
        rng = make_rng(2)
        dof = 4.0
        draws = np.array([sample_wishart(np.eye(2), dof, rng) for _ in range(10_000)])
        np.testing.assert_allclose(draws.mean(axis=0), dof * np.eye(2), atol=0.03 * dof)

    def test_wishart_scale_matrix(self):
        V = np.array([[2.0, 0.5], [0.5, 1.0]])
        rng = make_rng(3)
        draws = np.array([sample_wishart(V, 5.0, rng) for _ in range(20_000)])
        np.testing.assert_allclose(draws.mean(axis=0), 5.0 * V, rtol=0.03, atol=0.05)

    def test_wishart_dof_bound(self):
        with pytest.raises(ValueError):
            sample_wishart(np.eye(3), 1.5, make_rng(0))


class TestWeightedGaussianMixtureEstimator:
    def test_recovers_clusters(self):
        rng = np.random.default_rng(0)
        X = np.r_[rng.normal(-5, 0.5, size=(300, 2)), rng.normal(5, 0.5, size=(300, 2))]
        est = WeightedGaussianMixture(n_components=2, random_state=1).fit(X)
        centres = np.sort(est.means_[:, 0])
        np.testing.assert_allclose(centres, [-5, 5], atol=0.15)
        assert est.score(X) > -3.0
        assert set(est.predict(X[:5])) | set(est.predict(X[-5:])) == {0, 1}

    def test_sample_weight_shifts_fit(self):
        X = np.array([[0.0], [1.0], [2.0], [10.0]])
        est = WeightedGaussianMixture(random_state=0).fit(X, sample_weight=[0, 0, 0, 1.0])
        assert est.means_[0, 0] == pytest.approx(10.0)

    def test_clone_and_params(self):
        est = WeightedGaussianMixture(n_components=3, reg=1e-3)
        assert clone(est).get_params() == est.get_params()
        assert est.set_params(n_iter=5).n_iter == 5

    def test_sample_shape(self):
        X = np.random.default_rng(1).normal(size=(50, 3))
        est = WeightedGaussianMixture(n_components=2, random_state=0).fit(X)
        assert est.sample(7, random_state=0).shape == (7, 3)

    def test_not_fitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            WeightedGaussianMixture().score_samples([[0.0]])
