"""
Tests for fold assignment and cross-fitted nuisance estimation.
"""

import numpy as np
import pytest

from fairfrontier.core import Dataset, LossSpec
from fairfrontier.errors import InputError
from fairfrontier.nuisance import (NuisanceLearner, assign_folds, cell_labels, fit_cross_fit, fit_delta_theta,
                                   jitter_covariate, predict_delta_theta)
from fairfrontier.simulate import oracle_learner
from tests.conftest import cell_mean_delta


class TestFolds:
    """K-fold partition."""

    def test_sizes_balanced(self):
        folds = assign_folds(103, 5, seed=1)
        sizes = folds.sizes()
        assert sum(sizes) == 103
        assert max(sizes) - min(sizes) <= 1

    def test_deterministic(self):
        a = assign_folds(50, 5, seed=9)
        b = assign_folds(50, 5, seed=9)
        np.testing.assert_array_equal(a.folds, b.folds)

    def test_train_and_test_disjoint(self):
        folds = assign_folds(40, 4, seed=0)
        for k in range(4):
            assert np.intersect1d(folds.train_index(k), folds.test_index(k)).size == 0

    def test_invalid_fold_counts(self):
        with pytest.raises(InputError, match="at least 2"):
            assign_folds(10, 1, seed=0)
        with pytest.raises(InputError, match="exceeds"):
            assign_folds(3, 5, seed=0)


class TestLearners:
    """Learner selection and predictions."""

    def test_oracle_cross_fit_is_exact(self, balanced_dgp, balanced_data, loss):
        folds = assign_folds(balanced_data.n, 2, seed=0)
        cfn = fit_cross_fit(balanced_data, loss, folds, oracle_learner(balanced_dgp))
        np.testing.assert_allclose(cfn.predictions, balanced_dgp.delta_theta(balanced_data.x))
        row = predict_delta_theta(cfn, 7)
        np.testing.assert_allclose(row, balanced_dgp.delta_theta(balanced_data.x[7:8])[0])
        row[:] = 99.0
        assert cfn.predictions[7, 0] != 99.0

    def test_row_order_within_fold_does_not_matter(self, discrete_data, loss):
        folds = assign_folds(discrete_data.n, 3, seed=4)
        rng = np.random.default_rng(8)
        order = np.arange(discrete_data.n)
        for k in range(folds.K):
            rows = folds.test_index(k)
            order[rows] = rng.permutation(rows)
        np.testing.assert_array_equal(folds.folds[order], folds.folds)
        # one inner fold: the full penalty path, no held-out search
        learner = NuisanceLearner(n_lambdas=6, inner_folds=1)
        base = fit_cross_fit(discrete_data, loss, folds, learner)
        moved = fit_cross_fit(discrete_data.subset(order), loss, folds, learner)
        np.testing.assert_allclose(moved.predictions, base.predictions[order], atol=1e-6)

    def test_multinomial_predictions_bounded(self, discrete_data, loss):
        folds = assign_folds(discrete_data.n, 3, seed=2)
        cfn = fit_cross_fit(discrete_data, loss, folds, NuisanceLearner(n_lambdas=8, inner_folds=3))
        assert cfn.predictions.shape == (discrete_data.n, 2)
        assert (np.abs(cfn.predictions) <= 1.0 + 1e-12).all()

    def test_multinomial_tracks_cell_means(self, discrete_data, loss):
        """With one covariate the lasso fit should land near the empirical cell differences."""
        model = fit_delta_theta(discrete_data, loss, NuisanceLearner(n_lambdas=10, inner_folds=3))
        truth = cell_mean_delta(discrete_data, loss)
        fitted = model.predict(discrete_data.x)
        # a monotone logit in x cannot match three free cells exactly
        assert np.abs(fitted - truth).mean() < 0.1

    def test_custom_loss_uses_lasso(self, discrete_data):
        model = fit_delta_theta(discrete_data, LossSpec.scaled(2.0), NuisanceLearner(n_lambdas=5, inner_folds=3))
        assert model.predict(discrete_data.x[:4]).shape == (4, 2)

    def test_external_predictions(self, discrete_data, loss):
        external = np.zeros((discrete_data.n, 2))
        folds = assign_folds(discrete_data.n, 2, seed=0)
        cfn = fit_cross_fit(discrete_data, loss, folds, NuisanceLearner(method="external", external=external))
        np.testing.assert_array_equal(cfn.predictions, external)

    def test_external_shape_checked(self, discrete_data, loss):
        learner = NuisanceLearner(method="external", external=np.zeros((3, 2)))
        with pytest.raises(InputError, match="shape"):
            fit_cross_fit(discrete_data, loss, assign_folds(discrete_data.n, 2, seed=0), learner)

    def test_external_cannot_refit(self, discrete_data, loss):
        learner = NuisanceLearner(method="external", external=np.zeros((discrete_data.n, 2)))
        with pytest.raises(InputError, match="refit"):
            fit_delta_theta(discrete_data, loss, learner)

    def test_invalid_method(self):
        with pytest.raises(InputError, match="Invalid learner"):
            NuisanceLearner(method="forest")

    def test_classification_needs_binary_outcomes(self, discrete_data):
        bad = Dataset(discrete_data.y + 0.5, discrete_data.group, discrete_data.x)
        with pytest.raises(InputError, match="binary"):
            cell_labels(bad)


class TestJitter:
    """Breaking ties in discrete covariates."""

    def test_jitter_bounded(self, discrete_data):
        jittered = jitter_covariate(discrete_data, 0, 0.01, seed=0)
        assert np.abs(jittered.x - discrete_data.x).max() <= 0.01

    def test_jitter_column_range(self, discrete_data):
        with pytest.raises(InputError, match="out of range"):
            jitter_covariate(discrete_data, 3, 0.01, seed=0)
