"""
Tests for the multiplier bootstrap and the numerical-derivative law.
"""

import numpy as np
import pytest

from fairfrontier.bootstrap import (BootstrapConfig, BootstrapLaw, Functional, PerturbationSample, bootstrap_paths,
                                    derivative_draws, draw_weights, multiplier_bootstrap)
from fairfrontier.core import R
from fairfrontier.errors import InputError, NumericalError


def first_h(h, e):
    return h[:, 0]


class TestConfig:
    """Draw counts and the derivative step."""

    def test_default_step(self):
        assert BootstrapConfig().step_for(1000) == pytest.approx(0.1)

    def test_step_too_small(self):
        with pytest.raises(InputError, match="too small"):
            BootstrapConfig(step=1e-4).step_for(100)

    def test_too_few_draws(self):
        with pytest.raises(InputError, match="at least 100"):
            BootstrapConfig(draws=10).validate()

    def test_describe(self):
        info = BootstrapConfig(draws=200, seed=4).describe(1000)
        assert info == {"B": 200, "seed": 4, "s_n": pytest.approx(0.1), "varsigma": 1e-3}


class TestWeights:
    """Exponential multipliers."""

    def test_deterministic_per_draw(self):
        np.testing.assert_array_equal(draw_weights(50, 7, 3), draw_weights(50, 7, 3))
        assert not np.array_equal(draw_weights(50, 7, 3), draw_weights(50, 7, 4))

    def test_positive_with_unit_mean(self):
        w = draw_weights(200_000, 1, 0)
        assert (w > 0).all()
        assert w.mean() == pytest.approx(1.0, abs=0.01)


class TestPaths:
    """Perturbed support functions."""

    def test_unit_weights_reproduce_estimate(self, discrete_sfe):
        Q = discrete_sfe.grid.vectors[::30]
        sample = bootstrap_paths(discrete_sfe, Q, weights=np.ones((3, discrete_sfe.n)))
        assert sample.draws == 3
        assert np.abs(sample.h_paths).max() < 1e-9
        np.testing.assert_array_equal(sample.e_paths, 0.0)

    def test_weight_width_checked(self, discrete_sfe):
        with pytest.raises(InputError, match="columns"):
            bootstrap_paths(discrete_sfe, discrete_sfe.grid.vectors[:2], weights=np.ones((2, 5)))

    def test_group_without_weight(self, discrete_sfe):
        w = np.where(discrete_sfe.material.group == R, 0.0, 1.0)[None, :]
        with pytest.raises(NumericalError, match="zero weight"):
            bootstrap_paths(discrete_sfe, discrete_sfe.grid.vectors[:2], weights=w)

    def test_same_seed_same_paths(self, discrete_sfe):
        Q = discrete_sfe.grid.vectors[:4]
        cfg = BootstrapConfig(draws=100, seed=2)
        first = bootstrap_paths(discrete_sfe, Q, cfg=cfg)
        second = bootstrap_paths(discrete_sfe, Q, cfg=BootstrapConfig(draws=100, seed=2, threads=3))
        np.testing.assert_allclose(first.h_paths, second.h_paths)

    def test_spread_matches_influence_variance(self, discrete_sfe):
        """The bootstrap SD of √n(h̃ - ĥ) at one direction tracks sqrt(Ω̂(q, q))."""
        q = discrete_sfe.grid.vectors[[40]]
        sample = bootstrap_paths(discrete_sfe, q, cfg=BootstrapConfig(draws=600, seed=0))
        target = np.sqrt(discrete_sfe.covariance(q)[0, 0])
        assert sample.h_paths[:, 0].std() == pytest.approx(target, rel=0.15)


class TestLaw:
    """Derivative draws and quantiles."""

    def test_linear_functional_derivative_is_the_path(self, discrete_sfe):
        Q = discrete_sfe.grid.vectors[:3]
        sample = bootstrap_paths(discrete_sfe, Q, cfg=BootstrapConfig(draws=100, seed=5))
        values = derivative_draws(Functional(Q, first_h, "first"), sample)
        np.testing.assert_allclose(values, sample.h_paths[:, 0], atol=1e-8)

    def test_direction_mismatch(self, discrete_sfe):
        Q = discrete_sfe.grid.vectors[:3]
        sample = bootstrap_paths(discrete_sfe, Q, weights=np.ones((2, discrete_sfe.n)))
        with pytest.raises(InputError, match="do not match"):
            multiplier_bootstrap(discrete_sfe, None, Functional(Q[:2], first_h), sample=sample)

    def test_non_finite_draw(self):
        sample = PerturbationSample(np.eye(2), np.zeros(2), np.ones((2, 2)), np.zeros(2), np.zeros((2, 2)),
                                    n=100, step=0.5)
        phi = Functional(np.eye(2), lambda h, e: np.log(h[:, 0]), "log")
        with pytest.raises(NumericalError, match="log"):
            derivative_draws(phi, sample)

    def test_quantile_inverted_cdf(self):
        law = BootstrapLaw(np.array([1.0, 2.0, 3.0, 4.0]), step=0.1)
        assert law.quantile(0.5) == 2.0
        assert law.quantile(1.0) == 4.0

    def test_quantile_per_column(self):
        law = BootstrapLaw(np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]]), step=0.1)
        np.testing.assert_array_equal(law.quantile(1.0), [3.0, 30.0])

    def test_quantile_level_checked(self):
        with pytest.raises(InputError, match=r"\[0, 1\]"):
            BootstrapLaw(np.zeros(5), step=0.1).quantile(1.5)
