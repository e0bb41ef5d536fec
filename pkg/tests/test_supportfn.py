"""
Tests for the support function estimator.

Covers the exact identities (ĥ = qᵀŝ, positive homogeneity, Ω̂ symmetry
and PSD), agreement with brute-force enumeration on a discrete design, the
improvement-cone support function and the 45-degree restricted value.
"""

import numpy as np
import pytest

from fairfrontier.core import B, R, GroupScale, RiskPoint, make_direction_grid
from fairfrontier.errors import InputError
from fairfrontier.geometry import polygon_support
from fairfrontier.supportfn import (ScoreMaterial, SupportFunctionEstimate, etilde_directions, eval_h, eval_h_C,
                                    eval_h_Etilde, eval_influence, eval_support_set, k_value)
from tests.conftest import assert_close_point, one_sided_material


class TestIdentities:
    """Exact algebraic properties of the estimator."""

    def test_h_equals_q_dot_s(self, discrete_sfe):
        rng = np.random.default_rng(0)
        Q = rng.standard_normal((10_000, 2))
        h = discrete_sfe.h_many(Q)
        s = discrete_sfe.support_points(Q)
        np.testing.assert_allclose(h, (Q * s).sum(axis=1), atol=1e-12)

    def test_positive_homogeneity(self, discrete_sfe):
        Q = make_direction_grid(64).vectors
        for c in (0.5, 3.0, 17.0):
            np.testing.assert_allclose(discrete_sfe.h_many(c * Q), c * discrete_sfe.h_many(Q), atol=1e-12)

    def test_chunking_does_not_change_values(self, discrete_data, discrete_sfe):
        small = SupportFunctionEstimate(discrete_sfe.material, max_cells=discrete_data.n * 3)
        Q = make_direction_grid(50).vectors
        np.testing.assert_array_equal(small.support_points(Q), discrete_sfe.support_points(Q))

    def test_tiled_material_same_h(self, discrete_sfe):
        tiled = SupportFunctionEstimate(discrete_sfe.material.tiled(3))
        Q = make_direction_grid(20).vectors
        np.testing.assert_allclose(tiled.h_many(Q), discrete_sfe.h_many(Q), atol=1e-12)

    def test_scalar_helpers_match_batch(self, discrete_sfe):
        q = np.array([0.6, -0.8])
        assert eval_h(discrete_sfe, q) == pytest.approx(float(discrete_sfe.h_many(q)[0]))
        point = eval_support_set(discrete_sfe, q)
        assert isinstance(point, RiskPoint)
        assert eval_influence(discrete_sfe, q).shape == (discrete_sfe.n,)

    def test_k_value(self):
        scale = GroupScale(0.5, 0.25)
        assert k_value(np.array([1.0, 1.0]), scale, np.array([1.0, 0.0])) == pytest.approx(2.0)


class TestBruteForce:
    """Discrete design with empirical cell-mean nuisance."""

    def test_matches_enumeration(self, discrete_sfe, discrete_vertices):
        Q = make_direction_grid(1000).vectors
        np.testing.assert_allclose(discrete_sfe.h_many(Q), polygon_support(discrete_vertices, Q), atol=1e-12)

    def test_support_points_are_vertices(self, discrete_sfe, discrete_vertices):
        Q = make_direction_grid(37).vectors
        s = discrete_sfe.support_points(Q)
        gaps = np.linalg.norm(s[:, None, :] - discrete_vertices[None, :, :], axis=2).min(axis=1)
        # a direction orthogonal to an edge may land anywhere on it; generic directions hit a vertex
        assert (gaps < 1e-12).mean() > 0.9


class TestCovariance:
    """Influence values and the covariance kernel."""

    def test_influence_mean_zero(self, discrete_sfe):
        Q = make_direction_grid(30).vectors
        np.testing.assert_allclose(discrete_sfe.influence(Q).mean(axis=0), 0.0, atol=1e-12)

    def test_symmetric_and_psd(self, discrete_sfe):
        grid = make_direction_grid(40)
        gram = discrete_sfe.kernel().gram(grid)
        np.testing.assert_allclose(gram, gram.T, atol=1e-12)
        assert np.linalg.eigvalsh(gram).min() >= -1e-8

    def test_kernel_matches_gram_entry(self, discrete_sfe):
        grid = make_direction_grid(8)
        gram = discrete_sfe.covariance(grid.vectors)
        kernel = discrete_sfe.kernel()
        assert kernel(grid.vectors[1], grid.vectors[5]) == pytest.approx(gram[1, 5], abs=1e-12)

    def test_cross_covariance_shape(self, discrete_sfe):
        cov = discrete_sfe.covariance(make_direction_grid(5).vectors, make_direction_grid(3).vectors)
        assert cov.shape == (5, 3)


class TestImprovementCone:
    """Support function of C(e*)."""

    def test_diagonal_direction(self):
        e = RiskPoint(0.3, 0.5)
        q = np.array([1.0, 1.0]) / np.sqrt(2.0)
        assert eval_h_C(e, q) == pytest.approx(0.8 / np.sqrt(2.0))

    def test_axis_direction(self):
        e = RiskPoint(0.3, 0.5)
        assert eval_h_C(e, np.array([1.0, 0.0])) == pytest.approx(0.3)

    def test_unbounded_direction(self):
        with pytest.raises(InputError, match="unbounded"):
            eval_h_C(RiskPoint(0.3, 0.5), np.array([-1.0, 0.0]))


class TestRestrictedValue:
    """Minimum of ĥ along u1 - c(1, -1)."""

    def test_directions(self):
        d = etilde_directions(np.array([0.0, 2.0]))
        np.testing.assert_allclose(d, [[-1.0, 0.0], [-3.0, 2.0]])

    def test_crossing_set(self, balanced_oracle_sfe):
        result = eval_h_Etilde(balanced_oracle_sfe)
        assert result.bounded and result.side == "crosses"
        assert_close_point(result.fairest, (0.415, 0.415), 0.03, "fairest point")

    def test_one_sided_set(self):
        result = eval_h_Etilde(SupportFunctionEstimate(one_sided_material()))
        assert not result.bounded
        assert result.side == "above"
        assert result.fairest is None

    def test_invalid_bound(self, discrete_sfe):
        with pytest.raises(InputError, match="c_bound"):
            eval_h_Etilde(discrete_sfe, c_bound=0.0)


class TestMaterial:
    """Score material validation and grid output."""

    def test_shape_checked(self):
        with pytest.raises(InputError, match="delta_theta"):
            ScoreMaterial(np.zeros((4, 2)), np.zeros((4, 2)), np.zeros((3, 2)), GroupScale(0.5, 0.5),
                          np.array([R, B, R, B]))

    def test_non_finite_rejected(self):
        bad = np.zeros((2, 2))
        bad[0, 0] = np.inf
        with pytest.raises(InputError, match="non-finite"):
            ScoreMaterial(bad, np.zeros((2, 2)), np.zeros((2, 2)), GroupScale(0.5, 0.5), np.array([R, B]))

    def test_grid_table(self, discrete_sfe):
        table = discrete_sfe.grid_table()
        assert list(table.columns) == ["angle", "q1", "q2", "h", "s_r", "s_b"]
        assert len(table) == 360

    def test_no_grid(self, discrete_sfe):
        with pytest.raises(InputError, match="no direction grid"):
            SupportFunctionEstimate(discrete_sfe.material).grid_support()

    def test_risk_bound_covers_vertices(self, discrete_sfe, discrete_vertices):
        assert np.linalg.norm(discrete_vertices, axis=1).max() <= discrete_sfe.risk_bound() + 1e-12
