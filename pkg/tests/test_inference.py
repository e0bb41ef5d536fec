"""
Tests for the bootstrap-calibrated tests and confidence sets.

All procedures run on the balanced design with the closed-form nuisance and
reduced grids, so each call stays well under a second of bootstrap work.
"""

import numpy as np
import pytest

from fairfrontier import inference
from fairfrontier.bootstrap import BootstrapConfig
from fairfrontier.core import ADMISSIBLE_HALF, PARETO_ARC, U1, U2, LossSpec, RiskPoint, make_direction_grid
from fairfrontier.errors import InputError
from fairfrontier.geometry import RiskGrid, fairest_point
from fairfrontier.inference import (ConfidenceInterval, InferenceGrids, TestResult, distance_to_F_ci,
                                    estimate_status_quo, frontier_confidence_set, get_distance,
                                    rb_pair_in_confidence_set, stat_frontier, stat_lda, stat_pareto)
from fairfrontier.simulate import oracle_geometry
from fairfrontier.supportfn import SupportFunctionEstimate
from tests.conftest import one_sided_material


GRIDS = InferenceGrids(full=make_direction_grid(120), half=make_direction_grid(60, ADMISSIBLE_HALF),
                       arc=make_direction_grid(30, PARETO_ARC), candidates=15, e_candidates=5)
CFG = BootstrapConfig(draws=200, seed=1)
INTERIOR = RiskPoint(0.5, 0.5)


@pytest.fixture(scope="module")
def never_treat(balanced_data):
    return estimate_status_quo(balanced_data, LossSpec.classification(), 0.0)


class TestDistances:
    """Distance functions for ρ."""

    @pytest.mark.parametrize("name, expected", [
        ("squared_euclidean", 25.0), ("euclidean", 5.0), ("manhattan", 7.0), ("chebyshev", 4.0),
    ])
    def test_values(self, name, expected):
        assert get_distance(name)(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(expected)

    def test_unknown(self):
        with pytest.raises(InputError, match="Invalid rho"):
            get_distance("cosine")


class TestStatusQuo:
    """Plug-in risks of a status-quo policy."""

    def test_never_treat_risks(self, balanced_data, never_treat):
        y, group = balanced_data.y, balanced_data.group
        # never treating is wrong exactly when Y = 1
        expected = [y[group == g].mean() for g in (0, 1)]
        np.testing.assert_allclose(never_treat.e_hat, expected)

    def test_influence_centered(self, never_treat):
        np.testing.assert_allclose(never_treat.influence.mean(axis=0), 0.0, atol=1e-12)

    def test_callable_policy(self, balanced_data):
        sq = estimate_status_quo(balanced_data, LossSpec.classification(), lambda x: np.ones(x.shape[0]))
        y, group = balanced_data.y, balanced_data.group
        assert sq.point.e_r == pytest.approx(1.0 - y[group == 0].mean())

    def test_out_of_range(self, balanced_data):
        with pytest.raises(InputError, match="outside"):
            estimate_status_quo(balanced_data, LossSpec.classification(), 1.5)


class TestMembership:
    """Frontier and Pareto membership at fixed and estimated points."""

    def test_interior_point_rejected(self, balanced_oracle_sfe):
        result = inference.test_frontier_point(balanced_oracle_sfe, INTERIOR, cfg=CFG, grids=GRIDS)
        assert result.reject, f"T={result.statistic:.3f} c={result.critical_value:.3f}"
        assert result.B == 200
        assert result.label == "reject"

    def test_fairest_point_not_rejected(self, balanced_oracle_sfe):
        point, _ = fairest_point(balanced_oracle_sfe)
        result = inference.test_frontier_point(balanced_oracle_sfe, point, cfg=CFG, grids=GRIDS)
        assert not result.reject, f"T={result.statistic:.3f} c={result.critical_value:.3f}"

    def test_statistic_is_scaled(self, balanced_oracle_sfe):
        result = inference.test_frontier_point(balanced_oracle_sfe, INTERIOR, cfg=CFG, grids=GRIDS)
        assert result.statistic == pytest.approx(stat_frontier(balanced_oracle_sfe, INTERIOR, GRIDS))

    def test_pareto_end_not_rejected(self, balanced_oracle_sfe):
        R_hat = RiskPoint.of(balanced_oracle_sfe.support_points(U1)[0])
        result = inference.test_pareto(balanced_oracle_sfe, R_hat, cfg=CFG, grids=GRIDS)
        assert not result.reject, f"T={result.statistic:.3f} c={result.critical_value:.3f}"

    def test_pareto_interior_rejected(self, balanced_oracle_sfe):
        result = inference.test_pareto(balanced_oracle_sfe, INTERIOR, cfg=CFG, grids=GRIDS)
        assert result.reject
        assert result.statistic == pytest.approx(stat_pareto(balanced_oracle_sfe, INTERIOR, GRIDS))

    def test_lda_carries_estimated_point(self, balanced_oracle_sfe, never_treat):
        result = inference.test_lda(balanced_oracle_sfe, never_treat, cfg=CFG, grids=GRIDS)
        assert result.test == "lda"
        assert result.statistic >= 0.0
        assert result.diagnostics["estimated_point"] is True
        assert result.statistic == pytest.approx(stat_lda(balanced_oracle_sfe, never_treat, GRIDS))
        record = result.to_dict()
        assert record["diagnostics"]["point"] == pytest.approx(list(never_treat.e_hat))

    def test_rejection_monotone_in_alpha(self, balanced_oracle_sfe):
        point, _ = fairest_point(balanced_oracle_sfe)
        alphas = (0.01, 0.05, 0.2)
        for shift in (0.0, 0.01, 0.03, 0.08):
            e = RiskPoint(point.e_r + shift, point.e_b + shift)
            results = [inference.test_frontier_point(balanced_oracle_sfe, e, alpha=a, cfg=CFG, grids=GRIDS)
                       for a in alphas]
            critical = [r.critical_value for r in results]
            assert critical == sorted(critical, reverse=True)
            for smaller, larger in zip(results, results[1:]):
                assert larger.reject or not smaller.reject

    def test_statistics_scale_with_root_n(self, balanced_oracle_sfe):
        tiled = SupportFunctionEstimate(balanced_oracle_sfe.material.tiled(4), balanced_oracle_sfe.grid)
        assert tiled.n == 4 * balanced_oracle_sfe.n
        for stat in (stat_frontier, stat_pareto):
            base = stat(balanced_oracle_sfe, INTERIOR, GRIDS)
            assert base > 0
            assert stat(tiled, INTERIOR, GRIDS) == pytest.approx(2.0 * base, rel=1e-9)

    def test_alpha_checked(self, balanced_oracle_sfe):
        with pytest.raises(InputError, match="Invalid alpha"):
            inference.test_frontier_point(balanced_oracle_sfe, INTERIOR, alpha=1.5, cfg=CFG, grids=GRIDS)


class TestSkew:
    """Weak group-skew test."""

    def test_balanced_design_rejects(self, balanced_oracle_sfe):
        """R sits above the 45-degree line and B below it, so the skew null fails."""
        result = inference.test_weak_skew(balanced_oracle_sfe, cfg=CFG, grids=GRIDS)
        assert result.reject
        assert result.critical_value == 0.0
        assert result.diagnostics["retained_pairs"] > 0
        assert result.diagnostics["sup_product"] < 0

    def test_estimated_pair_is_retained(self, balanced_oracle_sfe):
        R_hat = RiskPoint.of(balanced_oracle_sfe.support_points(U1)[0])
        B_hat = RiskPoint.of(balanced_oracle_sfe.support_points(U2)[0])
        assert rb_pair_in_confidence_set(balanced_oracle_sfe, R_hat, B_hat, cfg=CFG, grids=GRIDS)

    def test_rskew_design_not_rejected(self, rskew_dgp, rskew_oracle_sfe):
        """R and B both sit above the 45-degree line, so the skew null holds."""
        result = inference.test_weak_skew(rskew_oracle_sfe, cfg=CFG, grids=GRIDS)
        assert result.decision is False, f"sup product={result.diagnostics['sup_product']:.4g}"
        assert result.diagnostics["sup_product"] > 0
        truth = oracle_geometry(rskew_dgp, m_draws=100_000, grid=make_direction_grid(60), n_c=201)
        assert rb_pair_in_confidence_set(rskew_oracle_sfe, truth.R, truth.B, cfg=CFG, grids=GRIDS)

    def test_far_pair_is_not_retained(self, balanced_oracle_sfe):
        assert not rb_pair_in_confidence_set(balanced_oracle_sfe, RiskPoint(0.9, 0.9), RiskPoint(0.9, 0.9),
                                             cfg=CFG, grids=GRIDS)


class TestConfidenceSets:
    """Frontier confidence set and the distance interval."""

    def test_frontier_set_near_fairest_point(self, balanced_oracle_sfe):
        point, _ = fairest_point(balanced_oracle_sfe)
        center = point.as_array()
        candidates = RiskGrid.around(center - 0.05, center + 0.05, 9)
        cs = frontier_confidence_set(balanced_oracle_sfe, candidates, cfg=CFG, grids=GRIDS)
        assert not cs.empty
        assert cs.size < candidates.points.shape[0]
        assert np.linalg.norm(cs.points - center, axis=1).min() < 0.02

    def test_no_candidates(self, balanced_oracle_sfe):
        empty = RiskGrid(np.empty((0, 2)), (0.0, 0.0), (0, 0))
        assert frontier_confidence_set(balanced_oracle_sfe, empty, cfg=CFG, grids=GRIDS).empty

    def test_distance_interval(self, balanced_oracle_sfe, never_treat):
        ci = distance_to_F_ci(balanced_oracle_sfe, never_treat, cfg=CFG, grids=GRIDS)
        assert isinstance(ci, ConfidenceInterval)
        assert ci.lo <= ci.estimate <= ci.hi
        assert ci.contains(ci.estimate)
        assert ci.branches["45"] is not None
        assert ci.diagnostics["etilde_side"] == "crosses"

    def test_distance_to_fixed_point(self, balanced_oracle_sfe):
        point, _ = fairest_point(balanced_oracle_sfe)
        ci = distance_to_F_ci(balanced_oracle_sfe, point, rho="euclidean", cfg=CFG, grids=GRIDS)
        assert ci.estimate == pytest.approx(0.0, abs=1e-9)
        assert ci.lo == 0.0

    def test_one_sided_set_uses_its_side_only(self):
        sfe = SupportFunctionEstimate(one_sided_material(200), GRIDS.full)
        ci = distance_to_F_ci(sfe, RiskPoint(0.5, 1.0), rho="euclidean", cfg=CFG, grids=GRIDS)
        assert ci.diagnostics["etilde_side"] == "above"
        assert ci.branches["45"] is None
        assert ci.branches["below"] is None and ci.diagnostics["below_skipped"]
        assert ci.branches["above"] is not None
        assert (ci.lo, ci.hi) == ci.branches["above"]
        assert ci.estimate == pytest.approx(0.0, abs=1e-9)
        assert ci.lo == pytest.approx(0.0, abs=1e-9)


class TestResultRecord:
    """Serialized test results."""

    def test_to_dict_is_plain(self):
        result = TestResult("frontier", 100, 0.05, 1.5, 1.0, True, 200, 0.2, 1e-3, 2.1, 0,
                            diagnostics={"point": np.array([0.1, 0.2])})
        record = result.to_dict()
        assert record["diagnostics"]["point"] == [0.1, 0.2]
        assert record["decision"] is True
        assert result.label == "reject"
