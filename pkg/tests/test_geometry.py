"""
Tests for the set estimates built from ĥ.
"""

import numpy as np
import pytest

from fairfrontier.core import ADMISSIBLE_HALF, PARETO_ARC, RiskPoint, make_direction_grid
from fairfrontier.errors import EmptyResultError, InputError
from fairfrontier.geometry import (FeasibleSetEstimate, FrontierEstimate, PolygonSupport, RiskGrid, argmax_set,
                                   clip_polygon, estimate_feasible_set, estimate_frontier, estimate_pareto,
                                   fairest_point, frontier_criterion, frontier_grid, hausdorff_distance,
                                   intersect_halfplanes, is_convex, kappa_default, restrict_to_cone,
                                   select_frontier_point, support_distance)
from fairfrontier.supportfn import SupportFunctionEstimate
from tests.conftest import one_sided_material


SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def frontier_of(points, kappa_n=1.0):
    points = np.asarray(points, dtype=float)
    return FrontierEstimate(points, np.zeros(points.shape[0]), kappa_n, 0.0, (0.01, 0.01), (10, 10))


class TestPolygons:
    """Half-plane clipping and convexity."""

    def test_axis_halfplanes_give_square(self):
        normals = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        vertices = intersect_halfplanes(normals, np.ones(4), bound=5.0)
        assert vertices.shape == (4, 2)
        np.testing.assert_allclose(np.abs(vertices), 1.0)
        assert is_convex(vertices)

    def test_clip_cuts_square(self):
        clipped = clip_polygon(SQUARE, np.array([1.0, 0.0]), 0.5)
        assert clipped[:, 0].max() == pytest.approx(0.5)
        assert clipped.shape[0] == 4

    def test_clip_to_nothing(self):
        assert clip_polygon(SQUARE, np.array([1.0, 0.0]), -10.0).shape == (0, 2)

    def test_non_convex_detected(self):
        dart = np.array([[0.0, 0.0], [2.0, 1.0], [0.0, 2.0], [0.5, 1.0]])
        assert not is_convex(dart)

    def test_support_distance_of_nested_squares(self):
        grid = make_direction_grid(4)
        assert support_distance(SQUARE, 2.0 * SQUARE, grid) == pytest.approx(1.0)


class TestFeasibleSet:
    """Polygon Ê against the brute-force hull."""

    def test_support_never_exceeds_h(self, discrete_sfe):
        feasible = estimate_feasible_set(discrete_sfe, discrete_sfe.grid)
        Q = discrete_sfe.grid.vectors
        assert (feasible.support(Q) <= discrete_sfe.h_many(Q) + 1e-9).all()

    def test_close_to_true_hull(self, discrete_sfe, discrete_vertices):
        feasible = estimate_feasible_set(discrete_sfe, discrete_sfe.grid)
        assert is_convex(feasible.vertices)
        # an outer approximation from 360 directions overshoots by far less than 1e-3 here
        assert support_distance(feasible.vertices, discrete_vertices, make_direction_grid(720)) < 1e-3

    def test_needs_full_circle(self, discrete_sfe):
        with pytest.raises(InputError, match="full-circle"):
            estimate_feasible_set(discrete_sfe, make_direction_grid(50, ADMISSIBLE_HALF))

    def test_frame_columns(self, discrete_sfe):
        frame = estimate_feasible_set(discrete_sfe, discrete_sfe.grid).to_frame()
        assert list(frame.columns) == ["vertex", "e_r", "e_b"]

    def test_empty_set_has_no_grid(self):
        empty = FeasibleSetEstimate(np.empty((0, 2)), make_direction_grid(4), 1.0)
        assert empty.empty
        with pytest.raises(EmptyResultError):
            frontier_grid(empty, 1.0, 100)


class TestFrontier:
    """Thresholded frontier criterion."""

    def test_balanced_frontier_contains_fairest_point(self, balanced_oracle_sfe):
        sfe = balanced_oracle_sfe
        kappa_n = kappa_default(sfe.n)
        feasible = estimate_feasible_set(sfe, sfe.grid)
        grid = frontier_grid(feasible, kappa_n, sfe.n, resolution=60)
        F_hat = estimate_frontier(sfe, kappa_n, grid, half=make_direction_grid(200, ADMISSIBLE_HALF))
        assert not F_hat.empty
        assert (F_hat.criterion <= F_hat.threshold).all()
        fairest, side = fairest_point(sfe)
        assert side == "crosses"
        gaps = np.linalg.norm(F_hat.points - fairest.as_array(), axis=1)
        assert gaps.min() < 0.05, f"nearest retained point is {gaps.min():.4f} from the fairest point"

    def test_exact_polygon_criterion(self):
        square = PolygonSupport(SQUARE)
        points = np.array([[0.0, 0.0], [0.5, 0.5], [-0.2, -0.2]])
        outer, inner = frontier_criterion(square, points, make_direction_grid(360),
                                          make_direction_grid(101, ADMISSIBLE_HALF))
        total = outer + inner
        # the lower-left corner is the only frontier point of the unit square
        assert total[0] == pytest.approx(0.0, abs=1e-12)
        assert inner[1] == pytest.approx(0.5, abs=1e-9)
        assert outer[2] > 0.25

    def test_kappa_default(self):
        assert kappa_default(100) == pytest.approx(np.sqrt(np.log(100)))

    def test_risk_grid_radius(self):
        grid = RiskGrid.around(np.array([-2.0, -2.0]), np.array([2.0, 2.0]), 21, radius=1.0)
        assert (np.linalg.norm(grid.points, axis=1) <= 1.0).all()
        assert grid.spacing == (pytest.approx(0.2), pytest.approx(0.2))


class TestPareto:
    """Pareto arc end points."""

    def test_ends_minimize_each_risk(self, discrete_sfe, discrete_vertices):
        pareto = estimate_pareto(discrete_sfe, make_direction_grid(50, PARETO_ARC))
        assert pareto.R.e_r == pytest.approx(discrete_vertices[:, 0].min(), abs=1e-12)
        assert pareto.B.e_b == pytest.approx(discrete_vertices[:, 1].min(), abs=1e-12)
        assert len(pareto.to_frame()) == 50

    def test_arc_lies_in_feasible_polygon(self, discrete_sfe, discrete_vertices):
        full = make_direction_grid(360)
        polygon = estimate_feasible_set(discrete_sfe, full)
        pareto = estimate_pareto(discrete_sfe, make_direction_grid(50, PARETO_ARC))
        hull_diameter = np.linalg.norm(discrete_vertices[:, None, :] - discrete_vertices[None, :, :], axis=-1).max()
        assert polygon.diameter() == pytest.approx(hull_diameter, abs=0.01)
        excess = pareto.points @ full.vectors.T - polygon.support(full.vectors)[None, :]
        assert excess.max() <= 2.0 * np.pi / full.size * polygon.diameter()


class TestSelection:
    """Frontier-point selection and the C(e*) restriction."""

    def test_tie_breaks_on_smaller_e_r(self):
        F_hat = frontier_of([[0.3, 0.2], [0.2, 0.3], [0.5, 0.5]])
        chosen = select_frontier_point(F_hat, C=1.0)
        assert (chosen.e_r, chosen.e_b) == (0.2, 0.3)

    def test_empty_selection(self):
        with pytest.raises(EmptyResultError):
            select_frontier_point(frontier_of(np.empty((0, 2))), C=1.0)

    def test_restrict_to_cone(self):
        F_hat = frontier_of([[0.3, 0.3], [0.1, 0.6]])
        kept = restrict_to_cone(F_hat, RiskPoint(0.4, 0.4), n=1_000_000)
        assert kept.points.tolist() == [[0.3, 0.3]]
        assert kept.metadata["restricted_to"] == [0.4, 0.4]

    def test_restrict_empty_is_noop(self):
        F_hat = frontier_of(np.empty((0, 2)))
        assert restrict_to_cone(F_hat, RiskPoint(0.4, 0.4), n=100) is F_hat


class TestPointSets:
    """Hausdorff distances, argmax sets and the fairest point."""

    def test_hausdorff(self):
        assert hausdorff_distance(np.array([[0.0, 0.0]]), np.array([[0.0, 0.0], [3.0, 4.0]])) == pytest.approx(5.0)

    def test_hausdorff_needs_points(self):
        with pytest.raises(InputError, match="nonempty"):
            hausdorff_distance(np.empty((0, 2)), SQUARE)

    def test_argmax_outside_square(self):
        square = PolygonSupport(SQUARE - 0.5)
        result = argmax_set(square, RiskPoint(2.0, 0.0), grid=make_direction_grid(4))
        assert result.size == 1
        np.testing.assert_allclose(result.directions[0], [1.0, 0.0], atol=1e-12)
        assert result.supremum == pytest.approx(1.5)

    def test_argmax_invalid_arc(self, discrete_sfe):
        with pytest.raises(InputError, match="Invalid arc"):
            argmax_set(discrete_sfe, RiskPoint(0.3, 0.3), arc="quarter")

    def test_fairest_point_one_sided(self):
        point, side = fairest_point(SupportFunctionEstimate(one_sided_material()))
        assert side == "above"
        assert (point.e_r, point.e_b) == (pytest.approx(0.5), pytest.approx(1.0))
