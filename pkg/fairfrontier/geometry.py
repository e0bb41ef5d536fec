"""
fairfrontier Geometry

Set estimates derived from the support function: the feasible-set polygon,
the fairness-accuracy frontier, the Pareto arc, argmax direction sets, the
fairest point, frontier-point selection and Hausdorff distances.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import directed_hausdorff

from .core import (ADMISSIBLE_HALF, FULL_CIRCLE, PARETO_ARC, U1, U2, DirectionGrid, RiskPoint,
                   is_full_circle, make_direction_grid)
from .errors import EmptyResultError, InputError
from .supportfn import SupportFunctionEstimate, eval_h_Etilde, h_c_many


logger = logging.getLogger(__name__)

INSIDE_TOL = 1e-12
DEDUP_TOL = 1e-12
POINT_CHUNK = 2048

# Directions whose h_C(e*) constraints cut out C(e*).
CONE_DIRECTIONS = np.array([U1 - U2, U2 - U1, -U1, -U2])


def kappa_default(n: int) -> float:
    """κ_n = sqrt(log n)."""
    return float(np.sqrt(np.log(n)))


# Sutherland-Hodgman against one half-plane {z: q·z <= h}.
def clip_polygon(vertices: np.ndarray, q: np.ndarray, h: float) -> np.ndarray:
    if vertices.shape[0] == 0:
        return vertices
    values = vertices @ q - h
    output: List[np.ndarray] = []
    count = vertices.shape[0]
    for i in range(count):
        current, nxt = vertices[i], vertices[(i + 1) % count]
        v_cur, v_nxt = values[i], values[(i + 1) % count]
        cur_in, nxt_in = v_cur <= INSIDE_TOL, v_nxt <= INSIDE_TOL
        if cur_in:
            output.append(current)
        if cur_in != nxt_in:
            t = v_cur / (v_cur - v_nxt)
            output.append(current + t * (nxt - current))
    if not output:
        return np.empty((0, 2))
    return _dedupe(np.array(output))


def _dedupe(vertices: np.ndarray) -> np.ndarray:
    keep = [vertices[0]]
    for v in vertices[1:]:
        if np.abs(v - keep[-1]).max() > DEDUP_TOL:
            keep.append(v)
    if len(keep) > 1 and np.abs(keep[0] - keep[-1]).max() <= DEDUP_TOL:
        keep.pop()
    return np.array(keep)


def intersect_halfplanes(normals: np.ndarray, offsets: np.ndarray, bound: float) -> np.ndarray:
    """Counterclockwise vertices of [-bound, bound]² ∩ {z: q_j·z <= h_j}."""
    polygon = np.array([[-bound, -bound], [bound, -bound], [bound, bound], [-bound, bound]], dtype=float)
    for q, h in zip(np.atleast_2d(normals), np.atleast_1d(offsets)):
        polygon = clip_polygon(polygon, q, float(h))
        if polygon.shape[0] == 0:
            break
    return polygon


def polygon_support(vertices: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Support function of a vertex set at each row of Q."""
    return (np.atleast_2d(Q) @ vertices.T).max(axis=1)


@dataclass(frozen=True, eq=False)
class PolygonSupport:
    """Exact support function of a vertex set, usable wherever an estimate is."""
    vertices: np.ndarray
    n: int = 1

    def h_many(self, Q: np.ndarray) -> np.ndarray:
        return polygon_support(self.vertices, Q)


def is_convex(vertices: np.ndarray) -> bool:
    """All consecutive edge cross products share a sign."""
    if vertices.shape[0] < 3:
        return True
    edges = np.roll(vertices, -1, axis=0) - vertices
    cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
    scale = max(1.0, float(np.abs(vertices).max())) ** 2
    return bool((cross >= -1e-12 * scale).all() or (cross <= 1e-12 * scale).all())


@dataclass(frozen=True, eq=False)
class FeasibleSetEstimate:
    """Polygon Ê = ∩_q {z: qᵀz <= ĥ(q)} inside the bounding square."""
    vertices: np.ndarray
    grid: DirectionGrid
    bound: float

    @property
    def empty(self) -> bool:
        return self.vertices.shape[0] == 0

    def support(self, Q: np.ndarray) -> np.ndarray:
        return polygon_support(self.vertices, Q)

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def diameter(self) -> float:
        if self.vertices.shape[0] < 2:
            return 0.0
        diffs = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((diffs ** 2).sum(axis=-1)).max())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"vertex": np.arange(self.vertices.shape[0]),
                             "e_r": self.vertices[:, 0], "e_b": self.vertices[:, 1]})


def estimate_feasible_set(sfe: SupportFunctionEstimate, grid: DirectionGrid,
                          bound: Optional[float] = None) -> FeasibleSetEstimate:
    if not is_full_circle(grid.arc):
        raise InputError("Feasible-set estimation needs a full-circle direction grid")
    bound = sfe.risk_bound() if bound is None else bound
    vertices = intersect_halfplanes(grid.vectors, sfe.h_many(grid.vectors), bound)
    if vertices.shape[0] == 0:
        logger.warning("Estimated feasible set is empty")
    return FeasibleSetEstimate(vertices, grid, bound)


@dataclass(frozen=True, eq=False)
class RiskGrid:
    """Rectangular grid of candidate risk pairs."""
    points: np.ndarray
    spacing: Tuple[float, float]
    shape: Tuple[int, int]

    @classmethod
    def around(cls, lo: np.ndarray, hi: np.ndarray, resolution: int,
               radius: Optional[float] = None) -> "RiskGrid":
        """Grid over the box [lo, hi], optionally restricted to the ball of given radius."""
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        hi = np.where(hi > lo, hi, lo + 1e-9)
        xs = np.linspace(lo[0], hi[0], resolution)
        ys = np.linspace(lo[1], hi[1], resolution)
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        points = np.column_stack([gx.ravel(), gy.ravel()])
        if radius is not None:
            points = points[np.linalg.norm(points, axis=1) <= radius]
        spacing = (float(xs[1] - xs[0]) if resolution > 1 else 0.0,
                   float(ys[1] - ys[0]) if resolution > 1 else 0.0)
        return cls(points, spacing, (resolution, resolution))


def frontier_criterion(sfe: SupportFunctionEstimate, points: np.ndarray, full: DirectionGrid,
                       half: DirectionGrid, threads: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Both brackets of the frontier criterion at each point.

    Returns ([max_q qᵀe - ĥ(q)]₊ over the full circle,
             [max_q -h_C(e)(q) - ĥ(-q)]₋ over the admissible half).
    """
    h_full = sfe.h_many(full.vectors)
    h_neg_half = sfe.h_many(-half.vectors)

    def chunk(part: slice) -> Tuple[np.ndarray, np.ndarray]:
        pts = points[part]
        outer = (pts @ full.vectors.T - h_full).max(axis=1)
        inner = (-h_c_many(pts, half.vectors) - h_neg_half).max(axis=1)
        return np.maximum(outer, 0.0), np.maximum(-inner, 0.0)

    parts = [slice(s, min(s + POINT_CHUNK, points.shape[0])) for s in range(0, points.shape[0], POINT_CHUNK)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(chunk, parts))
    else:
        results = [chunk(p) for p in parts]
    if not results:
        return np.empty(0), np.empty(0)
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


@dataclass(frozen=True, eq=False)
class FrontierEstimate:
    """Grid points retained by the frontier criterion."""
    points: np.ndarray
    criterion: np.ndarray
    kappa_n: float
    threshold: float
    grid_spacing: Tuple[float, float]
    grid_shape: Tuple[int, int]
    metadata: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"e_r": self.points[:, 0], "e_b": self.points[:, 1], "criterion": self.criterion})


def frontier_grid(feasible: FeasibleSetEstimate, kappa_n: float, n: int, resolution: int = 400) -> RiskGrid:
    """Grid over the bounding box of Ê inflated by 2κ_n/√n, clipped to B_C."""
    if feasible.empty:
        raise EmptyResultError("Cannot build a frontier grid around an empty feasible set")
    lo, hi = feasible.bounding_box()
    pad = 2.0 * kappa_n / np.sqrt(n)
    return RiskGrid.around(lo - pad, hi + pad, resolution, radius=feasible.bound)


def estimate_frontier(sfe: SupportFunctionEstimate, kappa_n: float, e_grid: RiskGrid,
                      full: Optional[DirectionGrid] = None, half: Optional[DirectionGrid] = None,
                      threads: int = 1) -> FrontierEstimate:
    full = full or sfe.grid or make_direction_grid(1000, FULL_CIRCLE)
    half = half or make_direction_grid(500, ADMISSIBLE_HALF)
    outer, inner = frontier_criterion(sfe, e_grid.points, full, half, threads)
    criterion = outer + inner
    threshold = kappa_n / np.sqrt(sfe.n)
    keep = criterion <= threshold
    estimate = FrontierEstimate(e_grid.points[keep], criterion[keep], kappa_n, float(threshold),
                                e_grid.spacing, e_grid.shape,
                                {"full_directions": full.size, "half_directions": half.size,
                                 "candidates": int(e_grid.points.shape[0])})
    if estimate.empty:
        logger.warning(f"Empty frontier estimate (threshold {threshold:.4g})")
    else:
        logger.info(f"Frontier estimate: {int(keep.sum())} of {keep.shape[0]} grid points retained")
    return estimate


@dataclass(frozen=True, eq=False)
class ParetoEstimate:
    directions: DirectionGrid
    points: np.ndarray

    @property
    def R(self) -> RiskPoint:
        return RiskPoint.of(self.points[0])

    @property
    def B(self) -> RiskPoint:
        return RiskPoint.of(self.points[-1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"angle": self.directions.angles, "q1": self.directions.vectors[:, 0],
                             "q2": self.directions.vectors[:, 1],
                             "e_r": self.points[:, 0], "e_b": self.points[:, 1]})


def estimate_pareto(sfe: SupportFunctionEstimate, arc_grid: Optional[DirectionGrid] = None) -> ParetoEstimate:
    arc_grid = arc_grid or make_direction_grid(250, PARETO_ARC)
    return ParetoEstimate(arc_grid, sfe.support_points(arc_grid.vectors))


@dataclass(frozen=True, eq=False)
class ArgmaxSet:
    """Grid directions within κ_n/√n of the supremum of qᵀe - ĥ(q)."""
    directions: np.ndarray
    values: np.ndarray
    arc: str
    supremum: float

    @property
    def size(self) -> int:
        return self.directions.shape[0]


ARC_NAMES = {"full": FULL_CIRCLE, "pareto": PARETO_ARC, "half": ADMISSIBLE_HALF}


def argmax_set(sfe, e: RiskPoint, arc: str = "full", kappa_n: float = 0.0,
               grid: Optional[DirectionGrid] = None) -> ArgmaxSet:
    if arc not in ARC_NAMES:
        raise InputError(f"Invalid arc: {arc}. Must be one of {list(ARC_NAMES)}")
    grid = grid or make_direction_grid(1000 if arc == "full" else 250, ARC_NAMES[arc])
    values = grid.vectors @ e.as_array() - sfe.h_many(grid.vectors)
    top = float(values.max())
    keep = values >= top - kappa_n / np.sqrt(sfe.n)
    return ArgmaxSet(grid.vectors[keep], values[keep], arc, top)


def fairest_point(sfe: SupportFunctionEstimate, c_bound: float = 50.0, tol: float = 1e-8) -> Tuple[RiskPoint, str]:
    """
    The feasible point with the smallest |e_r - e_b|, and the side tag.

    Sets crossing the 45-degree line give the lowest point on it; one-sided
    sets give the support point in the direction that shrinks the gap.
    """
    etilde = eval_h_Etilde(sfe, c_bound, tol)
    if etilde.bounded:
        return etilde.fairest, etilde.side
    if etilde.side == "above":
        q = (U2 - U1) / np.sqrt(2.0)
    else:
        q = (U1 - U2) / np.sqrt(2.0)
    return RiskPoint.of(sfe.support_points(q)[0]), etilde.side


def select_frontier_point(F_hat: FrontierEstimate, C: float) -> RiskPoint:
    """Retained point closest to e0 = 2C(-1/√2, -1/√2), ties to smaller e_r then e_b."""
    if F_hat.empty:
        raise EmptyResultError("Cannot select a point from an empty frontier estimate")
    anchor = 2.0 * C * np.array([-1.0, -1.0]) / np.sqrt(2.0)
    dist = np.linalg.norm(F_hat.points - anchor, axis=1)
    close = np.flatnonzero(dist <= dist.min() + 1e-12 * max(1.0, dist.min()))
    candidates = F_hat.points[close]
    order = np.lexsort((candidates[:, 1], candidates[:, 0]))
    return RiskPoint.of(candidates[order[0]])


def restrict_to_cone(F_hat: FrontierEstimate, e_star: RiskPoint, n: int) -> FrontierEstimate:
    """Keep frontier points that also lie in C(e*) up to κ_n/√n."""
    if F_hat.empty:
        return F_hat
    slack = F_hat.kappa_n / np.sqrt(n)
    cone = CONE_DIRECTIONS @ F_hat.points.T - h_c_many(e_star.as_array(), CONE_DIRECTIONS)[:, None]
    violation = np.maximum(cone.max(axis=0), 0.0)
    keep = violation <= slack
    logger.info(f"C(e*) restriction keeps {int(keep.sum())} of {keep.shape[0]} frontier points")
    metadata = dict(F_hat.metadata, restricted_to=list(e_star.as_array()))
    return FrontierEstimate(F_hat.points[keep], F_hat.criterion[keep], F_hat.kappa_n, F_hat.threshold,
                            F_hat.grid_spacing, F_hat.grid_shape, metadata)


def hausdorff_distance(A: np.ndarray, B: np.ndarray) -> float:
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise InputError("Hausdorff distance needs two nonempty point sets")
    return float(max(directed_hausdorff(A, B)[0], directed_hausdorff(B, A)[0]))


def support_distance(A: np.ndarray, B: np.ndarray, grid: DirectionGrid) -> float:
    """Hausdorff distance of two convex polygons via their support functions."""
    return float(np.abs(polygon_support(A, grid.vectors) - polygon_support(B, grid.vectors)).max())
