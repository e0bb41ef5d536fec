"""
fairfrontier Inference

Test statistics and bootstrap-calibrated procedures:

- frontier and Pareto membership tests at a fixed or estimated point
- the less-discriminatory-alternative (LDA) test for a status-quo algorithm
- the weak group-skew test via a confidence set for (R, B)
- a confidence set for the frontier itself
- a confidence interval for the distance from the status quo to the fairest point

Every critical value comes from bootstrap.multiplier_bootstrap with the
numerical directional derivative. Candidate-grid procedures share one set of
bootstrap draws across candidates.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .bootstrap import (BootstrapConfig, BootstrapLaw, Functional, PerturbationSample, bootstrap_paths,
                        derivative_draws, multiplier_bootstrap)
from .core import (ADMISSIBLE_HALF, FULL_CIRCLE, PARETO_ARC, U1, U2, Dataset, DirectionGrid, GroupScale,
                   LossSpec, R, B, RiskPoint, compute_loss_quad, group_proportions, make_direction_grid)
from .errors import EmptyResultError, InputError
from .geometry import RiskGrid, argmax_set, fairest_point, kappa_default
from .report import jsonable
from .supportfn import SupportFunctionEstimate, etilde_directions, eval_h_Etilde, h_c_many


logger = logging.getLogger(__name__)

CELLS = 1 << 24
SKEW_AXIS = U1 - U2   # (u1 - u2)ᵀe = e_b - e_r


# ---------------------------------------------------------------------------
# Status-quo risk
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StatusQuoRisk:
    """Estimated group risks ê* of a status-quo algorithm a*."""
    z: np.ndarray            # (n, 2) Z_i^g
    e_hat: np.ndarray        # (2,)
    influence: np.ndarray    # (n, 2) Z_i^{g,*}
    scale: GroupScale
    a_star: np.ndarray

    @property
    def point(self) -> RiskPoint:
        return RiskPoint.of(self.e_hat)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    def as_array(self) -> np.ndarray:
        return self.e_hat.copy()


def treatment_probabilities(dataset: Dataset, a_star) -> np.ndarray:
    """Resolve a* given as an array, a policy object or a callable on X."""
    if hasattr(a_star, "treatment_probability"):
        values = a_star.treatment_probability(dataset.x)
    elif callable(a_star):
        values = a_star(dataset.x)
    else:
        values = a_star
    values = np.broadcast_to(np.asarray(values, dtype=float), (dataset.n,)).copy()
    return values


def estimate_status_quo(dataset: Dataset, loss: LossSpec, a_star) -> StatusQuoRisk:
    a = treatment_probabilities(dataset, a_star)
    bad = ~((a >= 0.0) & (a <= 1.0))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise InputError(f"Status-quo policy value {a[i]!r} at observation {i} outside [0, 1]")
    quad = compute_loss_quad(dataset, loss)
    scale = group_proportions(dataset)
    z = a[:, None] * quad.l1 + (1.0 - a[:, None]) * quad.l0
    mean_z = z.mean(axis=0)
    e_hat = mean_z / scale.mu
    member = np.column_stack([dataset.mask(R), dataset.mask(B)]).astype(float)
    influence = z / scale.mu - (mean_z / scale.mu ** 2) * member
    logger.info(f"Status-quo risks: e_r={e_hat[0]:.4f}, e_b={e_hat[1]:.4f}")
    return StatusQuoRisk(z, e_hat, influence, scale, a)


Target = Union[RiskPoint, StatusQuoRisk]


def _point_of(target: Target) -> np.ndarray:
    return target.as_array()


# ---------------------------------------------------------------------------
# Grids and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InferenceGrids:
    """Direction and candidate grids used by the tests."""
    full: DirectionGrid = field(default_factory=lambda: make_direction_grid(360, FULL_CIRCLE))
    half: DirectionGrid = field(default_factory=lambda: make_direction_grid(180, ADMISSIBLE_HALF))
    arc: DirectionGrid = field(default_factory=lambda: make_direction_grid(90, PARETO_ARC))
    candidates: int = 40
    e_candidates: int = 11
    cs_scale: float = 5.0
    c_bound: float = 50.0
    etilde_tol: float = 1e-8
    etilde_local: int = 101
    kappa_n: Optional[float] = None

    def kappa(self, n: int) -> float:
        return kappa_default(n) if self.kappa_n is None else float(self.kappa_n)

    def describe(self) -> dict:
        return {"full_directions": self.full.size, "half_directions": self.half.size,
                "pareto_directions": self.arc.size, "candidates": self.candidates,
                "e_candidates": self.e_candidates, "cs_scale": self.cs_scale, "c_bound": self.c_bound}


@dataclass
class TestResult:
    """Statistic, critical value and decision of one test."""
    test: str
    n: int
    alpha: float
    statistic: float
    critical_value: float
    decision: bool
    B: int
    s_n: float
    varsigma: float
    kappa_n: float
    seed: int
    grid_sizes: Dict = field(default_factory=dict)
    diagnostics: Dict = field(default_factory=dict)

    __test__ = False

    @property
    def reject(self) -> bool:
        return self.decision

    @property
    def label(self) -> str:
        return "reject" if self.decision else "fail to reject"

    def to_dict(self) -> dict:
        return jsonable(asdict(self))


@dataclass(frozen=True, eq=False)
class ConfidenceSet2D:
    """Retained candidates of a test-inversion confidence set."""
    points: np.ndarray
    metadata: Dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass
class ConfidenceInterval:
    """Union of branch intervals; lo and hi span the union."""
    lo: float
    hi: float
    estimate: float
    rho: str
    alpha: float
    branches: Dict[str, Optional[Tuple[float, float]]] = field(default_factory=dict)
    diagnostics: Dict = field(default_factory=dict)

    def contains(self, value: float) -> bool:
        return any(b is not None and b[0] <= value <= b[1] for b in self.branches.values())

    def to_dict(self) -> dict:
        return jsonable(asdict(self))


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise InputError(f"Invalid alpha: {alpha}. Must lie in (0, 1)")


def _level(alpha: float, varsigma: float) -> float:
    return min(1.0, 1.0 - alpha + varsigma)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def squared_euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return ((np.asarray(a) - np.asarray(b)) ** 2).sum(axis=-1)


def euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(squared_euclidean(a, b))


def manhattan(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(a) - np.asarray(b)).sum(axis=-1)


def chebyshev(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(a) - np.asarray(b)).max(axis=-1)


DISTANCES: Dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "squared_euclidean": squared_euclidean,
    "euclidean": euclidean,
    "manhattan": manhattan,
    "chebyshev": chebyshev,
}


def get_distance(name: str):
    if name not in DISTANCES:
        raise InputError(f"Invalid rho: {name}. Must be one of {list(DISTANCES)}")
    return DISTANCES[name]


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------

def _outer_family(points: np.ndarray, h: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """max_q (qᵀp - h(q)) for each draw row of h and each candidate p; shape (D, C)."""
    proj = points @ Q.T
    out = np.empty((h.shape[0], points.shape[0]))
    step = max(1, CELLS // max(1, h.shape[0] * Q.shape[0]))
    for s in range(0, points.shape[0], step):
        out[:, s:s + step] = (proj[None, s:s + step, :] - h[:, None, :]).max(axis=2)
    return out


def _cone_family(points: np.ndarray, h_neg_half: np.ndarray, Q_half: np.ndarray) -> np.ndarray:
    """max_q (-h_C(p)(q) - h(-q)) for each draw row and candidate; shape (D, C)."""
    hc = h_c_many(points, Q_half)
    out = np.empty((h_neg_half.shape[0], points.shape[0]))
    step = max(1, CELLS // max(1, h_neg_half.shape[0] * Q_half.shape[0]))
    for s in range(0, points.shape[0], step):
        out[:, s:s + step] = (-hc[None, s:s + step, :] - h_neg_half[:, None, :]).max(axis=2)
    return out


def frontier_functional(grids: InferenceGrids) -> Functional:
    """[max_q qᵀe - h(q)]₊ + [max_q -h_C(e)(q) - h(-q)]₋ at the point e carried in the sample."""
    Qf, Qh = grids.full.vectors, grids.half.vectors
    nf = Qf.shape[0]

    def fn(h: np.ndarray, e: np.ndarray) -> np.ndarray:
        outer = (e @ Qf.T - h[:, :nf]).max(axis=1)
        inner = (-h_c_many(e, Qh) - h[:, nf:]).max(axis=1)
        return np.maximum(outer, 0.0) + np.maximum(-inner, 0.0)

    return Functional(np.vstack([Qf, -Qh]), fn, "frontier")


def pareto_functional(grids: InferenceGrids) -> Functional:
    """[max_q qᵀe - h(q)]₊ + [max_{q on the Pareto arc} qᵀe - h(q)]₋."""
    Qf, Qa = grids.full.vectors, grids.arc.vectors
    nf = Qf.shape[0]

    def fn(h: np.ndarray, e: np.ndarray) -> np.ndarray:
        outer = (e @ Qf.T - h[:, :nf]).max(axis=1)
        arc = (e @ Qa.T - h[:, nf:]).max(axis=1)
        return np.maximum(outer, 0.0) + np.maximum(-arc, 0.0)

    return Functional(np.vstack([Qf, Qa]), fn, "pareto")


def frontier_family(grids: InferenceGrids, points: np.ndarray) -> Functional:
    """The frontier functional at each of a fixed set of candidate points."""
    Qf, Qh = grids.full.vectors, grids.half.vectors
    nf = Qf.shape[0]

    def fn(h: np.ndarray, e: np.ndarray) -> np.ndarray:
        outer = _outer_family(points, h[:, :nf], Qf)
        inner = _cone_family(points, h[:, nf:], Qh)
        return np.maximum(outer, 0.0) + np.maximum(-inner, 0.0)

    return Functional(np.vstack([Qf, -Qh]), fn, "frontier-family")


def support_equality_family(Q: np.ndarray, points: np.ndarray, column: int, u: np.ndarray,
                            name: str) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """[max_q qᵀp - h(q)]₊ + [uᵀp - h(u)]₋ per candidate p, h(u) read from `column`."""
    nq = Q.shape[0]
    along = points @ u

    def fn(h: np.ndarray, e: np.ndarray) -> np.ndarray:
        outer = _outer_family(points, h[:, :nq], Q)
        equality = along[None, :] - h[:, column][:, None]
        return np.maximum(outer, 0.0) + np.maximum(-equality, 0.0)

    fn.__name__ = name
    return fn


def _evaluate(phi_fn, sample: PerturbationSample) -> np.ndarray:
    """√n φ(ĥ, ê) for a functional evaluated on the sample's base point."""
    return np.sqrt(sample.n) * phi_fn(sample.h_hat[None, :], sample.e_hat[None, :])[0]


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def _statistic(sfe: SupportFunctionEstimate, phi: Functional, e: np.ndarray) -> float:
    h = sfe.h_many(phi.directions)
    return float(np.sqrt(sfe.n) * phi.fn(h[None, :], np.asarray(e, dtype=float)[None, :])[0])


def stat_frontier(sfe: SupportFunctionEstimate, e: RiskPoint, grids: Optional[InferenceGrids] = None) -> float:
    return _statistic(sfe, frontier_functional(grids or InferenceGrids()), e.as_array())


def stat_pareto(sfe: SupportFunctionEstimate, e: RiskPoint, grids: Optional[InferenceGrids] = None) -> float:
    return _statistic(sfe, pareto_functional(grids or InferenceGrids()), e.as_array())


def stat_lda(sfe: SupportFunctionEstimate, sq: StatusQuoRisk, grids: Optional[InferenceGrids] = None) -> float:
    return _statistic(sfe, frontier_functional(grids or InferenceGrids()), sq.e_hat)


# ---------------------------------------------------------------------------
# Membership tests
# ---------------------------------------------------------------------------

def _membership_test(name: str, sfe: SupportFunctionEstimate, target: Target, phi: Functional,
                     alpha: float, cfg: BootstrapConfig, grids: InferenceGrids) -> TestResult:
    _check_alpha(alpha)
    point = _point_of(target)
    statistic = _statistic(sfe, phi, point)
    law = multiplier_bootstrap(sfe, target, phi, cfg)
    critical = law.quantile(_level(alpha, cfg.varsigma)) + cfg.varsigma
    kappa = grids.kappa(sfe.n)
    outer = argmax_set(sfe, RiskPoint.of(point), "full", kappa, grid=grids.full)
    result = TestResult(
        test=name, n=sfe.n, alpha=alpha, statistic=statistic, critical_value=float(critical),
        decision=bool(statistic > critical), B=law.draws, s_n=law.step, varsigma=cfg.varsigma,
        kappa_n=kappa, seed=cfg.seed, grid_sizes=grids.describe(),
        diagnostics={"point": point, "estimated_point": isinstance(target, StatusQuoRisk),
                     "argmax_full_size": outer.size, "argmax_full_sup": outer.supremum},
    )
    logger.info(f"{name} test: T={statistic:.4f}, c={critical:.4f} -> {result.label}")
    return result


def test_frontier_point(sfe: SupportFunctionEstimate, e: Target, alpha: float = 0.05,
                        cfg: BootstrapConfig = BootstrapConfig(),
                        grids: Optional[InferenceGrids] = None) -> TestResult:
    """H0: e lies on the fairness-accuracy frontier (no alternative improves on it)."""
    return _membership_test("frontier", sfe, e, frontier_functional(grids or InferenceGrids()), alpha, cfg,
                            grids or InferenceGrids())


def test_lda(sfe: SupportFunctionEstimate, sq: StatusQuoRisk, alpha: float = 0.05,
             cfg: BootstrapConfig = BootstrapConfig(),
             grids: Optional[InferenceGrids] = None) -> TestResult:
    """H0: no less discriminatory alternative to the status quo exists."""
    grids = grids or InferenceGrids()
    return _membership_test("lda", sfe, sq, frontier_functional(grids), alpha, cfg, grids)


def test_pareto(sfe: SupportFunctionEstimate, e: Target, alpha: float = 0.05,
                cfg: BootstrapConfig = BootstrapConfig(),
                grids: Optional[InferenceGrids] = None) -> TestResult:
    """H0: e lies on the Pareto frontier."""
    grids = grids or InferenceGrids()
    return _membership_test("pareto", sfe, e, pareto_functional(grids), alpha, cfg, grids)


def frontier_confidence_set(sfe: SupportFunctionEstimate, candidates: RiskGrid, alpha: float = 0.05,
                            cfg: BootstrapConfig = BootstrapConfig(),
                            grids: Optional[InferenceGrids] = None) -> ConfidenceSet2D:
    """Candidates e with T^F(e) <= ĉ_{1-α+ς}(e) + ς."""
    _check_alpha(alpha)
    grids = grids or InferenceGrids()
    points = candidates.points
    if points.shape[0] == 0:
        return ConfidenceSet2D(np.empty((0, 2)), {"candidates": 0})
    phi = frontier_family(grids, points)
    sample = bootstrap_paths(sfe, phi.directions, None, cfg)
    statistic = _evaluate(phi.fn, sample)
    critical = BootstrapLaw(derivative_draws(phi, sample), sample.step).quantile(_level(alpha, cfg.varsigma))
    keep = statistic <= np.asarray(critical) + cfg.varsigma
    logger.info(f"Frontier confidence set: {int(keep.sum())} of {points.shape[0]} candidates retained")
    return ConfidenceSet2D(points[keep], {"candidates": int(points.shape[0]), "spacing": candidates.spacing,
                                          "alpha": alpha, **cfg.describe(sfe.n)})


# ---------------------------------------------------------------------------
# Candidate-pair confidence sets
# ---------------------------------------------------------------------------

def retained_pairs(t_a: np.ndarray, d_a: np.ndarray, t_b: np.ndarray, d_b: np.ndarray,
                   level: float) -> np.ndarray:
    """
    Mask of pairs (i, j) with t_a[i] + t_b[j] <= quantile_level(d_a[:, i] + d_b[:, j]).

    Pairs whose statistic exceeds the sum of the two draw maxima cannot be
    retained and are skipped before any quantile is computed.
    """
    total = t_a[:, None] + t_b[None, :]
    bound = d_a.max(axis=0)[:, None] + d_b.max(axis=0)[None, :]
    mask = np.zeros(total.shape, dtype=bool)
    ia, ib = np.nonzero(total <= bound)
    step = max(1, CELLS // max(1, d_a.shape[0]))
    for s in range(0, ia.shape[0], step):
        a, b = ia[s:s + step], ib[s:s + step]
        critical = np.quantile(d_a[:, a] + d_b[:, b], level, axis=0, method="inverted_cdf")
        mask[a, b] = total[a, b] <= critical
    return mask


def _half_width(sfe: SupportFunctionEstimate, grids: InferenceGrids, Q: np.ndarray) -> float:
    sd = np.sqrt(np.maximum(np.diag(sfe.covariance(Q)), 0.0)).max()
    return float(grids.cs_scale * max(sd, 1e-3) / np.sqrt(sfe.n))


def _candidates(center: np.ndarray, width: float, resolution: int, radius: float,
                region: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> RiskGrid:
    grid = RiskGrid.around(center - width, center + width, resolution, radius=radius)
    if region is not None:
        grid = RiskGrid(grid.points[region(grid.points)], grid.spacing, grid.shape)
    return grid


@dataclass(frozen=True, eq=False)
class SkewFamilies:
    """Per-candidate statistics and derivative draws for R̃ and B̃."""
    r_points: np.ndarray
    b_points: np.ndarray
    t_r: np.ndarray
    d_r: np.ndarray
    t_b: np.ndarray
    d_b: np.ndarray
    sample: PerturbationSample


def skew_directions(grids: InferenceGrids) -> np.ndarray:
    return np.vstack([grids.full.vectors, U1, U2])


def _skew_families(sfe: SupportFunctionEstimate, r_points: np.ndarray, b_points: np.ndarray,
                   cfg: BootstrapConfig, grids: InferenceGrids,
                   sample: Optional[PerturbationSample]) -> SkewFamilies:
    Q = grids.full.vectors
    if sample is None:
        sample = bootstrap_paths(sfe, skew_directions(grids), None, cfg)
    nq = Q.shape[0]
    phi_r = Functional(sample.directions, support_equality_family(Q, r_points, nq, U1, "R"), "R")
    phi_b = Functional(sample.directions, support_equality_family(Q, b_points, nq + 1, U2, "B"), "B")
    return SkewFamilies(r_points, b_points, _evaluate(phi_r.fn, sample), derivative_draws(phi_r, sample),
                        _evaluate(phi_b.fn, sample), derivative_draws(phi_b, sample), sample)


def test_weak_skew(sfe: SupportFunctionEstimate, alpha: float = 0.05, cfg: BootstrapConfig = BootstrapConfig(),
                   grids: Optional[InferenceGrids] = None,
                   rb_grid: Optional[Tuple[RiskGrid, RiskGrid]] = None,
                   sample: Optional[PerturbationSample] = None) -> TestResult:
    """
    H0: (u1 - u2)ᵀR · (u1 - u2)ᵀB >= 0, i.e. R and B are not strictly
    separated by the 45-degree line.

    Rejects when every retained (R̃, B̃) pair of the confidence set has a
    negative product. The reported statistic is minus the supremum of that
    product over the set, with critical value 0; an empty set gives +inf.
    """
    _check_alpha(alpha)
    grids = grids or InferenceGrids()
    radius = sfe.risk_bound()
    R_hat = sfe.support_points(U1)[0]
    B_hat = sfe.support_points(U2)[0]
    if rb_grid is None:
        width = _half_width(sfe, grids, grids.full.vectors)
        rb_grid = (_candidates(R_hat, width, grids.candidates, radius),
                   _candidates(B_hat, width, grids.candidates, radius))
    families = _skew_families(sfe, rb_grid[0].points, rb_grid[1].points, cfg, grids, sample)
    mask = retained_pairs(families.t_r, families.d_r, families.t_b, families.d_b, 1.0 - alpha)

    ia, ib = np.nonzero(mask)
    if ia.size:
        product = (families.r_points[ia] @ SKEW_AXIS) * (families.b_points[ib] @ SKEW_AXIS)
        supremum = float(product.max())
    else:
        supremum = -np.inf
        logger.warning("Weak-skew confidence set for (R, B) is empty")
    statistic = -supremum
    result = TestResult(
        test="skew", n=sfe.n, alpha=alpha, statistic=statistic, critical_value=0.0,
        decision=bool(statistic > 0.0), B=families.sample.draws, s_n=families.sample.step, varsigma=0.0,
        kappa_n=grids.kappa(sfe.n), seed=cfg.seed, grid_sizes=grids.describe(),
        diagnostics={"empty_cs": not bool(ia.size), "retained_pairs": int(ia.size),
                     "R_hat": R_hat, "B_hat": B_hat,
                     "r_candidates": int(rb_grid[0].points.shape[0]), "b_candidates": int(rb_grid[1].points.shape[0]),
                     "r_spacing": rb_grid[0].spacing, "b_spacing": rb_grid[1].spacing,
                     "sup_product": supremum},
    )
    logger.info(f"skew test: sup product={supremum:.4g} over {ia.size} pairs -> {result.label}")
    return result


def rb_pair_in_confidence_set(sfe: SupportFunctionEstimate, R_point: RiskPoint, B_point: RiskPoint,
                              alpha: float = 0.05, cfg: BootstrapConfig = BootstrapConfig(),
                              grids: Optional[InferenceGrids] = None,
                              sample: Optional[PerturbationSample] = None) -> bool:
    """Whether a given (R, B) pair is retained by the confidence set of the skew test."""
    _check_alpha(alpha)
    grids = grids or InferenceGrids()
    families = _skew_families(sfe, R_point.as_array()[None, :], B_point.as_array()[None, :], cfg, grids, sample)
    return bool(retained_pairs(families.t_r, families.d_r, families.t_b, families.d_b, 1.0 - alpha)[0, 0])


# ---------------------------------------------------------------------------
# Distance to the fairest point
# ---------------------------------------------------------------------------

SIDE_DIRECTIONS = {
    "above": (U2 - U1) / np.sqrt(2.0),   # F above the line: maximize e_r - e_b
    "below": (U1 - U2) / np.sqrt(2.0),
}
SIDE_REGIONS = {
    "above": lambda p: p[:, 0] <= p[:, 1],
    "below": lambda p: p[:, 1] <= p[:, 0],
}


def _e_candidates(target: Target, grids: InferenceGrids) -> np.ndarray:
    if isinstance(target, StatusQuoRisk):
        sd = float(np.sqrt(target.influence.var(axis=0)).max())
        width = grids.cs_scale * max(sd, 1e-3) / np.sqrt(target.n)
        return RiskGrid.around(target.e_hat - width, target.e_hat + width, grids.e_candidates).points
    return target.as_array()[None, :]


def _l1_family(points: np.ndarray) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    def fn(h: np.ndarray, e: np.ndarray) -> np.ndarray:
        return np.abs(points[None, :, :] - e[:, None, :]).sum(axis=-1)
    return fn


def distance_to_F_ci(sfe: SupportFunctionEstimate, sq: Target, rho: str = "squared_euclidean",
                     alpha: float = 0.05, cfg: BootstrapConfig = BootstrapConfig(),
                     grids: Optional[InferenceGrids] = None) -> ConfidenceInterval:
    """
    Confidence interval for ρ(e*, F), the distance from the status quo to the fairest point.

    The interval is the union of three branches: F on the 45-degree line,
    F above it and F below it. Every branch runs at level 1 - α + ς, and a
    side branch is skipped when the estimated set lies wholly on the other side.
    """
    _check_alpha(alpha)
    grids = grids or InferenceGrids()
    distance = get_distance(rho)
    n = sfe.n
    root_n = np.sqrt(n)
    radius = sfe.risk_bound()
    e_point = _point_of(sq)
    Q = grids.full.vectors
    nq = Q.shape[0]

    etilde = eval_h_Etilde(sfe, grids.c_bound, grids.etilde_tol)
    blocks = [Q, SIDE_DIRECTIONS["above"][None, :], SIDE_DIRECTIONS["below"][None, :]]
    if etilde.bounded:
        cell = 2.0 * grids.c_bound / 200.0
        local_c = np.linspace(etilde.c_star - cell, etilde.c_star + cell, grids.etilde_local)
        blocks.append(etilde_directions(local_c))
    directions = np.vstack(blocks)
    sample = bootstrap_paths(sfe, directions, sq, cfg)
    level = _level(alpha, cfg.varsigma)

    branches: Dict[str, Optional[Tuple[float, float]]] = {}
    diagnostics: Dict = {"etilde_bounded": etilde.bounded, "etilde_side": etilde.side, "c_star": etilde.c_star}

    if etilde.bounded:
        fairest = etilde.fairest.as_array()
        estimate = float(distance(e_point, fairest))

        def phi45(h: np.ndarray, e: np.ndarray) -> np.ndarray:
            low = h[:, nq + 2:].min(axis=1)
            return distance(e, np.column_stack([-low, -low]))

        draws = np.abs(derivative_draws(Functional(directions, phi45, "distance-45"), sample))
        critical = float(np.quantile(draws, level, method="inverted_cdf")) + cfg.varsigma
        branches["45"] = (max(0.0, estimate - critical / root_n), estimate + critical / root_n)
        diagnostics["critical_45"] = critical
        diagnostics["fairest"] = fairest
    else:
        branches["45"] = None
        fairest, _ = fairest_point(sfe, grids.c_bound, grids.etilde_tol)
        fairest = fairest.as_array()
        estimate = float(distance(e_point, fairest))
        diagnostics["fairest"] = fairest

    e_cands = _e_candidates(sq, grids)
    phi_e = Functional(directions, _l1_family(e_cands), "e-equality")
    t_e = _evaluate(phi_e.fn, sample)
    d_e = derivative_draws(phi_e, sample)
    width = _half_width(sfe, grids, Q)
    for offset, side in ((nq, "above"), (nq + 1, "below")):
        if etilde.side not in ("crosses", side):
            # the feasible set lies wholly on the other side of the 45-degree line
            branches[side] = None
            diagnostics[f"{side}_skipped"] = True
            continue
        v = SIDE_DIRECTIONS[side]
        center = sfe.support_points(v)[0]
        f_grid = _candidates(center, width, grids.candidates, radius, SIDE_REGIONS[side])
        if f_grid.points.shape[0] == 0:
            branches[side] = None
            diagnostics[f"{side}_candidates"] = 0
            continue
        phi_f = Functional(directions, support_equality_family(Q, f_grid.points, offset, v, side), side)
        t_f = _evaluate(phi_f.fn, sample)
        d_f = derivative_draws(phi_f, sample)
        mask = retained_pairs(t_e, d_e, t_f, d_f, level)
        ia, ib = np.nonzero(mask)
        diagnostics[f"{side}_candidates"] = int(f_grid.points.shape[0])
        diagnostics[f"{side}_retained_pairs"] = int(ia.size)
        if ia.size == 0:
            branches[side] = None
            continue
        values = distance(e_cands[ia], f_grid.points[ib])
        branches[side] = (float(values.min()), float(values.max()))

    live = [b for b in branches.values() if b is not None]
    if not live:
        raise EmptyResultError("degenerate: no branch feasible")
    interval = ConfidenceInterval(
        lo=min(b[0] for b in live), hi=max(b[1] for b in live), estimate=estimate, rho=rho, alpha=alpha,
        branches=branches,
        diagnostics={**diagnostics, "e_candidates": int(e_cands.shape[0]), "grid_sizes": grids.describe(),
                     **cfg.describe(n)},
    )
    logger.info(f"Distance CI ({rho}): estimate {estimate:.5f}, [{interval.lo:.5f}, {interval.hi:.5f}]")
    return interval
