"""
fairfrontier Policies

Decision rules that attain points of the frontier: the threshold rule
1{k(Δθ̂(x), M̂q) > τ}, its capacity-constrained cutoff, evaluation on a
held-out split, recovery of the direction that attains a given risk pair,
and the LDA policy built from the frontier restricted to C(e*).

Policies only read covariates; the group label is never an input.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Protocol, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from sklearn.model_selection import train_test_split

from .core import (ADMISSIBLE_HALF, FULL_CIRCLE, Dataset, Direction, DirectionGrid, GroupScale, LossSpec,
                   RiskPoint, compute_loss_quad, group_proportions, make_direction_grid)
from .dataio import write_csv
from .errors import EmptyResultError, InputError
from .geometry import (estimate_feasible_set, estimate_frontier, fairest_point, frontier_grid,
                       restrict_to_cone, select_frontier_point)
from .nuisance import DeltaThetaModel, NuisanceLearner, fit_delta_theta
from .supportfn import SupportFunctionEstimate, cross_fit_estimate


logger = logging.getLogger(__name__)

TIE_TOL = 1e-12

NAMED_DIRECTIONS: Dict[str, Direction] = {
    "rawlsian": Direction(-1.0, 0.0),
    "majority": Direction(0.0, -1.0),
    "utilitarian": Direction(-1.0 / np.sqrt(2.0), -1.0 / np.sqrt(2.0)),
}
VALID_RULES = ["rawlsian", "majority", "utilitarian", "egalitarian", "lda", "angle:<radians>"]


class Policy(Protocol):
    def treatment_probability(self, x: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True, eq=False)
class ThresholdPolicy:
    """a(x) = 1{k(Δθ̂(x), M̂q) > τ}."""
    model: DeltaThetaModel
    scale: GroupScale
    q: Direction
    capacity: Optional[float] = None
    cutoff: float = 0.0
    learner: dict = field(default_factory=dict)

    def k(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.model.predict(x), dtype=float) @ (self.scale.m * self.q.as_array())

    def decide(self, x: np.ndarray) -> np.ndarray:
        return (self.k(x) > self.cutoff).astype(np.int8)

    def treatment_probability(self, x: np.ndarray) -> np.ndarray:
        return self.decide(x).astype(float)

    def metadata(self) -> dict:
        return {"q": [self.q.q1, self.q.q2], "angle": self.q.angle, "cutoff": self.cutoff,
                "capacity": self.capacity, "mu": self.scale.mu.tolist(), "learner": self.learner}


@dataclass(frozen=True, eq=False)
class ScorePolicy:
    """A status-quo rule given as one treatment probability per row."""
    scores: np.ndarray
    source: str = "scores"

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        if not ((scores >= 0.0) & (scores <= 1.0)).all():
            raise InputError(f"Policy scores from {self.source} must lie in [0, 1]")
        object.__setattr__(self, "scores", scores)

    def treatment_probability(self, x: np.ndarray) -> np.ndarray:
        if np.shape(x)[0] != self.scores.shape[0]:
            raise InputError(f"Policy scores cover {self.scores.shape[0]} rows, data has {np.shape(x)[0]}")
        return self.scores


@dataclass(frozen=True)
class ConstantPolicy:
    """Treat every row with the same probability (0 = never, 1 = always)."""
    value: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise InputError(f"Invalid constant policy: {self.value}. Must lie in [0, 1]")

    def treatment_probability(self, x: np.ndarray) -> np.ndarray:
        return np.full(np.shape(x)[0], float(self.value))


@dataclass(frozen=True, eq=False)
class SplitPlan:
    train: np.ndarray
    eval: np.ndarray
    ratio: float
    seed: int

    def apply(self, dataset: Dataset) -> Tuple[Dataset, Dataset]:
        return dataset.subset(self.train), dataset.subset(self.eval)


def make_split(n: int, ratio: float = 0.5, seed: int = 0) -> SplitPlan:
    """Random train/eval partition with round(ratio * n) training rows."""
    if not 0.0 < ratio < 1.0:
        raise InputError(f"Invalid split ratio: {ratio}. Must lie in (0, 1)")
    n_train = int(round(ratio * n))
    if n_train < 1 or n_train > n - 1:
        raise InputError(f"Split ratio {ratio} leaves an empty half for n={n}")
    train, held = train_test_split(np.arange(n), train_size=n_train, random_state=seed, shuffle=True)
    return SplitPlan(np.sort(train), np.sort(held), ratio, seed)


def build_policy(train: Dataset, loss: LossSpec, learner: NuisanceLearner, q: Union[Direction, np.ndarray],
                 capacity: Optional[float] = None, seed: Optional[int] = None) -> ThresholdPolicy:
    """Fit Δθ̂ once on every training row and freeze the threshold rule for q."""
    if not isinstance(q, Direction):
        q = Direction(*(float(v) for v in np.asarray(q, dtype=float)))
    if capacity is not None and not 0.0 < capacity <= 1.0:
        raise InputError(f"Invalid capacity: {capacity}. Must lie in (0, 1]")
    scale = group_proportions(train)
    model = fit_delta_theta(train, loss, learner, seed)
    policy = ThresholdPolicy(model, scale, q, capacity, 0.0, learner.describe())
    if capacity is not None:
        k_train = policy.k(train.x)
        cutoff = max(0.0, float(np.quantile(k_train, 1.0 - capacity, method="inverted_cdf")))
        policy = ThresholdPolicy(model, scale, q, capacity, cutoff, learner.describe())
    logger.info(f"Built threshold policy: q=({q.q1:.4f}, {q.q2:.4f}), cutoff={policy.cutoff:.4g}")
    return policy


def evaluate_decisions(dataset: Dataset, loss: LossSpec, decisions: np.ndarray) -> RiskPoint:
    """Per-group mean of ℓ(0, Y) + (ℓ(1, Y) - ℓ(0, Y)) a."""
    a = np.asarray(decisions, dtype=float)
    if a.shape != (dataset.n,):
        raise InputError(f"Decision vector has shape {a.shape}, expected ({dataset.n},)")
    scale = group_proportions(dataset)
    quad = compute_loss_quad(dataset, loss)
    total = (quad.l0 + quad.delta * a[:, None]).mean(axis=0)
    return RiskPoint.of(total / scale.mu)


def evaluate_policy(policy: Policy, eval_data: Dataset, loss: LossSpec) -> RiskPoint:
    risk = evaluate_decisions(eval_data, loss, policy.treatment_probability(eval_data.x))
    logger.info(f"Evaluated policy risks: e_r={risk.e_r:.4f}, e_b={risk.e_b:.4f}")
    return risk


def q_star_hat(sfe, e_hat: RiskPoint, grid: Optional[DirectionGrid] = None) -> Direction:
    """
    argmax over the circle of qᵀê - ĥ(q).

    A unique grid maximizer is refined by golden section between its two
    neighbours; tied maximizers return the first one on the grid.
    """
    grid = grid or getattr(sfe, "grid", None) or make_direction_grid(1000, FULL_CIRCLE)
    e = e_hat.as_array()
    values = grid.vectors @ e - sfe.h_many(grid.vectors)
    i = int(np.argmax(values))
    top = float(values[i])
    if int((values >= top - TIE_TOL).sum()) > 1 or grid.size < 3:
        return Direction.from_angle(float(grid.angles[i]))

    def objective(angle: float) -> float:
        q = np.array([[np.cos(angle), np.sin(angle)]])
        return -float(q[0] @ e - sfe.h_many(q)[0])

    angle = float(grid.angles[i])
    step = grid.spacing
    try:
        result = minimize_scalar(objective, bracket=(angle - step, angle, angle + step), method="golden", tol=1e-10)
        if -result.fun > top and abs(result.x - angle) <= step:
            angle = float(result.x)
    except ValueError:
        pass
    return Direction.from_angle(angle)


def resolve_direction(rule: str, sfe: Optional[SupportFunctionEstimate] = None,
                      c_bound: float = 50.0) -> Direction:
    """Named direction, `angle:<radians>`, or the egalitarian direction recovered from sfe."""
    if rule in NAMED_DIRECTIONS:
        return NAMED_DIRECTIONS[rule]
    if rule.startswith("angle:"):
        try:
            return Direction.from_angle(float(rule.split(":", 1)[1]))
        except ValueError:
            raise InputError(f"Invalid policy angle: {rule}") from None
    if rule == "egalitarian":
        if sfe is None:
            raise InputError("egalitarian policy needs a full-sample support-function estimate")
        point, side = fairest_point(sfe, c_bound)
        logger.info(f"Egalitarian target ({side}): ({point.e_r:.4f}, {point.e_b:.4f})")
        return q_star_hat(sfe, point)
    raise InputError(f"Invalid policy: {rule}. Must be one of {VALID_RULES}")


@dataclass(frozen=True, eq=False)
class LdaPolicyResult:
    policy: ThresholdPolicy
    target: RiskPoint
    risk: RiskPoint
    e_star: RiskPoint
    region_size: int

    @property
    def preferred(self) -> bool:
        return self.risk.dominates(self.e_star)


def lda_policy(train: Dataset, eval_data: Dataset, loss: LossSpec, learner: NuisanceLearner,
               e_star: RiskPoint, kappa_n: float, K: int = 5, seed: int = 0,
               full: Optional[DirectionGrid] = None, half: Optional[DirectionGrid] = None,
               resolution: int = 400, threads: int = 1) -> LdaPolicyResult:
    """
    Policy attaining a frontier point preferred to e*.

    Estimates F̂ on the training half, keeps the points inside C(e*) up to
    κ_n/√n, selects one, recovers its direction and evaluates the rule on
    the evaluation half.
    """
    full = full or make_direction_grid(1000, FULL_CIRCLE)
    half = half or make_direction_grid(500, ADMISSIBLE_HALF)
    sfe = cross_fit_estimate(train, loss, learner, K, seed, full, threads)
    feasible = estimate_feasible_set(sfe, full)
    e_grid = frontier_grid(feasible, kappa_n, sfe.n, resolution)
    region = restrict_to_cone(estimate_frontier(sfe, kappa_n, e_grid, full, half, threads), e_star, sfe.n)
    if region.empty:
        raise EmptyResultError("no estimated LDA region")
    target = select_frontier_point(region, sfe.risk_bound())
    q = q_star_hat(sfe, target, full)
    policy = build_policy(train, loss, learner, q, seed=seed)
    risk = evaluate_policy(policy, eval_data, loss)
    return LdaPolicyResult(policy, target, risk, e_star, int(region.points.shape[0]))


def export_policy(policy: ThresholdPolicy, dataset: Dataset, path: Path) -> Tuple[Path, Path]:
    """Write (row_id, k, decision) as CSV and the policy metadata as JSON beside it."""
    path = Path(path)
    frame = pd.DataFrame({"row_id": np.arange(dataset.n), "k": policy.k(dataset.x),
                          "decision": policy.decide(dataset.x)})
    write_csv(frame, path)
    meta_path = path.with_suffix(".json")
    with open(meta_path, "w") as f:
        json.dump(policy.metadata(), f, sort_keys=True, indent=2)
        f.write("\n")
    return path, meta_path
