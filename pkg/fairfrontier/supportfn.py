"""
fairfrontier Support Function Estimation

Debiased estimates of the support function h_E(q) and support set s_E(q) of
the feasible risk set, the per-observation influence values and their
covariance kernel, the support function of the improvement cone C(e*),
and the 45-degree restricted value h_Ẽ.

All evaluations accept arbitrary (non-unit) directions as rows of a
(N, 2) array. The indicator 1{k > 0} is strict.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from .core import (B, R, U1, Dataset, DirectionGrid, DirectionLike, GroupScale, LossQuad, LossSpec,
                   RiskPoint, as_vector, compute_loss_quad, group_proportions)
from .errors import InputError
from .nuisance import assign_folds, fit_cross_fit


logger = logging.getLogger(__name__)

MAX_CELLS = 1 << 24

# Direction along which the 45-degree line is traversed.
ETILDE_SHIFT = np.array([1.0, -1.0])


def k_value(delta_theta: np.ndarray, scale: GroupScale, q: DirectionLike) -> float:
    """k(Δθ, Mq) = qᵀ M Δθ."""
    return float(as_vector(q) @ (scale.m * np.asarray(delta_theta, dtype=float)))


@dataclass(frozen=True, eq=False)
class ScoreMaterial:
    """Everything the score ζ_i needs, aligned to dataset row order."""
    l0: np.ndarray
    l1: np.ndarray
    delta_theta: np.ndarray
    scale: GroupScale
    group: np.ndarray

    def __post_init__(self):
        n = self.l0.shape[0]
        for name in ("l0", "l1", "delta_theta"):
            arr = getattr(self, name)
            if arr.shape != (n, 2):
                raise InputError(f"ScoreMaterial.{name} has shape {arr.shape}, expected ({n}, 2)")
            if not np.isfinite(arr).all():
                raise InputError(f"ScoreMaterial.{name} has non-finite entries")

    @classmethod
    def build(cls, dataset: Dataset, loss: LossSpec, delta_theta: np.ndarray,
              scale: Optional[GroupScale] = None) -> "ScoreMaterial":
        quad = compute_loss_quad(dataset, loss)
        return cls.from_quad(quad, delta_theta, scale or group_proportions(dataset), dataset.group)

    @classmethod
    def from_quad(cls, quad: LossQuad, delta_theta: np.ndarray, scale: GroupScale,
                  group: np.ndarray) -> "ScoreMaterial":
        return cls(quad.l0, quad.l1, np.asarray(delta_theta, dtype=float), scale, np.asarray(group))

    @property
    def n(self) -> int:
        return self.l0.shape[0]

    @property
    def delta_l(self) -> np.ndarray:
        return self.l1 - self.l0

    def tiled(self, reps: int) -> "ScoreMaterial":
        """The same empirical distribution with every row repeated `reps` times."""
        return ScoreMaterial(np.tile(self.l0, (reps, 1)), np.tile(self.l1, (reps, 1)),
                             np.tile(self.delta_theta, (reps, 1)), self.scale, np.tile(self.group, reps))


class SupportFunctionEstimate:
    """
    Support function estimator built on ScoreMaterial.

    Grid values are cached; any other direction is recomputed from the
    material, so ĥ(q) = qᵀŝ(q) holds at every q.
    """

    def __init__(self, material: ScoreMaterial, grid: Optional[DirectionGrid] = None,
                 max_cells: int = MAX_CELLS):
        self.material = material
        self.grid = grid
        self.max_cells = max_cells
        self._m = material.scale.m
        self._base = material.scale.m * material.l0.mean(axis=0)
        self._weighted_theta = material.delta_theta * self._m
        self._weighted_delta = material.delta_l * self._m
        self._grid_support: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.material.n

    @property
    def scale(self) -> GroupScale:
        return self.material.scale

    def _chunks(self, count: int):
        step = max(1, self.max_cells // max(self.n, 1))
        for start in range(0, count, step):
            yield slice(start, min(start + step, count))

    def indicator(self, Q: np.ndarray) -> np.ndarray:
        """1{qᵀ M Δθ̂(X_i) > 0}, shape (n, N)."""
        return (self._weighted_theta @ np.atleast_2d(Q).T) > 0.0

    def support_points(self, Q: np.ndarray) -> np.ndarray:
        """ŝ(q) for each row of Q, shape (N, 2)."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        out = np.empty((Q.shape[0], 2))
        for part in self._chunks(Q.shape[0]):
            active = self.indicator(Q[part]).astype(float)
            out[part] = self._base + (self.material.delta_l.T @ active).T * self._m / self.n
        return out

    def h_many(self, Q: np.ndarray) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        return np.einsum("ij,ij->i", Q, self.support_points(Q))

    def scores(self, Q: np.ndarray) -> np.ndarray:
        """ζ_i(M̂q), shape (n, N)."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        base = (self.material.l0 * self._m) @ Q.T
        return base + ((self._weighted_delta @ Q.T) * self.indicator(Q))

    def influence(self, Q: np.ndarray) -> np.ndarray:
        """ζ*_i(q) = ζ_i(q) + (M*_i q)ᵀ M⁻¹ ŝ(q), shape (n, N)."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        support = self.support_points(Q)
        member = np.column_stack([self.material.group == R, self.material.group == B]).astype(float)
        # (M*_i q)ᵀ M⁻¹ s = -Σ_g 1{G_i = g} q_g s_g / μ_g
        correction = -(member * self._m) @ (Q * support).T
        return self.scores(Q) + correction

    def covariance(self, Q: np.ndarray, Q2: Optional[np.ndarray] = None) -> np.ndarray:
        """Ω̂ between the rows of Q and Q2."""
        left = self.influence(Q)
        left = left - left.mean(axis=0)
        if Q2 is None:
            right = left
        else:
            right = self.influence(Q2)
            right = right - right.mean(axis=0)
        return left.T @ right / self.n

    def kernel(self) -> "CovarianceKernel":
        return CovarianceKernel(self)

    def risk_bound(self) -> float:
        """Radius C of a ball containing every feasible risk pair."""
        worst = np.maximum(np.abs(self.material.l0), np.abs(self.material.l1)).mean(axis=0)
        return float(np.sqrt(2.0) * (worst * self._m).max())

    def grid_support(self) -> np.ndarray:
        if self.grid is None:
            raise InputError("SupportFunctionEstimate has no direction grid")
        if self._grid_support is None:
            self._grid_support = self.support_points(self.grid.vectors)
        return self._grid_support

    def grid_h(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.grid.vectors, self.grid_support())

    def grid_table(self) -> pd.DataFrame:
        support = self.grid_support()
        return pd.DataFrame({
            "angle": self.grid.angles,
            "q1": self.grid.vectors[:, 0],
            "q2": self.grid.vectors[:, 1],
            "h": self.grid_h(),
            "s_r": support[:, 0],
            "s_b": support[:, 1],
        })


@dataclass(frozen=True, eq=False)
class CovarianceKernel:
    """Ω̂(q, q̃) from the influence values."""
    sfe: SupportFunctionEstimate

    def __call__(self, q: DirectionLike, q_tilde: DirectionLike) -> float:
        left = self.sfe.influence(as_vector(q))[:, 0]
        right = self.sfe.influence(as_vector(q_tilde))[:, 0]
        left = left - left.mean()
        right = right - right.mean()
        return float(left @ right / left.shape[0])

    def gram(self, grid: DirectionGrid) -> np.ndarray:
        return self.sfe.covariance(grid.vectors)


def eval_h(sfe: SupportFunctionEstimate, q: DirectionLike) -> float:
    return float(sfe.h_many(as_vector(q))[0])


def eval_support_set(sfe: SupportFunctionEstimate, q: DirectionLike) -> RiskPoint:
    return RiskPoint.of(sfe.support_points(as_vector(q))[0])


def eval_influence(sfe: SupportFunctionEstimate, q: DirectionLike) -> np.ndarray:
    return sfe.influence(as_vector(q))[:, 0]


def active_corners(e: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """The two points of C(e) that carry its support function, each shaped like e."""
    e = np.asarray(e, dtype=float)
    e_r, e_b = e[..., 0], e[..., 1]
    first = np.stack([np.minimum(e_r, 2 * e_b - e_r), e_b], axis=-1)
    second = np.stack([e_r, np.minimum(e_b, 2 * e_r - e_b)], axis=-1)
    return first, second


def h_c_many(e: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """h_C(e)(q) for e of shape (..., 2) and Q of shape (N, 2); returns (..., N)."""
    first, second = active_corners(e)
    Q = np.atleast_2d(Q)
    return np.maximum(first @ Q.T, second @ Q.T)


def eval_h_C(e_star: RiskPoint, q: DirectionLike) -> float:
    q = as_vector(q)
    if q[0] + q[1] < -1e-12:
        raise InputError(f"h_C unbounded direction: q = ({q[0]:.6g}, {q[1]:.6g}) has q1 + q2 < 0")
    return float(h_c_many(e_star.as_array(), q)[0])


@dataclass(frozen=True)
class EtildeResult:
    """Minimum of c -> ĥ(u1 - c(1, -1)) over [-c_bound, c_bound]."""
    value: float
    c_star: float
    bounded: bool
    side: str   # "crosses", "above" or "below" the 45-degree line

    @property
    def fairest(self) -> Optional[RiskPoint]:
        if not self.bounded:
            return None
        return RiskPoint(-self.value, -self.value)


def etilde_directions(c: np.ndarray) -> np.ndarray:
    """u1 - c(1, -1) for each c."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return U1[None, :] - c[:, None] * ETILDE_SHIFT[None, :]


def eval_h_Etilde(sfe: SupportFunctionEstimate, c_bound: float = 50.0, tol: float = 1e-8,
                  n_grid: int = 201) -> EtildeResult:
    """
    Minimize c -> ĥ(u1 - c(1, -1)) by a bracketing grid plus golden section.

    Takes anything with `h_many`, including the oracle sampler. An argmin at
    either end of the grid that is still strictly decreasing there is
    reported as unbounded; the sign of that end says which side of the
    45-degree line the feasible set lies on.
    """
    if c_bound <= 0:
        raise InputError(f"c_bound must be positive, got {c_bound}")
    cs = np.linspace(-c_bound, c_bound, n_grid)
    values = sfe.h_many(etilde_directions(cs))
    i = int(np.argmin(values))
    if i == 0 and values[0] < values[1]:
        logger.warning("h_Etilde unbounded below as c -> -inf: feasible set lies above the 45-degree line")
        return EtildeResult(-np.inf, -np.inf, False, "above")
    if i == n_grid - 1 and values[-1] < values[-2]:
        logger.warning("h_Etilde unbounded below as c -> +inf: feasible set lies below the 45-degree line")
        return EtildeResult(-np.inf, np.inf, False, "below")

    def objective(c: float) -> float:
        return float(sfe.h_many(etilde_directions(c))[0])

    c_star, value = float(cs[i]), float(values[i])
    if 0 < i < n_grid - 1:
        try:
            result = minimize_scalar(objective, bracket=(cs[i - 1], cs[i], cs[i + 1]),
                                     method="golden", tol=tol)
            if result.fun < value and abs(result.x) <= c_bound:
                c_star, value = float(result.x), float(result.fun)
        except ValueError:
            # flat bracket: the grid point is already a minimizer
            pass
    logger.debug(f"h_Etilde: c*={c_star:.6g}, value={value:.6g}")
    return EtildeResult(value, c_star, True, "crosses")


def cross_fit_estimate(dataset: Dataset, loss: LossSpec, learner, K: int = 5, seed: int = 0,
                       grid: Optional[DirectionGrid] = None, threads: int = 1) -> SupportFunctionEstimate:
    """Fold assignment, cross-fitted Δθ̂ and the support-function estimate in one call."""
    folds = assign_folds(dataset.n, K, seed)
    cfn = fit_cross_fit(dataset, loss, folds, learner, threads)
    return SupportFunctionEstimate(ScoreMaterial.build(dataset, loss, cfn.predictions), grid)
