"""
fairfrontier Multinomial Lasso

L1-penalized multinomial logistic regression fit by cyclic block coordinate
descent. Each class block is updated by minimizing a quadratic majorizer of
the negative log-likelihood, whose curvature X'X/(4n) bounds the block
Hessian, so the penalized objective never increases across sweeps.
Intercepts are unpenalized. Classes absent from the training labels are
dropped and predicted with probability 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConvergenceError, NumericalError


logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-15


def softmax(eta: np.ndarray) -> np.ndarray:
    shifted = eta - eta.max(axis=1, keepdims=True)
    expo = np.exp(shifted)
    return expo / expo.sum(axis=1, keepdims=True)


def soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


@dataclass
class MultinomialFit:
    """Coefficients at one penalty level."""
    lam: float
    n_classes: int
    active: np.ndarray          # bool (n_classes,)
    intercept: np.ndarray       # (n_active,)
    coef: np.ndarray            # (d, n_active)
    sweeps: int = 0
    objective_path: List[float] = field(default_factory=list)

    def predict_proba(self, z: np.ndarray) -> np.ndarray:
        proba = np.zeros((z.shape[0], self.n_classes))
        proba[:, self.active] = softmax(self.intercept + z @ self.coef)
        return proba

    @property
    def n_nonzero(self) -> int:
        return int(np.count_nonzero(self.coef))


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def penalized_objective(z: np.ndarray, y: np.ndarray, intercept: np.ndarray,
                        coef: np.ndarray, lam: float) -> float:
    """Mean negative log-likelihood plus λ·‖coef‖₁ on active classes."""
    proba = softmax(intercept + z @ coef)
    loglik = np.log(np.maximum((proba * y).sum(axis=1), PROB_FLOOR))
    return float(-loglik.mean() + lam * np.abs(coef).sum())


def lambda_max(z: np.ndarray, labels: np.ndarray, n_classes: int) -> float:
    """Smallest penalty at which every non-intercept coefficient is zero."""
    y = one_hot(labels, n_classes)
    freq = y.mean(axis=0)
    active = freq > 0
    grad = z.T @ (freq[active] - y[:, active]) / z.shape[0]
    return float(np.abs(grad).max()) if grad.size else 0.0


class MultinomialLasso:
    """
    Coordinate-descent solver for one design matrix.

    The solver is reused along a penalty path with warm starts.
    """

    def __init__(self, max_sweeps: int = 10_000, tol: float = 1e-7, inner_passes: int = 100):
        self.max_sweeps = max_sweeps
        self.tol = tol
        self.inner_passes = inner_passes

    def fit(self, z: np.ndarray, labels: np.ndarray, n_classes: int, lam: float,
            warm: Optional[MultinomialFit] = None) -> MultinomialFit:
        n, d = z.shape
        y_full = one_hot(labels, n_classes)
        freq = y_full.mean(axis=0)
        active = freq > 0
        y = y_full[:, active]
        k_active = int(active.sum())

        if warm is not None and np.array_equal(warm.active, active):
            intercept = warm.intercept.copy()
            coef = warm.coef.copy()
        else:
            intercept = np.log(freq[active])
            coef = np.zeros((d, k_active))

        fit = MultinomialFit(lam, n_classes, active, intercept, coef)
        if k_active == 1:
            fit.objective_path.append(0.0)
            return fit

        design = np.column_stack([np.ones(n), z])
        # Block Hessian bound: p(1 - p) <= 1/4
        hbar = design.T @ design / (4.0 * n)
        diag = np.diag(hbar).copy()

        beta = np.vstack([intercept, coef])   # (d + 1, k_active)
        eta = design @ beta
        proba = softmax(eta)
        objective = penalized_objective(z, y, beta[0], beta[1:], lam)
        fit.objective_path.append(objective)

        for sweep in range(1, self.max_sweeps + 1):
            max_change = 0.0
            for k in range(k_active):
                grad = design.T @ (proba[:, k] - y[:, k]) / n
                delta = self._solve_block(hbar, diag, grad, beta[:, k], lam)
                change = float(np.abs(delta).max())
                if change > 0.0:
                    beta[:, k] += delta
                    eta[:, k] += design @ delta
                    proba = softmax(eta)
                max_change = max(max_change, change)

            previous = objective
            objective = penalized_objective(z, y, beta[0], beta[1:], lam)
            fit.objective_path.append(objective)
            if objective > previous + 1e-10 * max(1.0, abs(previous)):
                raise NumericalError(
                    f"Coordinate descent objective increased at sweep {sweep}: {previous:.12g} -> {objective:.12g}"
                )
            if max_change < self.tol:
                fit.sweeps = sweep
                break
        else:
            delta_obj = fit.objective_path[-2] - fit.objective_path[-1]
            raise ConvergenceError(
                f"Multinomial lasso did not converge in {self.max_sweeps} sweeps at lambda={lam:.3g} "
                f"(final objective delta {delta_obj:.3g})",
                objective_delta=delta_obj,
            )

        fit.intercept = beta[0].copy()
        fit.coef = beta[1:].copy()
        logger.debug(f"lambda={lam:.4g}: {fit.sweeps} sweeps, {fit.n_nonzero} nonzero, objective {objective:.6f}")
        return fit

    def _solve_block(self, hbar: np.ndarray, diag: np.ndarray, grad: np.ndarray,
                     beta_k: np.ndarray, lam: float) -> np.ndarray:
        """Minimize grad'δ + δ'Hδ/2 + λ‖β_k + δ‖₁ (intercept free) by cyclic coordinates."""
        delta = np.zeros_like(beta_k)
        h_delta = np.zeros_like(beta_k)
        for _ in range(self.inner_passes):
            max_step = 0.0
            for j in range(beta_k.shape[0]):
                a = diag[j]
                if a <= 0.0:
                    continue
                current = beta_k[j] + delta[j]
                target = current - (grad[j] + h_delta[j]) / a
                updated = target if j == 0 else soft_threshold(target, lam / a)
                step = updated - current
                if step != 0.0:
                    delta[j] += step
                    h_delta += step * hbar[:, j]
                    max_step = max(max_step, abs(step))
            if max_step < 0.1 * self.tol:
                break
        return delta


def fit_path(z: np.ndarray, labels: np.ndarray, n_classes: int, lambdas: Sequence[float],
             solver: MultinomialLasso) -> List[MultinomialFit]:
    """Fit a decreasing penalty path with warm starts."""
    fits: List[MultinomialFit] = []
    warm = None
    for lam in lambdas:
        warm = solver.fit(z, labels, n_classes, float(lam), warm=warm)
        fits.append(warm)
    return fits


def penalty_grid(lam_max: float, n_lambdas: int = 50, min_ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced grid from lam_max down to min_ratio * lam_max."""
    if lam_max <= 0:
        return np.zeros(1)
    return np.geomspace(lam_max, min_ratio * lam_max, n_lambdas)


def held_out_deviance(fit: MultinomialFit, z: np.ndarray, labels: np.ndarray) -> float:
    proba = fit.predict_proba(z)
    picked = proba[np.arange(labels.shape[0]), labels]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())
