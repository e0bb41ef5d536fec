"""
fairfrontier Nuisance Estimation

Cross-fitted estimation of Δθ(X) = (E[ΔL^r | X], E[ΔL^b | X]).

Classification losses go through a 4-class multinomial lasso over
(group, outcome) cells, so that Δθ^g(x) = p(g, 0 | x) - p(g, 1 | x). Other
losses regress ΔL^g on X by L1 least squares per group. Simulation code can
plug in the closed-form nuisance, and precomputed out-of-fold predictions
can be read from disk.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Protocol, Sequence

import numpy as np
from sklearn.linear_model import LassoCV
from sklearn.model_selection import KFold
from sklearn.preprocessing import StandardScaler

from .core import B, R, Dataset, LossQuad, LossSpec, compute_loss_quad
from .errors import ConvergenceError, InputError, NumericalError
from .multinomial import (MultinomialFit, MultinomialLasso, fit_path, held_out_deviance,
                          lambda_max, penalty_grid)


logger = logging.getLogger(__name__)

N_CELLS = 4  # (r, y=0), (r, y=1), (b, y=0), (b, y=1)


class DeltaThetaModel(Protocol):
    """Anything that maps covariates to (Δθ^r, Δθ^b)."""

    def predict(self, x: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    """Fold index per observation."""
    K: int
    folds: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return self.folds.shape[0]

    def train_index(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.folds != k)

    def test_index(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.folds == k)

    def sizes(self) -> List[int]:
        return np.bincount(self.folds, minlength=self.K).tolist()


def assign_folds(n: int, K: int, seed: int) -> FoldAssignment:
    """Shuffled K-fold partition; fold sizes differ by at most one."""
    if K < 2:
        raise InputError(f"Fold count must be at least 2, got {K}")
    if K > n:
        raise InputError(f"Fold count {K} exceeds sample size {n}")
    folds = np.empty(n, dtype=np.int64)
    splitter = KFold(n_splits=K, shuffle=True, random_state=seed)
    for k, (_, test) in enumerate(splitter.split(np.zeros((n, 1)))):
        folds[test] = k
    return FoldAssignment(K=K, folds=folds, seed=seed)


@dataclass(frozen=True, eq=False)
class NuisanceLearner:
    """Learner choice and hyperparameters."""
    method: str = "multinomial-lasso"
    n_lambdas: int = 50
    lambda_min_ratio: float = 1e-3
    inner_folds: int = 5
    max_sweeps: int = 10_000
    tol: float = 1e-7
    seed: int = 0
    oracle: Optional[Callable[[np.ndarray], np.ndarray]] = None
    external: Optional[np.ndarray] = None   # (n, 2) out-of-fold predictions

    VALID_METHODS = ("multinomial-lasso", "oracle-dgp", "external")

    def __post_init__(self):
        if self.method not in self.VALID_METHODS:
            raise InputError(f"Invalid learner: {self.method}. Must be one of {list(self.VALID_METHODS)}")
        if self.method == "oracle-dgp" and self.oracle is None:
            raise InputError("oracle-dgp learner needs a closed-form nuisance function")
        if self.method == "external" and self.external is None:
            raise InputError("external learner needs a prediction array")
        if self.n_lambdas < 1 or not 0 < self.lambda_min_ratio < 1:
            raise InputError(f"Invalid penalty grid: n_lambdas={self.n_lambdas}, min_ratio={self.lambda_min_ratio}")

    def describe(self) -> dict:
        out = {"method": self.method}
        if self.method == "multinomial-lasso":
            out.update(n_lambdas=self.n_lambdas, lambda_min_ratio=self.lambda_min_ratio,
                       inner_folds=self.inner_folds, max_sweeps=self.max_sweeps, tol=self.tol, seed=self.seed)
        return out


@dataclass(eq=False)
class MultinomialDeltaModel:
    """Standardize, then difference the cell probabilities of each group."""
    scaler: StandardScaler
    fit: MultinomialFit
    penalty: float

    def cell_probabilities(self, x: np.ndarray) -> np.ndarray:
        return self.fit.predict_proba(self.scaler.transform(x))

    def predict(self, x: np.ndarray) -> np.ndarray:
        p = self.cell_probabilities(x)
        return np.column_stack([p[:, 0] - p[:, 1], p[:, 2] - p[:, 3]])


@dataclass(eq=False)
class LassoDeltaModel:
    """Per-group L1 least squares of ΔL^g on X."""
    models: Sequence[LassoCV]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.column_stack([m.predict(x) for m in self.models])


@dataclass(eq=False)
class OracleDeltaModel:
    fn: Callable[[np.ndarray], np.ndarray]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(x), dtype=float)


def cell_labels(dataset: Dataset) -> np.ndarray:
    """Class index 2·group + y for binary outcomes."""
    if not np.isin(dataset.y, (0.0, 1.0)).all():
        raise InputError("Classification mode requires binary outcomes in {0, 1}")
    return 2 * dataset.group.astype(np.int64) + dataset.y.astype(np.int64)


def _fit_multinomial(dataset: Dataset, learner: NuisanceLearner, seed: int) -> MultinomialDeltaModel:
    scaler = StandardScaler().fit(dataset.x)
    z = scaler.transform(dataset.x)
    labels = cell_labels(dataset)
    solver = MultinomialLasso(max_sweeps=learner.max_sweeps, tol=learner.tol)
    lambdas = penalty_grid(lambda_max(z, labels, N_CELLS), learner.n_lambdas, learner.lambda_min_ratio)

    if lambdas.shape[0] > 1 and learner.inner_folds >= 2 and dataset.n >= learner.inner_folds:
        deviance = np.zeros(lambdas.shape[0])
        inner = KFold(n_splits=learner.inner_folds, shuffle=True, random_state=seed)
        for train, test in inner.split(z):
            path = fit_path(z[train], labels[train], N_CELLS, lambdas, solver)
            deviance += [held_out_deviance(f, z[test], labels[test]) for f in path]
        best = int(np.argmin(deviance))
    else:
        best = lambdas.shape[0] - 1

    path = fit_path(z, labels, N_CELLS, lambdas[:best + 1], solver)
    logger.debug(f"Selected penalty {lambdas[best]:.4g} ({best + 1}/{lambdas.shape[0]}), "
                 f"{path[-1].n_nonzero} nonzero coefficients")
    return MultinomialDeltaModel(scaler=scaler, fit=path[-1], penalty=float(lambdas[best]))


def _fit_lasso(dataset: Dataset, quad: LossQuad, learner: NuisanceLearner, seed: int) -> LassoDeltaModel:
    models = []
    delta = quad.delta
    centered = dataset.x - dataset.x.mean(axis=0)
    for g in (R, B):
        target = delta[:, g] - delta[:, g].mean()
        alpha_max = max(float(np.abs(centered.T @ target).max()) / dataset.n, 1e-12)
        model = LassoCV(alphas=penalty_grid(alpha_max, learner.n_lambdas, learner.lambda_min_ratio),
                        cv=KFold(learner.inner_folds, shuffle=True, random_state=seed),
                        max_iter=learner.max_sweeps, tol=learner.tol)
        models.append(model.fit(dataset.x, delta[:, g]))
    return LassoDeltaModel(models)


def fit_delta_theta(dataset: Dataset, loss: LossSpec, learner: NuisanceLearner,
                    seed: Optional[int] = None) -> DeltaThetaModel:
    """Fit a single nuisance model on all rows of `dataset`."""
    seed = learner.seed if seed is None else seed
    if learner.method == "oracle-dgp":
        return OracleDeltaModel(learner.oracle)
    if learner.method == "external":
        raise InputError("external predictions cannot be refit on new rows")
    if loss.mode == "classification":
        return _fit_multinomial(dataset, learner, seed)
    return _fit_lasso(dataset, compute_loss_quad(dataset, loss), learner, seed)


@dataclass(frozen=True, eq=False)
class CrossFitNuisance:
    """Out-of-fold Δθ̂(X_i) for every observation."""
    folds: FoldAssignment
    models: List[Optional[DeltaThetaModel]]
    predictions: np.ndarray   # (n, 2)
    learner: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.predictions.shape[0]


def fit_cross_fit(dataset: Dataset, loss: LossSpec, folds: FoldAssignment,
                  learner: NuisanceLearner, threads: int = 1) -> CrossFitNuisance:
    """Train one model per fold on its complement and predict the held-out rows."""
    if folds.n != dataset.n:
        raise InputError(f"Fold assignment covers {folds.n} rows, dataset has {dataset.n}")
    compute_loss_quad(dataset, loss)

    if learner.method == "external":
        predictions = np.asarray(learner.external, dtype=float)
        if predictions.shape != (dataset.n, 2):
            raise InputError(f"External predictions have shape {predictions.shape}, expected ({dataset.n}, 2)")
        return CrossFitNuisance(folds, [None] * folds.K, predictions.copy(), learner.describe())

    def fit_fold(k: int) -> DeltaThetaModel:
        train = dataset.subset(folds.train_index(k))
        try:
            return fit_delta_theta(train, loss, learner, seed=learner.seed + 1000 * (k + 1))
        except ConvergenceError as e:
            raise ConvergenceError(f"Fold {k}: {e}", fold=k, objective_delta=e.objective_delta) from e

    logger.info(f"Cross-fitting {learner.method} nuisance on {folds.K} folds (n={dataset.n})")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            models = list(pool.map(fit_fold, range(folds.K)))
    else:
        models = [fit_fold(k) for k in range(folds.K)]

    predictions = np.empty((dataset.n, 2))
    for k, model in enumerate(models):
        test = folds.test_index(k)
        predictions[test] = model.predict(dataset.x[test])
    if not np.isfinite(predictions).all():
        raise NumericalError("Non-finite nuisance prediction")
    return CrossFitNuisance(folds, models, predictions, learner.describe())


def predict_delta_theta(cfn: CrossFitNuisance, i: int) -> np.ndarray:
    return cfn.predictions[i].copy()


def jitter_covariate(dataset: Dataset, col: int, scale: float, seed: int) -> Dataset:
    """Add Uniform(-scale, scale) noise to one covariate column."""
    if not 0 <= col < dataset.d_x:
        raise InputError(f"Covariate column {col} out of range [0, {dataset.d_x})")
    if scale <= 0:
        raise InputError(f"Jitter scale must be positive, got {scale}")
    rng = np.random.default_rng(seed)
    x = dataset.x.copy()
    x[:, col] += rng.uniform(-scale, scale, size=dataset.n)
    return dataset.with_x(x)
