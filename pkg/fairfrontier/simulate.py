"""
fairfrontier Simulation Designs

The two Monte Carlo data-generating processes (group-balanced and r-skewed),
the status-quo logit trained once on a mixture of both, and oracle geometry
computed from the closed-form nuisance on a large fresh sample.

Covariates: X2 ~ Uniform(0, 1), X3 ~ Beta(2, 2), every other coordinate is a
standard normal truncated to [-3, 3]. G ~ Bernoulli(0.6) independent of X,
with G = 1 for group r.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import statsmodels.api as sm
from scipy.special import expit
from scipy.stats import truncnorm

from .core import B, FULL_CIRCLE, R, U1, U2, Dataset, DirectionGrid, GroupScale, RiskPoint, make_direction_grid
from .errors import InputError, NumericalError
from .geometry import intersect_halfplanes
from .nuisance import NuisanceLearner
from .supportfn import ScoreMaterial, SupportFunctionEstimate, eval_h_Etilde


logger = logging.getLogger(__name__)

TRUNCATION = 3.0
MIN_ORACLE_DRAWS = 100_000
ORACLE_CHUNK = 1 << 18

VALID_KINDS = ["balanced", "r-skew", "custom"]


def _padded(values, d_x: int) -> np.ndarray:
    out = np.zeros(d_x)
    out[:len(values)] = values
    return out


@dataclass(frozen=True, eq=False)
class DgpSpec:
    """
    Outcome model P(Y = 1 | G, X) = σ(Xᵀβ_r) for group r and σ(Xᵀβ_b) for b.
    """
    kind: str = "balanced"
    d_x: int = 20
    p_group: float = 0.6
    beta_r: np.ndarray = field(default=None)
    beta_b: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise InputError(f"Invalid DGP: {self.kind}. Must be one of {VALID_KINDS}")
        if self.d_x < 4:
            raise InputError(f"DGP needs at least 4 covariates, got {self.d_x}")
        if not 0.0 < self.p_group < 1.0:
            raise InputError(f"Invalid group probability: {self.p_group}. Must lie in (0, 1)")
        if self.kind == "balanced":
            beta_r, beta_b = [1.0, 1.0, 0.5], [-1.0, -0.5, 0.0, 1.0]
        elif self.kind == "r-skew":
            beta_r, beta_b = [2.0, 2.0, 2.0], [0.7, 0.35, 0.0, 0.42]
        else:
            if self.beta_r is None or self.beta_b is None:
                raise InputError("custom DGP needs beta_r and beta_b")
            beta_r, beta_b = self.beta_r, self.beta_b
        for name, beta in (("beta_r", beta_r), ("beta_b", beta_b)):
            if len(beta) > self.d_x:
                raise InputError(f"{name} has {len(beta)} coefficients for d_x={self.d_x}")
        object.__setattr__(self, "beta_r", _padded(beta_r, self.d_x))
        object.__setattr__(self, "beta_b", _padded(beta_b, self.d_x))

    @classmethod
    def named(cls, kind: str, d_x: int = 20) -> "DgpSpec":
        return cls(kind=kind, d_x=d_x)

    def probabilities(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(P(Y = 1 | r, x), P(Y = 1 | b, x))."""
        return expit(x @ self.beta_r), expit(x @ self.beta_b)

    def delta_theta(self, x: np.ndarray) -> np.ndarray:
        """Closed-form Δθ^g(x) = P(G = g)(1 - 2 P(Y = 1 | g, x)) under classification loss."""
        pi_r, pi_b = self.probabilities(np.atleast_2d(x))
        return np.column_stack([self.p_group * (1.0 - 2.0 * pi_r), (1.0 - self.p_group) * (1.0 - 2.0 * pi_b)])

    def theta(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(θ_0, θ_1), each (n, 2): expected group-split loss of never and always treating."""
        pi_r, pi_b = self.probabilities(x)
        p = np.array([self.p_group, 1.0 - self.p_group])
        pi = np.column_stack([pi_r, pi_b])
        return p * pi, p * (1.0 - pi)

    def scale(self) -> GroupScale:
        return GroupScale(self.p_group, 1.0 - self.p_group)

    def describe(self) -> dict:
        return {"kind": self.kind, "d_x": self.d_x, "p_group": self.p_group,
                "beta_r": self.beta_r.tolist(), "beta_b": self.beta_b.tolist()}


def draw_covariates(dgp: DgpSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    x = truncnorm.rvs(-TRUNCATION, TRUNCATION, size=(n, dgp.d_x), random_state=rng)
    x[:, 1] = rng.uniform(0.0, 1.0, size=n)
    x[:, 2] = rng.beta(2.0, 2.0, size=n)
    return x


def draw_groups(dgp: DgpSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    return np.where(rng.random(n) < dgp.p_group, R, B).astype(np.int8)


def generate(dgp: DgpSpec, n: int, seed) -> Dataset:
    """Draw n observations; `seed` may be an int or a SeedSequence."""
    if n < 2:
        raise InputError(f"Sample size must be at least 2, got {n}")
    rng = np.random.default_rng(seed)
    x = draw_covariates(dgp, n, rng)
    group = draw_groups(dgp, n, rng)
    pi_r, pi_b = dgp.probabilities(x)
    y = (rng.random(n) < np.where(group == R, pi_r, pi_b)).astype(float)
    return Dataset(y, group, x, ("r", "b"), tuple(f"x{j + 1}" for j in range(dgp.d_x)))


def oracle_learner(dgp: DgpSpec) -> NuisanceLearner:
    return NuisanceLearner(method="oracle-dgp", oracle=dgp.delta_theta)


@dataclass(frozen=True, eq=False)
class LogitPolicy:
    """Frozen logistic regression a*(x) = σ(b0 + xᵀb)."""
    params: np.ndarray
    n_train: int = 0

    def treatment_probability(self, x: np.ndarray) -> np.ndarray:
        return expit(self.params[0] + np.atleast_2d(x) @ self.params[1:])

    def describe(self) -> dict:
        return {"kind": "logit", "n_train": self.n_train, "params": self.params.tolist()}


def status_quo_logit(seed: int = 0, n_each: int = 5000, d_x: int = 20) -> LogitPolicy:
    """Unpenalized logit of Y on (1, X), trained once on balanced plus r-skew draws."""
    children = np.random.SeedSequence([seed, 7919]).spawn(2)
    parts = [generate(DgpSpec.named(kind, d_x), n_each, child)
             for kind, child in zip(("balanced", "r-skew"), children)]
    x = np.vstack([p.x for p in parts])
    y = np.concatenate([p.y for p in parts])
    result = sm.Logit(y, sm.add_constant(x, has_constant="add")).fit(method="newton", maxiter=100, disp=False)
    if not result.mle_retvals.get("converged", False):
        raise NumericalError(f"Status-quo logit did not converge in {result.mle_retvals.get('iterations')} iterations")
    logger.info(f"Status-quo logit fit on {y.shape[0]} mixture draws")
    return LogitPolicy(np.asarray(result.params, dtype=float), int(y.shape[0]))


@dataclass(frozen=True, eq=False)
class OracleGeometry:
    """Population R, B, F, feasible polygon and e* of a DGP."""
    R: RiskPoint
    B: RiskPoint
    F: RiskPoint
    side: str
    c_star: float
    polygon: np.ndarray
    grid: DirectionGrid
    h: np.ndarray
    e_star: Optional[RiskPoint]
    m_draws: int

    def point(self, name: str) -> RiskPoint:
        """R, B, mid ((R + B)/2), e* or F."""
        if name == "mid":
            return RiskPoint.of((self.R.as_array() + self.B.as_array()) / 2.0)
        if name == "e*":
            if self.e_star is None:
                raise InputError("Oracle geometry was computed without a status-quo policy")
            return self.e_star
        return {"R": self.R, "B": self.B, "F": self.F}[name]

    def summary(self) -> Dict[str, list]:
        out = {"R": list(self.R.as_array()), "B": list(self.B.as_array()), "F": list(self.F.as_array())}
        if self.e_star is not None:
            out["e*"] = list(self.e_star.as_array())
        return out


class OracleSampler:
    """Deterministic chunked population averages; every pass replays the same draws."""

    def __init__(self, dgp: DgpSpec, m_draws: int, seed: int, chunk: int = ORACLE_CHUNK):
        self.dgp = dgp
        self.m_draws = m_draws
        self.seed = seed
        self.sizes = [min(chunk, m_draws - s) for s in range(0, m_draws, chunk)]

    def chunks(self):
        seeds = np.random.SeedSequence([self.seed, 104729]).spawn(len(self.sizes))
        for size, child in zip(self.sizes, seeds):
            rng = np.random.default_rng(child)
            x = draw_covariates(self.dgp, size, rng)
            group = draw_groups(self.dgp, size, rng)
            yield x, group

    def support_points(self, Q: np.ndarray) -> np.ndarray:
        """s(q) at the true Δθ, averaged over every chunk."""
        total = np.zeros((Q.shape[0], 2))
        for x, group in self.chunks():
            theta0, theta1 = self.dgp.theta(x)
            material = ScoreMaterial(theta0, theta1, theta1 - theta0, self.dgp.scale(), group)
            total += SupportFunctionEstimate(material).support_points(Q) * x.shape[0]
        return total / self.m_draws

    def h_many(self, Q: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", Q, self.support_points(Q))

    def status_quo_risk(self, policy) -> RiskPoint:
        total = np.zeros(2)
        for x, _ in self.chunks():
            theta0, theta1 = self.dgp.theta(x)
            a = np.asarray(policy.treatment_probability(x), dtype=float)[:, None]
            total += (a * theta1 + (1.0 - a) * theta0).sum(axis=0)
        return RiskPoint.of(total / self.m_draws / self.dgp.scale().mu)


def oracle_geometry(dgp: DgpSpec, m_draws: int = 10_000_000, grid: Optional[DirectionGrid] = None,
                    status_quo=None, seed: int = 0, c_bound: float = 50.0, n_c: int = 2001) -> OracleGeometry:
    """
    Plug the closed-form Δθ into the support formulas on m fresh draws.

    F comes from the same restricted-direction minimizer the estimator uses,
    run on the sampler with an n_c-point bracketing grid.
    """
    if m_draws < MIN_ORACLE_DRAWS:
        raise InputError(f"Oracle geometry needs at least {MIN_ORACLE_DRAWS} draws, got {m_draws}")
    grid = grid or make_direction_grid(500, FULL_CIRCLE)
    sampler = OracleSampler(dgp, m_draws, seed)
    above, below = (U2 - U1) / np.sqrt(2.0), (U1 - U2) / np.sqrt(2.0)
    Q = np.vstack([grid.vectors, U1, U2, above, below])
    support = sampler.support_points(Q)
    n_grid = grid.size
    h = np.einsum("ij,ij->i", Q, support)

    etilde = eval_h_Etilde(sampler, c_bound, n_grid=n_c)
    if etilde.side == "above":
        F = RiskPoint.of(support[n_grid + 2])
    elif etilde.side == "below":
        F = RiskPoint.of(support[n_grid + 3])
    else:
        F = etilde.fairest

    polygon = intersect_halfplanes(grid.vectors, h[:n_grid], np.sqrt(2.0) * float(dgp.scale().m.max()))
    e_star = sampler.status_quo_risk(status_quo) if status_quo is not None else None
    geometry = OracleGeometry(RiskPoint.of(support[n_grid]), RiskPoint.of(support[n_grid + 1]), F, etilde.side,
                              etilde.c_star, polygon, grid, h[:n_grid], e_star, m_draws)
    logger.info(f"Oracle geometry ({dgp.kind}, m={m_draws}): {geometry.summary()}")
    return geometry
