"""
fairfrontier Multiplier Bootstrap

Exponential-weight multiplier bootstrap of (ĥ, ê*) and the numerical
directional-derivative approximation of a functional's limit law.

A draw perturbs the sample with weights W_i / W̄, recomputes the group
proportions, the support-function estimate at a fixed direction set and,
when a status-quo risk is estimated, ê*. The functional φ is then
differentiated numerically along √n(h̃e - ĥe) with step s_n.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import B, R
from .errors import InputError, NumericalError
from .supportfn import SupportFunctionEstimate


logger = logging.getLogger(__name__)

MIN_DRAWS = 100
DRAW_CHUNK = 25


@dataclass(frozen=True)
class BootstrapConfig:
    draws: int = 500
    seed: int = 0
    step: Optional[float] = None   # n^(-1/3) when unset
    varsigma: float = 1e-3
    threads: int = 1

    def validate(self) -> None:
        if self.draws < MIN_DRAWS:
            raise InputError(f"Bootstrap needs at least {MIN_DRAWS} draws, got {self.draws}")
        if self.varsigma < 0:
            raise InputError(f"varsigma must be nonnegative, got {self.varsigma}")
        if self.step is not None and self.step <= 0:
            raise InputError(f"Derivative step must be positive, got {self.step}")

    def step_for(self, n: int) -> float:
        step = float(n ** (-1.0 / 3.0)) if self.step is None else float(self.step)
        if np.sqrt(n) * step < 1.0:
            raise InputError(f"Derivative step {step:.3g} too small for n={n}: need sqrt(n) * s_n >= 1")
        return step

    def describe(self, n: int) -> dict:
        return {"B": self.draws, "seed": self.seed, "s_n": self.step_for(n), "varsigma": self.varsigma}


def draw_weights(n: int, seed: int, b: int) -> np.ndarray:
    """Exponential(1) multipliers for draw b."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
    return rng.exponential(1.0, size=n)


@dataclass(frozen=True, eq=False)
class PerturbationSample:
    """Bootstrap paths √n(h̃ - ĥ) and √n(ẽ* - ê*) over a fixed direction set."""
    directions: np.ndarray
    h_hat: np.ndarray        # (N,)
    h_paths: np.ndarray      # (B, N)
    e_hat: np.ndarray        # (2,)
    e_paths: np.ndarray      # (B, 2)
    n: int
    step: float

    @property
    def draws(self) -> int:
        return self.h_paths.shape[0]

    def perturbed(self):
        """(ĥ + s_n d_h, ê + s_n d_e) for every draw."""
        return self.h_hat + self.step * self.h_paths, self.e_hat + self.step * self.e_paths


def _status_quo_parts(sq):
    """Z matrix and ê* of an estimated status-quo risk; (None, point) for a fixed point."""
    if sq is None:
        return None, np.zeros(2)
    z = getattr(sq, "z", None)
    if z is not None:
        return z, np.asarray(sq.e_hat, dtype=float)
    return None, sq.as_array()


def bootstrap_paths(sfe: SupportFunctionEstimate, directions: np.ndarray, sq=None,
                    cfg: BootstrapConfig = BootstrapConfig(),
                    weights: Optional[np.ndarray] = None) -> PerturbationSample:
    """
    Bootstrap paths at `directions`.

    `weights`, when given, replaces the exponential multipliers (one row per draw).
    """
    material = sfe.material
    n = material.n
    Q = np.atleast_2d(np.asarray(directions, dtype=float))
    if weights is None:
        cfg.validate()
        draws = cfg.draws
    else:
        weights = np.atleast_2d(np.asarray(weights, dtype=float))
        if weights.shape[1] != n:
            raise InputError(f"Weight matrix has {weights.shape[1]} columns for n={n}")
        draws = weights.shape[0]
    step = cfg.step_for(n)
    member = np.column_stack([material.group == R, material.group == B]).astype(float)
    z, e_hat = _status_quo_parts(sq)
    h_hat = sfe.h_many(Q)

    def run(block: range):
        h_out = np.empty((len(block), Q.shape[0]))
        e_out = np.zeros((len(block), 2))
        for row, b in enumerate(block):
            w = draw_weights(n, cfg.seed, b) if weights is None else weights[b]
            w = w / w.mean()
            mu = w @ member / n
            if (mu <= 0).any():
                raise NumericalError(f"Bootstrap draw {b}: a group received zero weight")
            m = 1.0 / mu
            active = ((material.delta_theta * m) @ Q.T > 0.0).astype(float)
            support = m * (w @ material.l0) / n + ((w[:, None] * material.delta_l).T @ active).T * m / n
            h_out[row] = np.einsum("ij,ij->i", Q, support)
            if z is not None:
                e_out[row] = (w @ z) / n / mu
        return h_out, e_out

    blocks = [range(s, min(s + DRAW_CHUNK, draws)) for s in range(0, draws, DRAW_CHUNK)]
    if cfg.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(block) for block in blocks]
    h_tilde = np.vstack([r[0] for r in results])
    e_tilde = np.vstack([r[1] for r in results])

    root_n = np.sqrt(n)
    h_paths = root_n * (h_tilde - h_hat)
    e_paths = root_n * (e_tilde - e_hat) if z is not None else np.zeros((draws, 2))
    bad = ~np.isfinite(h_paths).all(axis=1) | ~np.isfinite(e_paths).all(axis=1)
    if bad.any():
        raise NumericalError(f"Non-finite bootstrap value at draw {int(np.flatnonzero(bad)[0])}")
    logger.debug(f"Bootstrap paths: {draws} draws x {Q.shape[0]} directions, s_n={step:.4g}")
    return PerturbationSample(Q, h_hat, h_paths, e_hat, e_paths, n, step)


Phi = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Functional:
    """
    φ(h, e) evaluated row-wise.

    `fn` takes h of shape (D, N) over `directions` and e of shape (D, 2) and
    returns shape (D,) or (D, C) for a family of C candidates.
    """
    directions: np.ndarray
    fn: Phi
    name: str = "phi"


@dataclass(frozen=True, eq=False)
class BootstrapLaw:
    """Draws of φ̂'(√n(h̃e - ĥe)), one row per bootstrap draw."""
    values: np.ndarray
    step: float

    @property
    def draws(self) -> int:
        return self.values.shape[0]

    def quantile(self, beta: float):
        """Smallest c with empirical P(φ̂' <= c) >= β."""
        if not 0.0 <= beta <= 1.0:
            raise InputError(f"Quantile level must lie in [0, 1], got {beta}")
        out = np.quantile(self.values, beta, axis=0, method="inverted_cdf")
        return float(out) if np.ndim(out) == 0 else out


def derivative_draws(phi: Functional, sample: PerturbationSample) -> np.ndarray:
    """(φ(ĥe + s_n d) - φ(ĥe)) / s_n for every bootstrap direction d."""
    base = phi.fn(sample.h_hat[None, :], sample.e_hat[None, :])
    h_pert, e_pert = sample.perturbed()
    values = (phi.fn(h_pert, e_pert) - base) / sample.step
    bad = ~np.isfinite(values.reshape(values.shape[0], -1)).all(axis=1)
    if bad.any():
        raise NumericalError(f"Non-finite derivative draw {int(np.flatnonzero(bad)[0])} for {phi.name}")
    return values


def multiplier_bootstrap(sfe: SupportFunctionEstimate, sq, phi: Functional,
                         cfg: BootstrapConfig = BootstrapConfig(),
                         sample: Optional[PerturbationSample] = None) -> BootstrapLaw:
    """Approximate the limit law of √n(φ(ĥe) - φ(he)) by the numerical derivative."""
    if sample is None:
        sample = bootstrap_paths(sfe, phi.directions, sq, cfg)
    elif not np.array_equal(sample.directions, np.atleast_2d(phi.directions)):
        raise InputError(f"Perturbation sample directions do not match functional {phi.name}")
    return BootstrapLaw(derivative_draws(phi, sample), sample.step)
