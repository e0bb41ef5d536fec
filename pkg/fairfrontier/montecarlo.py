"""
fairfrontier Monte Carlo Harness

Replicates the rejection-rate table: weak-skew test and (R, B) coverage,
frontier tests at R, B, (R + B)/2 and the status quo e*, and distance-to-F
intervals at the same four points. Replications fan out over processes,
and each replication's randomness is a pure function of
(master seed, DGP index, n, replication index).
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .bootstrap import BootstrapConfig, bootstrap_paths
from .core import ADMISSIBLE_HALF, FULL_CIRCLE, PARETO_ARC, LossSpec, make_direction_grid
from .errors import FrontierError, InputError
from .inference import (InferenceGrids, TestResult, distance_to_F_ci, estimate_status_quo, get_distance,
                        rb_pair_in_confidence_set, skew_directions, test_frontier_point, test_lda,
                        test_weak_skew)
from .nuisance import NuisanceLearner
from .simulate import (DgpSpec, LogitPolicy, OracleGeometry, generate, oracle_geometry, oracle_learner,
                       status_quo_logit)
from .supportfn import cross_fit_estimate


logger = logging.getLogger(__name__)

VALID_TESTS = ["skew", "lda", "dist-f"]
VALID_LEARNERS = ["multinomial-lasso", "oracle-dgp"]
POINTS = ("R", "B", "mid", "e*")
POINT_LABELS = {"R": "R", "B": "B", "mid": "(R+B)/2", "e*": "e*"}


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo design and every tuning value it runs with."""
    dgps: Tuple[str, ...] = ("balanced", "r-skew")
    sizes: Tuple[int, ...] = (1000, 5000, 10000)
    replications: int = 200
    tests: Tuple[str, ...] = ("skew", "lda", "dist-f")
    alpha: float = 0.05
    folds: int = 5
    learner: str = "multinomial-lasso"
    n_lambdas: int = 50
    bootstrap_draws: int = 500
    varsigma: float = 1e-3
    step: Optional[float] = None
    full_directions: int = 360
    half_directions: int = 180
    pareto_directions: int = 90
    candidates: int = 40
    e_candidates: int = 11
    cs_scale: float = 5.0
    kappa_n: Optional[float] = None
    rho: str = "squared_euclidean"
    oracle_draws: int = 1_000_000
    master_seed: int = 0
    workers: int = 1

    def validate(self) -> None:
        if self.replications < 1:
            raise InputError(f"replications must be at least 1, got {self.replications}")
        for kind in self.dgps:
            if kind not in ("balanced", "r-skew"):
                raise InputError(f"Invalid DGP: {kind}. Must be one of ['balanced', 'r-skew']")
        for test in self.tests:
            if test not in VALID_TESTS:
                raise InputError(f"Invalid test: {test}. Must be one of {VALID_TESTS}")
        if self.learner not in VALID_LEARNERS:
            raise InputError(f"Invalid learner: {self.learner}. Must be one of {VALID_LEARNERS}")
        if any(n < 2 * self.folds for n in self.sizes):
            raise InputError(f"Every sample size must be at least {2 * self.folds}")
        get_distance(self.rho)

    def grids(self) -> InferenceGrids:
        return InferenceGrids(full=make_direction_grid(self.full_directions, FULL_CIRCLE),
                              half=make_direction_grid(self.half_directions, ADMISSIBLE_HALF),
                              arc=make_direction_grid(self.pareto_directions, PARETO_ARC),
                              candidates=self.candidates, e_candidates=self.e_candidates,
                              cs_scale=self.cs_scale, kappa_n=self.kappa_n)

    def bootstrap(self, seed: int) -> BootstrapConfig:
        return BootstrapConfig(draws=self.bootstrap_draws, seed=seed, step=self.step, varsigma=self.varsigma)

    def to_dict(self) -> dict:
        return asdict(self)


def replication_seed(cfg: McConfig, dgp_index: int, n: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.master_seed, dgp_index, n, rep])


def columns_for(tests) -> List[str]:
    cols = []
    if "skew" in tests:
        cols += ["skew:(R,B) not in CS", "skew:H0 rejected"]
    if "lda" in tests:
        cols += [f"lda:{POINT_LABELS[p]}" for p in POINTS]
    if "dist-f" in tests:
        cols += [f"dist:{POINT_LABELS[p]}" for p in POINTS]
    return cols


@dataclass(frozen=True, eq=False)
class ReplicationJob:
    cfg: McConfig
    dgp_index: int
    n: int
    rep: int
    truth: OracleGeometry
    status_quo: LogitPolicy


def run_replication(job: ReplicationJob) -> Dict[str, object]:
    """One draw of every requested outcome as 0/1; failures come back as an error string."""
    cfg = job.cfg
    dgp = DgpSpec.named(cfg.dgps[job.dgp_index])
    data_seed, fold_seed, boot_seed = replication_seed(cfg, job.dgp_index, job.n, job.rep).spawn(3)
    fold_seed = int(fold_seed.generate_state(1)[0])
    boot_seed = int(boot_seed.generate_state(1)[0])
    grids = cfg.grids()
    bcfg = cfg.bootstrap(boot_seed)
    loss = LossSpec.classification()
    learner = (oracle_learner(dgp) if cfg.learner == "oracle-dgp"
               else NuisanceLearner(n_lambdas=cfg.n_lambdas, seed=fold_seed))
    out: Dict[str, object] = {}
    try:
        data = generate(dgp, job.n, data_seed)
        sfe = cross_fit_estimate(data, loss, learner, cfg.folds, fold_seed, grids.full)
        if "skew" in cfg.tests:
            sample = bootstrap_paths(sfe, skew_directions(grids), None, bcfg)
            skew = test_weak_skew(sfe, cfg.alpha, bcfg, grids, sample=sample)
            covered = rb_pair_in_confidence_set(sfe, job.truth.R, job.truth.B, cfg.alpha, bcfg, grids, sample=sample)
            out["skew:(R,B) not in CS"] = int(not covered)
            out["skew:H0 rejected"] = int(skew.decision)
        sq = None
        if "lda" in cfg.tests or "dist-f" in cfg.tests:
            sq = estimate_status_quo(data, loss, job.status_quo)
        rho = get_distance(cfg.rho)
        for name in POINTS:
            target = sq if name == "e*" else job.truth.point(name)
            if "lda" in cfg.tests:
                result = (test_lda(sfe, sq, cfg.alpha, bcfg, grids) if name == "e*"
                          else test_frontier_point(sfe, target, cfg.alpha, bcfg, grids))
                out[f"lda:{POINT_LABELS[name]}"] = int(result.decision)
            if "dist-f" in cfg.tests:
                truth = float(rho(job.truth.point(name).as_array(), job.truth.F.as_array()))
                interval = distance_to_F_ci(sfe, target, cfg.rho, cfg.alpha, bcfg, grids)
                out[f"dist:{POINT_LABELS[name]}"] = int(not interval.contains(truth))
    except FrontierError as e:
        return {"error": f"{type(e).__name__}: {e}"}
    except Exception as e:
        logger.exception(f"Replication {job.rep} (n={job.n}) raised an unexpected error")
        return {"error": f"{type(e).__name__}: {e}"}
    return out


@dataclass
class McResult:
    table: pd.DataFrame
    failures: Dict[str, int] = field(default_factory=dict)
    truths: Dict[str, dict] = field(default_factory=dict)
    elapsed: Optional[float] = None


def summarize(outcomes: List[Dict[str, object]], columns: List[str]) -> Dict[str, object]:
    """Rejection rate and Monte Carlo standard error per column, failures excluded."""
    ok = [o for o in outcomes if "error" not in o]
    row: Dict[str, object] = {"reps": len(ok), "failed": len(outcomes) - len(ok)}
    for col in columns:
        values = np.array([o[col] for o in ok], dtype=float)
        if values.size == 0:
            row[col], row[f"{col} se"] = np.nan, np.nan
            continue
        p = float(values.mean())
        row[col] = p
        row[f"{col} se"] = float(np.sqrt(p * (1.0 - p) / values.size))
    return row


def run_mc(cfg: McConfig, geometries: Optional[Dict[str, OracleGeometry]] = None,
           status_quo: Optional[LogitPolicy] = None) -> McResult:
    """Rejection-rate table with one row per (n, DGP)."""
    cfg.validate()
    started = time.perf_counter()
    status_quo = status_quo or status_quo_logit(cfg.master_seed)
    geometries = dict(geometries or {})
    for kind in cfg.dgps:
        if kind not in geometries:
            geometries[kind] = oracle_geometry(DgpSpec.named(kind), cfg.oracle_draws,
                                               status_quo=status_quo, seed=cfg.master_seed)
    columns = columns_for(cfg.tests)
    rows, failures = [], {}
    for n in cfg.sizes:
        for d, kind in enumerate(cfg.dgps):
            jobs = [ReplicationJob(cfg, d, n, rep, geometries[kind], status_quo) for rep in range(cfg.replications)]
            logger.info(f"Monte Carlo: {kind}, n={n}, {cfg.replications} replications")
            if cfg.workers > 1:
                with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                    outcomes = list(pool.map(run_replication, jobs))
            else:
                outcomes = [run_replication(job) for job in jobs]
            for rep, outcome in enumerate(outcomes):
                if "error" in outcome:
                    logger.warning(f"Replication {rep} ({kind}, n={n}) failed: {outcome['error']}")
            row = {"n": n, "dgp": kind, **summarize(outcomes, columns)}
            failures[f"{kind}:{n}"] = int(row["failed"])
            rows.append(row)
    table = pd.DataFrame(rows)
    return McResult(table, failures, {k: g.summary() for k, g in geometries.items()},
                    time.perf_counter() - started)


def seed_variability(run: Callable[[int], TestResult], seeds: Sequence[int]) -> Tuple[pd.DataFrame, Dict[str, float]]:
    """
    Rerun one test across nuisance seeds.

    Returns a per-seed table and the spread of the statistic together with
    the share of rejections.
    """
    if len(seeds) == 0:
        raise InputError("Seed-variability loop needs at least one seed")
    rows = []
    for seed in seeds:
        result = run(int(seed))
        rows.append({"seed": int(seed), "statistic": result.statistic,
                     "critical_value": result.critical_value, "decision": int(result.decision)})
        logger.info(f"Seed {seed}: T={result.statistic:.4f}, decision={result.label}")
    frame = pd.DataFrame(rows)
    finite = frame["statistic"].replace([np.inf, -np.inf], np.nan).dropna()
    spread = {
        "seeds": len(rows),
        "reject_share": float(frame["decision"].mean()),
        "statistic_mean": float(finite.mean()) if len(finite) else float("nan"),
        "statistic_sd": float(finite.std(ddof=1)) if len(finite) > 1 else 0.0,
        "statistic_min": float(finite.min()) if len(finite) else float("nan"),
        "statistic_max": float(finite.max()) if len(finite) else float("nan"),
    }
    return frame, spread
