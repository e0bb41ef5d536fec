"""
fairfrontier Configuration Management

Loads and saves run configurations as YAML, one mapping per section.
Unknown sections and keys are rejected, and every value a run uses,
including derived ones, can be echoed back through to_dict().
"""

import copy
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .bootstrap import BootstrapConfig
from .core import ADMISSIBLE_HALF, FULL_CIRCLE, PARETO_ARC, DirectionGrid, LossSpec, make_direction_grid
from .errors import ConfigError
from .geometry import kappa_default
from .inference import DISTANCES, InferenceGrids
from .montecarlo import McConfig
from .nuisance import NuisanceLearner


THREADS_ENV = "FAIRFRONTIER_THREADS"


class RunConfig:
    """Configuration of a single run."""

    # Default values for every section
    DEFAULTS: Dict[str, Dict[str, Any]] = {
        "run": {
            "seed": 0,
            "threads": None,          # FAIRFRONTIER_THREADS, then 1
        },
        "data": {
            "input": None,
            "y_column": "y",
            "group_column": "g",
            "group_labels": None,     # [r_label, b_label]; first appearance when unset
            "covariates": None,
            "score_column": None,     # status-quo a*(X) column in the input file
        },
        "loss": {
            "mode": "classification",
            "table": None,            # {d0_y0, d0_y1, d1_y0, d1_y1} for a custom loss
        },
        "learner": {
            "method": "multinomial-lasso",
            "n_lambdas": 50,
            "lambda_min_ratio": 1e-3,
            "inner_folds": 5,
            "max_sweeps": 10000,
            "tol": 1e-7,
            "external": None,         # CSV of out-of-fold predictions
        },
        "crossfit": {
            "folds": 5,
        },
        "grid": {
            "directions": 1000,
            "half_directions": 500,
            "pareto_directions": 250,
            "resolution": 400,
        },
        "frontier": {
            "kappa_n": "sqrt-log",    # or a positive number
            "c_bound": 50.0,
            "etilde_tol": 1e-8,
            "band_candidates": 40,
        },
        "bootstrap": {
            "draws": 500,
            "step": None,             # n^(-1/3) when unset
            "varsigma": 1e-3,
        },
        "test": {
            "alpha": 0.05,
            "rho": "squared_euclidean",
            "full_directions": 360,
            "half_directions": 180,
            "pareto_directions": 90,
            "candidates": 40,
            "e_candidates": 11,
            "cs_scale": 5.0,
        },
        "policy": {
            "rule": "utilitarian",
            "split_ratio": 0.5,
            "capacity": None,
        },
        "mc": {
            "dgps": ["balanced", "r-skew"],
            "sizes": [1000, 5000, 10000],
            "replications": 200,
            "tests": ["skew", "lda", "dist-f"],
            "learner": "multinomial-lasso",
            "oracle_draws": 1000000,
            "workers": 1,
            "seed_repeats": 0,
        },
        "output": {
            "directory": "fairfrontier-out",
            "hyperplanes": 0,
            "record_timings": False,
        },
    }

    VALID_LOSS_MODES = ["classification", "custom"]
    VALID_LEARNERS = ["multinomial-lasso", "external"]
    VALID_RHO = list(DISTANCES)
    VALID_KAPPA_RULES = ["sqrt-log"]
    VALID_MC_TESTS = ["skew", "lda", "dist-f"]
    VALID_MC_LEARNERS = ["multinomial-lasso", "oracle-dgp"]

    def __init__(self, config_data: Optional[Dict[str, Any]] = None, source: Optional[Path] = None):
        self._source = source
        self._config: Dict[str, Dict[str, Any]] = copy.deepcopy(self.DEFAULTS)
        if config_data:
            self._merge(config_data)
        self.validate()

    def _merge(self, data: Dict[str, Any]) -> None:
        if not isinstance(data, dict):
            raise ConfigError(f"Config root must be a mapping, got {type(data).__name__}")
        for section, values in data.items():
            if section not in self.DEFAULTS:
                raise ConfigError(f"Unknown config section: {section}. Must be one of {list(self.DEFAULTS)}")
            if not isinstance(values, dict):
                raise ConfigError(f"Config section {section} must be a mapping")
            for key, value in values.items():
                if key not in self.DEFAULTS[section]:
                    raise ConfigError(f"Unknown config key: {section}.{key}")
                self._config[section][key] = value

    @classmethod
    def load(cls, path: Path) -> "RunConfig":
        """Load configuration from a YAML file."""
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            with open(path, 'r') as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Malformed config {path}: {e}") from None
        return cls(data, source=path)

    def save(self, path: Path) -> Path:
        """Write the resolved configuration as YAML."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as f:
            yaml.dump(self._config, f, default_flow_style=False)
        return path

    def get(self, dotted: str) -> Any:
        section, key = self._split(dotted)
        return self._config[section][key]

    def set(self, dotted: str, value: Any) -> None:
        """Set a value and re-validate; the old value is restored on error."""
        section, key = self._split(dotted)
        old = self._config[section][key]
        self._config[section][key] = value
        try:
            self.validate()
        except ConfigError:
            self._config[section][key] = old
            raise

    def _split(self, dotted: str):
        section, _, key = dotted.partition(".")
        if section not in self.DEFAULTS or key not in self.DEFAULTS[section]:
            raise ConfigError(f"Unknown config key: {dotted}")
        return section, key

    def validate(self) -> None:
        c = self._config
        self._check_choice("loss.mode", self.VALID_LOSS_MODES)
        if c["loss"]["mode"] == "custom" and not isinstance(c["loss"]["table"], dict):
            raise ConfigError("loss.table must be a mapping with d0_y0, d0_y1, d1_y0, d1_y1 for a custom loss")
        self._check_choice("learner.method", self.VALID_LEARNERS)
        if c["learner"]["method"] == "external" and not c["learner"]["external"]:
            raise ConfigError("learner.external must name a prediction file for the external learner")
        self._check_choice("test.rho", self.VALID_RHO)
        self._check_int("crossfit.folds", 2)
        self._check_int("learner.n_lambdas", 1)
        self._check_int("learner.inner_folds", 0)
        self._check_int("learner.max_sweeps", 1)
        for key in ("grid.directions", "grid.half_directions", "grid.pareto_directions",
                    "test.full_directions", "test.half_directions", "test.pareto_directions"):
            self._check_int(key, 4)
        self._check_int("grid.resolution", 2)
        self._check_int("frontier.band_candidates", 2)
        self._check_int("test.candidates", 2)
        self._check_int("test.e_candidates", 1)
        self._check_int("bootstrap.draws", 100)
        self._check_int("output.hyperplanes", 0)
        self._check_int("mc.replications", 1)
        self._check_int("mc.workers", 1)
        self._check_int("mc.seed_repeats", 0)
        self._check_int("run.seed", 0)
        self._check_open("test.alpha", 0.0, 1.0)
        self._check_open("policy.split_ratio", 0.0, 1.0)
        self._check_open("learner.lambda_min_ratio", 0.0, 1.0)
        if c["policy"]["capacity"] is not None:
            cap = c["policy"]["capacity"]
            if not isinstance(cap, (int, float)) or not 0.0 < cap <= 1.0:
                raise ConfigError(f"Invalid policy.capacity: {cap}. Must lie in (0, 1]")
        for key in ("bootstrap.varsigma", "frontier.c_bound", "frontier.etilde_tol", "test.cs_scale", "learner.tol"):
            value = self.get(key)
            if not isinstance(value, (int, float)) or value < 0 or (key != "bootstrap.varsigma" and value == 0):
                raise ConfigError(f"Invalid {key}: {value}. Must be a positive number")
        step = c["bootstrap"]["step"]
        if step is not None and (not isinstance(step, (int, float)) or step <= 0):
            raise ConfigError(f"Invalid bootstrap.step: {step}. Must be positive or null")
        kappa = c["frontier"]["kappa_n"]
        if kappa not in self.VALID_KAPPA_RULES and not (isinstance(kappa, (int, float)) and kappa >= 0):
            raise ConfigError(f"Invalid frontier.kappa_n: {kappa}. Must be one of {self.VALID_KAPPA_RULES} "
                              f"or a nonnegative number")
        threads = c["run"]["threads"]
        if threads is not None and (not isinstance(threads, int) or threads < 1):
            raise ConfigError(f"Invalid run.threads: {threads}. Must be a positive integer")
        for test in c["mc"]["tests"]:
            if test not in self.VALID_MC_TESTS:
                raise ConfigError(f"Invalid mc.tests entry: {test}. Must be one of {self.VALID_MC_TESTS}")
        self._check_choice("mc.learner", self.VALID_MC_LEARNERS)
        labels = c["data"]["group_labels"]
        if labels is not None and (not isinstance(labels, list) or len(labels) != 2):
            raise ConfigError(f"Invalid data.group_labels: {labels}. Must be a list of two labels")

    def _check_choice(self, key: str, valid: List[str]) -> None:
        value = self.get(key)
        if value not in valid:
            raise ConfigError(f"Invalid {key}: {value}. Must be one of {valid}")

    def _check_int(self, key: str, minimum: int) -> None:
        value = self.get(key)
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            raise ConfigError(f"Invalid {key}: {value}. Must be an integer >= {minimum}")

    def _check_open(self, key: str, lo: float, hi: float) -> None:
        value = self.get(key)
        if not isinstance(value, (int, float)) or not lo < value < hi:
            raise ConfigError(f"Invalid {key}: {value}. Must lie in ({lo}, {hi})")

    @property
    def source(self) -> Optional[Path]:
        return self._source

    @property
    def seed(self) -> int:
        return self._config["run"]["seed"]

    @seed.setter
    def seed(self, value: int) -> None:
        self.set("run.seed", value)

    @property
    def threads(self) -> int:
        """run.threads, else FAIRFRONTIER_THREADS, else 1."""
        value = self._config["run"]["threads"]
        if value is not None:
            return value
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"Invalid {THREADS_ENV}: {env}. Must be a positive integer") from None
            if threads < 1:
                raise ConfigError(f"Invalid {THREADS_ENV}: {env}. Must be a positive integer")
            return threads
        return 1

    @threads.setter
    def threads(self, value: int) -> None:
        self.set("run.threads", value)

    @property
    def alpha(self) -> float:
        return float(self._config["test"]["alpha"])

    @alpha.setter
    def alpha(self, value: float) -> None:
        self.set("test.alpha", value)

    @property
    def rho(self) -> str:
        return self._config["test"]["rho"]

    @rho.setter
    def rho(self, value: str) -> None:
        self.set("test.rho", value)

    @property
    def folds(self) -> int:
        return self._config["crossfit"]["folds"]

    @property
    def output_dir(self) -> Path:
        return Path(self._config["output"]["directory"])

    @output_dir.setter
    def output_dir(self, value) -> None:
        self.set("output.directory", str(value))

    @property
    def record_timings(self) -> bool:
        return bool(self._config["output"]["record_timings"])

    def loss_spec(self) -> LossSpec:
        if self._config["loss"]["mode"] == "classification":
            return LossSpec.classification()
        return LossSpec.from_table(self._config["loss"]["table"])

    def learner(self, external: Optional[np.ndarray] = None, seed: Optional[int] = None) -> NuisanceLearner:
        lc = self._config["learner"]
        return NuisanceLearner(
            method=lc["method"], n_lambdas=lc["n_lambdas"], lambda_min_ratio=float(lc["lambda_min_ratio"]),
            inner_folds=lc["inner_folds"], max_sweeps=lc["max_sweeps"], tol=float(lc["tol"]),
            seed=self.seed if seed is None else seed, external=external,
        )

    def bootstrap(self) -> BootstrapConfig:
        bc = self._config["bootstrap"]
        return BootstrapConfig(draws=bc["draws"], seed=self.seed, step=bc["step"],
                               varsigma=float(bc["varsigma"]), threads=self.threads)

    def direction_grid(self) -> DirectionGrid:
        return make_direction_grid(self._config["grid"]["directions"], FULL_CIRCLE)

    def half_grid(self) -> DirectionGrid:
        return make_direction_grid(self._config["grid"]["half_directions"], ADMISSIBLE_HALF)

    def pareto_grid(self) -> DirectionGrid:
        return make_direction_grid(self._config["grid"]["pareto_directions"], PARETO_ARC)

    def kappa(self, n: int) -> float:
        value = self._config["frontier"]["kappa_n"]
        return kappa_default(n) if value == "sqrt-log" else float(value)

    def inference_grids(self, n: int) -> InferenceGrids:
        tc, fc = self._config["test"], self._config["frontier"]
        return InferenceGrids(
            full=make_direction_grid(tc["full_directions"], FULL_CIRCLE),
            half=make_direction_grid(tc["half_directions"], ADMISSIBLE_HALF),
            arc=make_direction_grid(tc["pareto_directions"], PARETO_ARC),
            candidates=tc["candidates"], e_candidates=tc["e_candidates"], cs_scale=float(tc["cs_scale"]),
            c_bound=float(fc["c_bound"]), etilde_tol=float(fc["etilde_tol"]), kappa_n=self.kappa(n),
        )

    def mc_config(self) -> McConfig:
        mc, bc, tc = self._config["mc"], self._config["bootstrap"], self._config["test"]
        kappa = self._config["frontier"]["kappa_n"]
        return McConfig(
            dgps=tuple(mc["dgps"]), sizes=tuple(int(n) for n in mc["sizes"]), replications=mc["replications"],
            tests=tuple(mc["tests"]), alpha=self.alpha, folds=self.folds, learner=mc["learner"],
            n_lambdas=self._config["learner"]["n_lambdas"], bootstrap_draws=bc["draws"],
            varsigma=float(bc["varsigma"]), step=bc["step"], full_directions=tc["full_directions"],
            half_directions=tc["half_directions"], pareto_directions=tc["pareto_directions"],
            candidates=tc["candidates"], e_candidates=tc["e_candidates"], cs_scale=float(tc["cs_scale"]),
            kappa_n=None if kappa == "sqrt-log" else float(kappa), rho=self.rho,
            oracle_draws=mc["oracle_draws"], master_seed=self.seed, workers=mc["workers"],
        )

    def derived(self, n: int) -> Dict[str, Any]:
        """Values computed from the configuration for a sample of size n."""
        bootstrap = self.bootstrap()
        return {"n": n, "kappa_n": self.kappa(n), "s_n": bootstrap.step_for(n), "threads": self.threads}

    def to_dict(self) -> Dict[str, Any]:
        """Return configuration as dictionary."""
        return copy.deepcopy(self._config)
