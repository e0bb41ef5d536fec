"""
fairfrontier Run Reports

Versioned JSON reports: input digest, resolved configuration, derived
tuning values, per-task results and optional timings. Serialization is
deterministic (sorted keys, fixed indentation, repr floats), so reruns with
the same data and configuration produce identical files.
"""

import json
import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd


logger = logging.getLogger(__name__)

REPORT_FORMAT = 1


def jsonable(value: Any) -> Any:
    """Convert numpy and dataclass values to plain JSON; non-finite floats become strings."""
    if is_dataclass(value) and not isinstance(value, type):
        return jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(data: Any, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(jsonable(data), f, sort_keys=True, indent=2)
        f.write("\n")
    return path


class Timings:
    """Wall-clock phase durations, collected only when enabled."""

    def __init__(self, enabled: bool = False):
        self.enabled = enabled
        self.phases: Dict[str, float] = {}

    @contextmanager
    def phase(self, name: str):
        started = time.perf_counter()
        try:
            yield
        finally:
            if self.enabled:
                self.phases[name] = round(time.perf_counter() - started, 6)

    def as_dict(self) -> Optional[Dict[str, float]]:
        return dict(self.phases) if self.enabled else None


@dataclass
class RunReport:
    """Everything needed to audit and reproduce one CLI run."""
    version: str
    command: str
    inputs: Dict[str, Any] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)
    derived: Dict[str, Any] = field(default_factory=dict)
    results: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    timings: Optional[Dict[str, float]] = None
    format: int = REPORT_FORMAT

    def add_result(self, name: str, value: Any) -> None:
        self.results[name] = jsonable(value)

    def add_artifact(self, path: Path) -> None:
        self.artifacts.append(Path(path).name)

    def to_dict(self) -> Dict[str, Any]:
        data = jsonable(asdict(self))
        if self.timings is None:
            data.pop("timings")
        return data

    def write(self, path: Path) -> Path:
        path = write_json(self.to_dict(), path)
        logger.info(f"Report written to {path}")
        return path


def results_frame(results: List[Dict[str, Any]]) -> pd.DataFrame:
    """One row per test: statistic, critical value, decision and interval where present."""
    rows = []
    for r in results:
        rows.append({
            "test": r.get("test", r.get("name", "-")),
            "n": r.get("n"),
            "alpha": r.get("alpha"),
            "statistic": r.get("statistic", r.get("estimate")),
            "critical_value": r.get("critical_value"),
            "decision": ("reject" if r.get("decision") else "fail to reject") if "decision" in r else "-",
            "interval": f"[{r['lo']:.4g}, {r['hi']:.4g}]" if "lo" in r else "-",
        })
    return pd.DataFrame(rows)


def format_results(results: List[Dict[str, Any]]) -> str:
    frame = results_frame(results)
    return frame.to_string(index=False, float_format=lambda v: f"{v:.4f}") + "\n"
