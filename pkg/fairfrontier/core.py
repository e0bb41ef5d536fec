"""
fairfrontier Core Types

Observations, datasets, losses, directions, risk points and group scaling.
Group codes are canonical: R = 0, B = 1, and every (n, 2) array in the
package stores the r column first.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InputError


logger = logging.getLogger(__name__)

R = 0
B = 1
GROUPS = ("r", "b")

FULL_CIRCLE = (0.0, 2.0 * np.pi)
PARETO_ARC = (np.pi, 1.5 * np.pi)
# Directions with q1 + q2 >= 0, where the improvement cone has a finite support function.
ADMISSIBLE_HALF = (-0.25 * np.pi, 0.75 * np.pi)

U1 = np.array([-1.0, 0.0])
U2 = np.array([0.0, -1.0])

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class Observation:
    """A single (Y, G, X) record."""
    y: float
    g: str
    x: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Columnar sample of n observations.

    Attributes:
        y: outcomes, shape (n,)
        group: canonical group codes (R or B), shape (n,)
        x: covariates, shape (n, d_x)
        labels: original labels of (r, b)
        columns: covariate column names
    """
    y: np.ndarray
    group: np.ndarray
    x: np.ndarray
    labels: Tuple[str, str] = GROUPS
    columns: Tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        group = np.asarray(self.group, dtype=np.int8)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        n = y.shape[0]
        if n < 2:
            raise InputError(f"Dataset needs at least 2 observations, got {n}")
        if group.shape != (n,) or x.shape[0] != n:
            raise InputError(f"Misaligned dataset arrays: y {y.shape}, group {group.shape}, x {x.shape}")
        if not np.isin(group, (R, B)).all():
            raise InputError("Group codes must be 0 (r) or 1 (b)")
        bad = ~np.isfinite(x).all(axis=1)
        if bad.any():
            raise InputError(f"Non-finite covariate in observation {int(np.flatnonzero(bad)[0])}")
        for code, name in ((R, "r"), (B, "b")):
            if not (group == code).any():
                raise InputError(f"group absent: no observations for group {name} ({self.labels[code]})")
        columns = tuple(self.columns) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "columns", columns)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d_x(self) -> int:
        return self.x.shape[1]

    def mask(self, code: int) -> np.ndarray:
        return self.group == code

    def subset(self, index: np.ndarray) -> "Dataset":
        """Rows at `index`, in that order."""
        index = np.asarray(index)
        return Dataset(self.y[index], self.group[index], self.x[index], self.labels, self.columns)

    def with_x(self, x: np.ndarray) -> "Dataset":
        return Dataset(self.y, self.group, x, self.labels, self.columns)

    def observations(self) -> Iterator[Observation]:
        for i in range(self.n):
            yield Observation(float(self.y[i]), self.labels[self.group[i]], tuple(self.x[i]))

    @classmethod
    def from_observations(cls, observations: Sequence[Observation],
                          labels: Optional[Tuple[str, str]] = None) -> "Dataset":
        """Build a dataset, mapping labels to (r, b) by first appearance unless pinned."""
        if labels is None:
            seen: List[str] = []
            for obs in observations:
                if obs.g not in seen:
                    seen.append(obs.g)
            if len(seen) != 2:
                raise InputError(f"Expected exactly two group labels, found {seen}")
            labels = (seen[0], seen[1])
        lookup = {labels[0]: R, labels[1]: B}
        try:
            group = np.array([lookup[obs.g] for obs in observations], dtype=np.int8)
        except KeyError as e:
            raise InputError(f"Unknown group label: {e.args[0]}. Must be one of {list(labels)}") from None
        y = np.array([obs.y for obs in observations], dtype=float)
        x = np.array([obs.x for obs in observations], dtype=float)
        return cls(y, group, x, labels)


LossFn = Callable[[int, np.ndarray], np.ndarray]


def _misclassification(d: int, y: np.ndarray) -> np.ndarray:
    return (y != d).astype(float)


@dataclass(frozen=True)
class LossSpec:
    """
    Loss ℓ(d, y) for binary decisions.

    Only "classification" gets the multinomial nuisance route; every other
    loss is "custom" and goes through per-group L1 least squares.
    """
    mode: str = "classification"
    fn: LossFn = _misclassification
    c2: Optional[float] = None  # second-moment bound, informational
    description: str = "1{d != y}"

    VALID_MODES = ("classification", "custom")

    def __post_init__(self):
        if self.mode not in self.VALID_MODES:
            raise InputError(f"Invalid loss mode: {self.mode}. Must be one of {list(self.VALID_MODES)}")

    def __call__(self, d: int, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(d, np.asarray(y, dtype=float)), dtype=float)

    @classmethod
    def classification(cls) -> "LossSpec":
        return cls()

    @classmethod
    def scaled(cls, factor: float) -> "LossSpec":
        """factor * 1{d != y}, treated as a custom loss."""
        return cls(mode="custom", fn=lambda d, y: factor * (y != d).astype(float),
                   c2=factor ** 2, description=f"{factor:g} * 1{{d != y}}")

    @classmethod
    def from_table(cls, table: dict) -> "LossSpec":
        """
        Tabulated loss for binary outcomes.

        Args:
            table: mapping with keys d0_y0, d0_y1, d1_y0, d1_y1
        """
        keys = ("d0_y0", "d0_y1", "d1_y0", "d1_y1")
        missing = [k for k in keys if k not in table]
        if missing:
            raise InputError(f"Loss table missing entries: {missing}")
        values = {k: float(table[k]) for k in keys}
        if not all(np.isfinite(v) for v in values.values()):
            raise InputError(f"Loss table has non-finite entries: {values}")

        def fn(d: int, y: np.ndarray) -> np.ndarray:
            if not np.isin(y, (0.0, 1.0)).all():
                raise InputError("Tabulated loss requires binary outcomes")
            return np.where(y == 1.0, values[f"d{d}_y1"], values[f"d{d}_y0"])

        if values == {"d0_y0": 0.0, "d0_y1": 1.0, "d1_y0": 1.0, "d1_y1": 0.0}:
            return cls.classification()
        return cls(mode="custom", fn=fn, c2=max(v * v for v in values.values()),
                   description=f"table {values}")


@dataclass(frozen=True, eq=False)
class LossQuad:
    """Per-observation L_d^g = ℓ(d, Y)·1{G = g}; columns are (r, b)."""
    l0: np.ndarray  # (n, 2)
    l1: np.ndarray  # (n, 2)

    @property
    def delta(self) -> np.ndarray:
        return self.l1 - self.l0

    @property
    def n(self) -> int:
        return self.l0.shape[0]


def compute_loss_quad(dataset: Dataset, loss: LossSpec) -> LossQuad:
    """Evaluate the loss at both decisions and split it by group."""
    member = np.column_stack([dataset.mask(R), dataset.mask(B)]).astype(float)
    quad = []
    for d in (0, 1):
        values = loss(d, dataset.y)
        bad = ~np.isfinite(values)
        if bad.any():
            raise InputError(f"Non-finite loss value at observation {int(np.flatnonzero(bad)[0])} (d={d})")
        quad.append(values[:, None] * member)
    return LossQuad(l0=quad[0], l1=quad[1])


@dataclass(frozen=True)
class Direction:
    """Unit vector q = (q1, q2)."""
    q1: float
    q2: float

    def __post_init__(self):
        norm = np.hypot(self.q1, self.q2)
        if abs(norm - 1.0) > UNIT_TOL:
            raise InputError(f"Direction ({self.q1}, {self.q2}) has norm {norm}, expected 1")

    @classmethod
    def from_angle(cls, angle: float) -> "Direction":
        return cls(float(np.cos(angle)), float(np.sin(angle)))

    @classmethod
    def normalized(cls, q) -> "Direction":
        q = np.asarray(q, dtype=float)
        norm = np.linalg.norm(q)
        if norm == 0:
            raise InputError("Cannot normalize the zero vector")
        return cls(float(q[0] / norm), float(q[1] / norm))

    @property
    def angle(self) -> float:
        return float(np.arctan2(self.q2, self.q1) % (2 * np.pi))

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2])


DirectionLike = Union[Direction, np.ndarray, Sequence[float]]


def as_vector(q: DirectionLike) -> np.ndarray:
    if isinstance(q, Direction):
        return q.as_array()
    return np.asarray(q, dtype=float)


@dataclass(frozen=True, eq=False)
class DirectionGrid:
    """Angle-uniform directions on an arc of the circle."""
    angles: np.ndarray
    arc: Tuple[float, float]
    vectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vectors = np.column_stack([np.cos(self.angles), np.sin(self.angles)])
        object.__setattr__(self, "vectors", vectors)

    @property
    def size(self) -> int:
        return self.angles.shape[0]

    @property
    def directions(self) -> List[Direction]:
        return [Direction(float(a), float(b)) for a, b in self.vectors]

    @property
    def spacing(self) -> float:
        return float(self.angles[1] - self.angles[0])

    def __len__(self) -> int:
        return self.size


def is_full_circle(arc: Tuple[float, float]) -> bool:
    return bool(np.isclose(arc[1] - arc[0], 2 * np.pi))


def make_direction_grid(N: int, arc: Tuple[float, float] = FULL_CIRCLE) -> DirectionGrid:
    """
    Build N equally spaced directions on `arc`.

    A full-circle arc excludes its endpoint; any other arc includes both ends.
    """
    if N < 2:
        raise InputError(f"Direction grid needs N >= 2, got {N}")
    lo, hi = float(arc[0]), float(arc[1])
    if not lo < hi:
        raise InputError(f"Invalid arc [{lo}, {hi}]: angle_lo must be below angle_hi")
    angles = np.linspace(lo, hi, N, endpoint=not is_full_circle((lo, hi)))
    return DirectionGrid(angles=angles, arc=(lo, hi))


@dataclass(frozen=True)
class RiskPoint:
    """Group risks (e_r, e_b)."""
    e_r: float
    e_b: float

    def __post_init__(self):
        if not (np.isfinite(self.e_r) and np.isfinite(self.e_b)):
            raise InputError(f"Risk point must be finite, got ({self.e_r}, {self.e_b})")

    @classmethod
    def of(cls, e) -> "RiskPoint":
        e = np.asarray(e, dtype=float)
        return cls(float(e[0]), float(e[1]))

    @property
    def gap(self) -> float:
        return abs(self.e_r - self.e_b)

    def as_array(self) -> np.ndarray:
        return np.array([self.e_r, self.e_b])

    def dominates(self, other: "RiskPoint", slack: float = 0.0) -> bool:
        """Weak fairness-accuracy preference: no worse in both risks and in the gap."""
        return (self.e_r <= other.e_r + slack
                and self.e_b <= other.e_b + slack
                and self.gap <= other.gap + slack)


@dataclass(frozen=True)
class GroupScale:
    """Group proportions and M = diag(1/μ_r, 1/μ_b)."""
    mu_r: float
    mu_b: float

    def __post_init__(self):
        for name, mu in (("mu_r", self.mu_r), ("mu_b", self.mu_b)):
            if not 0.0 < mu < 1.0:
                raise InputError(f"Invalid {name}: {mu}. Must lie in (0, 1)")

    @property
    def mu(self) -> np.ndarray:
        return np.array([self.mu_r, self.mu_b])

    @property
    def m(self) -> np.ndarray:
        """Diagonal of M."""
        return 1.0 / self.mu

    @property
    def M(self) -> np.ndarray:
        return np.diag(self.m)

    @property
    def M_inv(self) -> np.ndarray:
        return np.diag(self.mu)


def group_proportions(dataset: Dataset) -> GroupScale:
    n_r = int(dataset.mask(R).sum())
    n_b = dataset.n - n_r
    if n_r == 0 or n_b == 0:
        raise InputError("group absent")
    return GroupScale(n_r / dataset.n, n_b / dataset.n)
