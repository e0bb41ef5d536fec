"""
Shared fixtures.

The discrete design has a single covariate with three support points. With
the nuisance set to the empirical cell means of ΔL, the estimated support
function equals the brute-force maximum over the 2^3 deterministic
cell policies, which gives exact reference values.
"""

import itertools
from pathlib import Path

import numpy as np
import pytest

from fairfrontier.core import B, R, Dataset, GroupScale, LossSpec, RiskPoint, make_direction_grid
from fairfrontier.policy import evaluate_decisions
from fairfrontier.simulate import DgpSpec, generate, oracle_learner
from fairfrontier.supportfn import ScoreMaterial, SupportFunctionEstimate, cross_fit_estimate


ROOT = Path(__file__).resolve().parent.parent

# P(Y = 1 | g, x) for x = 0, 1, 2
CELL_PROBS = {R: (0.2, 0.5, 0.85), B: (0.7, 0.45, 0.1)}


def make_discrete(n: int, seed: int, p_group: float = 0.6) -> Dataset:
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 3, size=n)
    group = np.where(rng.random(n) < p_group, R, B).astype(np.int8)
    p = np.where(group == R, np.take(CELL_PROBS[R], x), np.take(CELL_PROBS[B], x))
    y = (rng.random(n) < p).astype(float)
    return Dataset(y, group, x.reshape(-1, 1).astype(float))


def cell_mean_delta(dataset: Dataset, loss: LossSpec) -> np.ndarray:
    """Empirical E[ΔL | X] on each support point, one row per observation."""
    material = ScoreMaterial.build(dataset, loss, np.zeros((dataset.n, 2)))
    out = np.zeros((dataset.n, 2))
    for value in np.unique(dataset.x[:, 0]):
        cell = dataset.x[:, 0] == value
        out[cell] = material.delta_l[cell].mean(axis=0)
    return out


def brute_force_points(dataset: Dataset, loss: LossSpec) -> np.ndarray:
    """Risk pairs of every deterministic policy that is constant on each cell."""
    cells = np.unique(dataset.x[:, 0])
    points = []
    for choice in itertools.product((0, 1), repeat=cells.shape[0]):
        lookup = dict(zip(cells, choice))
        decisions = np.array([lookup[v] for v in dataset.x[:, 0]], dtype=float)
        points.append(evaluate_decisions(dataset, loss, decisions).as_array())
    return np.array(points)


def one_sided_material(n: int = 10) -> ScoreMaterial:
    """Feasible set {(t, 1): 0 <= t <= 0.5}, strictly above the 45-degree line."""
    group = np.array([R, B] * (n // 2))
    is_r, is_b = (group == R).astype(float), (group == B).astype(float)
    l0 = np.column_stack([np.zeros(n), is_b])
    l1 = np.column_stack([0.5 * is_r, is_b])
    return ScoreMaterial(l0, l1, l1 - l0, GroupScale(0.5, 0.5), group)


@pytest.fixture
def loss():
    return LossSpec.classification()


@pytest.fixture
def discrete_data():
    return make_discrete(3000, seed=11)


@pytest.fixture
def discrete_sfe(discrete_data, loss):
    material = ScoreMaterial.build(discrete_data, loss, cell_mean_delta(discrete_data, loss))
    return SupportFunctionEstimate(material, make_direction_grid(360))


@pytest.fixture
def discrete_vertices(discrete_data, loss):
    return brute_force_points(discrete_data, loss)


@pytest.fixture(scope="session")
def balanced_dgp():
    return DgpSpec.named("balanced")


@pytest.fixture(scope="session")
def balanced_data(balanced_dgp):
    return generate(balanced_dgp, 4000, seed=3)


@pytest.fixture(scope="session")
def balanced_oracle_sfe(balanced_dgp, balanced_data):
    """Cross-fitted estimate with the closed-form nuisance."""
    return cross_fit_estimate(balanced_data, LossSpec.classification(), oracle_learner(balanced_dgp),
                              K=2, seed=0, grid=make_direction_grid(360))


@pytest.fixture(scope="session")
def rskew_dgp():
    return DgpSpec.named("r-skew")


@pytest.fixture(scope="session")
def rskew_oracle_sfe(rskew_dgp):
    data = generate(rskew_dgp, 4000, seed=5)
    return cross_fit_estimate(data, LossSpec.classification(), oracle_learner(rskew_dgp),
                              K=2, seed=0, grid=make_direction_grid(360))


@pytest.fixture
def toy_path():
    return ROOT / "data" / "toy.csv"


@pytest.fixture
def toy_scores_path():
    return ROOT / "data" / "toy_scores.csv"


@pytest.fixture
def small_csv(tmp_path):
    """Write a CSV from a header and rows and return its path."""
    def write(header, rows, name="data.csv"):
        path = tmp_path / name
        lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
        return path
    return write


def assert_close_point(point: RiskPoint, expected, tol: float, label: str = "point"):
    assert abs(point.e_r - expected[0]) <= tol and abs(point.e_b - expected[1]) <= tol, \
        f"{label} ({point.e_r:.4f}, {point.e_b:.4f}) not within {tol} of {tuple(expected)}"
