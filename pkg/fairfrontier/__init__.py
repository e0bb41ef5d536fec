"""fairfrontier - Fairness-Accuracy Frontier estimation and inference"""

__version__ = "1.0.0"
__author__ = "fairfrontier developers"

from .core import Dataset, Direction, DirectionGrid, LossSpec, RiskPoint, make_direction_grid
from .supportfn import SupportFunctionEstimate, cross_fit_estimate
from .geometry import estimate_feasible_set, estimate_frontier, fairest_point
from .inference import distance_to_F_ci, estimate_status_quo, test_lda, test_weak_skew
from .config import RunConfig
