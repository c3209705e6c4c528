"""Domain Models for Obstacle Engine"""

# Problem models
from .problem_spec import (
    ProblemSpec,
    ControlFamily,
    AssumptionReport,
    HJBReport
)

from .sampling import (
    TimeGrid,
    PathEnsemble,
    HermiteWeights
)

from .estimator import (
    EstimatorConfig,
    QuadratureConfig,
    Partition,
    LayerEstimator,
    QuadratureRule,
    TensorMesh
)

from .solve_report import (
    LayerValues,
    LayerDiagnostics,
    SolveReport
)

from .reference import ReducedGBM

from .run_config import (
    RunConfig,
    ResultRow,
    RateRow,
    RateTable,
    RunResult,
    RESULT_COLUMNS,
    RATE_COLUMNS
)

__all__ = [
    # Problem
    "ProblemSpec",
    "ControlFamily",
    "AssumptionReport",
    "HJBReport",

    # Sampling
    "TimeGrid",
    "PathEnsemble",
    "HermiteWeights",

    # Estimators
    "EstimatorConfig",
    "QuadratureConfig",
    "Partition",
    "LayerEstimator",
    "QuadratureRule",
    "TensorMesh",

    # Scheme
    "LayerValues",
    "LayerDiagnostics",
    "SolveReport",

    # Reference
    "ReducedGBM",

    # Experiments
    "RunConfig",
    "ResultRow",
    "RateRow",
    "RateTable",
    "RunResult",
    "RESULT_COLUMNS",
    "RATE_COLUMNS",
]
