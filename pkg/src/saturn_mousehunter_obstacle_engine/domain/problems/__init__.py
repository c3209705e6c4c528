"""Built-in Benchmark Problems"""

from .geometric_put import make_geometric_put, make_geometric_put_reduced
from .indifference import make_indifference, make_indifference_reduced
from .registry import REDUCED_OF, build, default_parameters, problem_ids

__all__ = [
    "make_geometric_put",
    "make_geometric_put_reduced",
    "make_indifference",
    "make_indifference_reduced",
    "REDUCED_OF",
    "build",
    "default_parameters",
    "problem_ids",
]
