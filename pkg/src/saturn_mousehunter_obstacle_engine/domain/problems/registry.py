"""
Problem Registry
问题注册表 - 字符串ID到构造函数的映射
"""
import inspect
from typing import Any, Callable, Dict, List, Optional

from saturn_mousehunter_obstacle_engine.domain.errors import InvalidParameterError
from saturn_mousehunter_obstacle_engine.domain.models.problem_spec import ProblemSpec
from saturn_mousehunter_obstacle_engine.domain.problems.geometric_put import (
    make_geometric_put,
    make_geometric_put_reduced,
)
from saturn_mousehunter_obstacle_engine.domain.problems.indifference import (
    make_indifference,
    make_indifference_reduced,
)

_BUILDERS: Dict[str, Callable[..., ProblemSpec]] = {
    "geometric_put_3d": make_geometric_put,
    "geometric_put_1d": make_geometric_put_reduced,
    "indifference_2+1d": make_indifference,
    "indifference_1+1d": make_indifference_reduced,
}

# 降维问题 -> 对应的全维问题
REDUCED_OF: Dict[str, str] = {
    "geometric_put_3d": "geometric_put_1d",
    "indifference_2+1d": "indifference_1+1d",
}


def problem_ids() -> List[str]:
    return sorted(_BUILDERS)


def default_parameters(problem_id: str) -> Dict[str, Any]:
    """构造函数的默认参数"""
    builder = _get_builder(problem_id)
    out: Dict[str, Any] = {}
    for name, param in inspect.signature(builder).parameters.items():
        value = param.default
        out[name] = list(value) if isinstance(value, tuple) else value
    return out


def build(problem_id: str, *, sigma_floor: Optional[float] = None, **overrides: Any) -> ProblemSpec:
    """按ID构造问题，未知参数报错；sigma_floor 覆盖 |det σ| 下限"""
    builder = _get_builder(problem_id)
    known = set(inspect.signature(builder).parameters)
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise InvalidParameterError(f"Unknown parameters for '{problem_id}': {unknown}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
    spec = builder(**kwargs)
    if sigma_floor is not None:
        if not sigma_floor > 0:
            raise InvalidParameterError(f"sigma_floor must be positive, got {sigma_floor}")
        spec = spec.model_copy(update={"sigma_floor": float(sigma_floor)})
    return spec


def _get_builder(problem_id: str) -> Callable[..., ProblemSpec]:
    try:
        return _BUILDERS[problem_id]
    except KeyError:
        raise InvalidParameterError(f"Unknown problem '{problem_id}', expected one of {problem_ids()}") from None
