"""
Domain Errors
求解引擎异常定义
"""
from typing import Optional, Sequence


class ObstacleEngineError(Exception):
    """引擎异常基类"""

    code = "engine_error"
    exit_code = 3


class InvalidParameterError(ObstacleEngineError, ValueError):
    """问题参数非法"""

    code = "invalid_parameter"
    exit_code = 2


class ConfigError(ObstacleEngineError, ValueError):
    """运行配置非法"""

    code = "config_error"
    exit_code = 2


class PathBlowupError(ObstacleEngineError, ArithmeticError):
    """路径出现非有限值"""

    code = "path_blowup"

    def __init__(self, t: float, x: Sequence[float], path: Optional[int] = None, step: Optional[int] = None):
        self.t = t
        self.x = list(x)
        self.path = path
        self.step = step
        where = f"t={t:g}, x={self.x}"
        if path is not None:
            where = f"path {path}, step {step}, {where}"
        super().__init__(f"Non-finite Euler state at {where}")


class WeightSingularityError(ObstacleEngineError, ArithmeticError):
    """扩散矩阵奇异，无法构造Hermite权重"""

    code = "weight_singularity"

    def __init__(self, t: float, x: Sequence[float], det: float):
        self.t = t
        self.x = list(x)
        self.det = det
        super().__init__(f"Diffusion matrix singular at t={t:g}, x={self.x} (|det|={det:.3e})")


class EmptyCloudError(ObstacleEngineError, ValueError):
    """点云为空"""

    code = "empty_cloud"


class QuadratureError(ObstacleEngineError):
    """求积规则过粗或维度超限"""

    code = "quadrature_error"


class SchemeError(ObstacleEngineError, ArithmeticError):
    """格式中非线性项计算失败"""

    code = "scheme_error"

    def __init__(self, message: str, layer: Optional[int] = None, x: Optional[Sequence[float]] = None):
        self.layer = layer
        self.x = None if x is None else list(x)
        if layer is not None:
            message = f"{message} (layer {layer}, x={self.x})"
        super().__init__(message)


class AssumptionViolationError(ObstacleEngineError):
    """结构性假设未通过且未显式豁免"""

    code = "assumption_violation"

    def __init__(self, failed: Sequence[str]):
        self.failed = list(failed)
        super().__init__(f"Assumption F conditions failed: {', '.join(self.failed)}; set override_assumptions to proceed")


class InvalidLatticeError(ObstacleEngineError, ValueError):
    """二叉树概率不在(0,1)内"""

    code = "invalid_lattice"


class InsufficientDataError(ObstacleEngineError, ValueError):
    """收敛率分析数据不足"""

    code = "insufficient_data"
