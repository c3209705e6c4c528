"""
Solve Report Models
求解结果模型 - 逐层值、逐层诊断与求解报告
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from saturn_mousehunter_obstacle_engine.domain.models.problem_spec import AssumptionReport


@dataclass(frozen=True)
class LayerValues:
    """t_i 层的 vʰ 值（路径点或网格节点上）"""
    index: int
    values: np.ndarray = field(repr=False)
    exercise: np.ndarray = field(repr=False)
    guard_activations: int = 0
    evaluations: int = 0
    fallback_cells: int = 0
    cells: int = 0


class LayerDiagnostics(BaseModel):
    """逐层诊断"""
    model_config = ConfigDict(frozen=True)

    index: int
    time: float
    min: float
    max: float
    mean: float
    exercise_fraction: float
    cells: int = 0
    fallback_cells: int = 0
    guard_activations: int = 0

    @classmethod
    def from_layer(cls, layer: LayerValues, time: float) -> "LayerDiagnostics":
        values = layer.values
        return cls(
            index=layer.index,
            time=time,
            min=float(values.min()),
            max=float(values.max()),
            mean=float(values.mean()),
            exercise_fraction=float(layer.exercise.mean()),
            cells=layer.cells,
            fallback_cells=layer.fallback_cells,
            guard_activations=layer.guard_activations,
        )


class SolveReport(BaseModel):
    """求解报告"""
    model_config = ConfigDict(frozen=True)

    problem_id: str
    backend: str
    steps: int
    h: float
    paths: int = 0
    seed: Optional[int] = None
    value_at_origin: float = Field(..., description="v̂ʰ(0, x0)")
    obstacle_at_origin: float
    exercise_frac_t0: float
    layers: List[LayerDiagnostics] = Field(default_factory=list)
    assumptions: Optional[AssumptionReport] = None
    guard_activations: int = 0
    guard_evaluations: int = 0
    boundary_escapes: int = 0
    value_bound: Optional[float] = None
    timings: Dict[str, float] = Field(default_factory=dict, description="各阶段墙钟秒数")
    config: Dict[str, Any] = Field(default_factory=dict, description="配置回显")

    @property
    def guard_fraction(self) -> float:
        return self.guard_activations / self.guard_evaluations if self.guard_evaluations else 0.0

    @property
    def wall_ms(self) -> float:
        return 1000.0 * sum(self.timings.values())
