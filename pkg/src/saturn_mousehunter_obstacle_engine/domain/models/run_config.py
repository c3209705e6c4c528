"""
Run Configuration Models
实验运行配置、结果行与收敛率表
"""
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from saturn_mousehunter_obstacle_engine.domain.models.estimator import EstimatorConfig, QuadratureConfig

RESULT_COLUMNS = (
    "problem", "backend", "n", "h", "paths", "seed", "cells_per_dim",
    "value", "exercise_frac_t0", "wall_ms", "status",
)

RATE_COLUMNS = (
    "h1", "h2", "value_h1", "value_h2", "reference",
    "error_ratio", "theory_quarter", "theory_half",
)


class RunConfig(BaseModel):
    """实验运行配置（JSON文档）"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    problem: str = Field(..., description="问题注册ID")
    params: Dict[str, Any] = Field(default_factory=dict, description="构造参数覆盖")
    steps: List[int] = Field(..., description="时间步数列表 n")
    paths: List[int] = Field(default_factory=lambda: [100_000], description="路径数列表 N")
    seeds: List[int] = Field(default_factory=lambda: [1], description="随机种子列表")
    backend: Literal["mc", "quadrature"] = Field(default="mc")
    estimator: EstimatorConfig = Field(default_factory=EstimatorConfig)
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    override_assumptions: bool = Field(default=False, description="假设未通过时仍然求解")
    probe_count: int = Field(default=256, ge=1)
    fd_step: float = Field(default=1e-4, gt=0)
    assumption_tolerance: float = Field(default=1e-6, ge=0)
    include_timings: bool = Field(default=False, description="CSV中写入wall_ms（会破坏逐字节可复现）")
    dump_ensemble: bool = Field(default=False)
    workers: Optional[int] = Field(default=None, ge=1)
    output_dir: Optional[Path] = Field(default=None)

    @field_validator("steps", "paths", "seeds")
    @classmethod
    def validate_non_empty(cls, v, info):
        if not v:
            raise ValueError(f"{info.field_name} must not be empty")
        return v

    @field_validator("steps", "paths")
    @classmethod
    def validate_positive(cls, v, info):
        if any(k < 1 for k in v):
            raise ValueError(f"{info.field_name} entries must be positive")
        return v

    @model_validator(mode="after")
    def validate_problem(self) -> "RunConfig":
        from saturn_mousehunter_obstacle_engine.domain.problems.registry import problem_ids

        if self.problem not in problem_ids():
            raise ValueError(f"Unknown problem '{self.problem}', expected one of {problem_ids()}")
        return self


class ResultRow(BaseModel):
    """一次 (n, N, seed) 求解的CSV行"""
    model_config = ConfigDict(frozen=True)

    problem: str
    backend: str
    n: int
    h: float
    paths: int
    seed: int
    cells_per_dim: int
    value: Optional[float] = None
    exercise_frac_t0: Optional[float] = None
    wall_ms: Optional[float] = None
    status: str = "ok"


class RateRow(BaseModel):
    """相邻两步长的误差比（h1 为较细步长）"""
    model_config = ConfigDict(frozen=True)

    h1: float
    h2: float
    value_h1: float
    value_h2: float
    reference: float
    error_ratio: Optional[float] = Field(default=None, description="(v^{h1}−ref)/(v^{h2}−ref)，分母过小时未定义")
    theory_quarter: float
    theory_half: float


class RateTable(BaseModel):
    """收敛率分析表"""
    model_config = ConfigDict(frozen=True)

    reference: float
    ref_floor: float
    rows: List[RateRow] = Field(default_factory=list)


class RunResult(BaseModel):
    """一次 run 的结果行与输出文件"""
    model_config = ConfigDict(frozen=True)

    rows: List[ResultRow] = Field(default_factory=list)
    files: List[Path] = Field(default_factory=list)

    @property
    def failed(self) -> List[ResultRow]:
        return [row for row in self.rows if row.status != "ok"]
