"""
Estimator Models
条件期望估计器模型 - 分区、逐层局部仿射回归、Gauss-Hermite求积
"""
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class EstimatorConfig(BaseModel):
    """回归估计器配置"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    cells_per_dim: int = Field(default=8, ge=1, description="每维分区数")
    min_cell_count: Optional[int] = Field(default=None, ge=1, description="单元最少点数，缺省 10·(d+1)")
    rank_tol: float = Field(default=1e-10, gt=0, description="QR秩判定相对阈值")
    weight_truncation: bool = Field(default=False, description="构造H2前截断 |ΔW|")
    truncation_c: float = Field(default=1.0, gt=0, description="截断常数 c")
    value_truncation: bool = Field(default=True, description="逐层截断到有界族上界")
    singularity_guard: bool = Field(default=True, description="凹向坐标的二阶导保护")
    guard_delta: float = Field(default=1e-4, gt=0, description="保护阈值 δ/scale")
    control_variates: bool = Field(default=True, description="以一步增量的二次回归作控制变量（仅未截断权重）")
    axis_cells: Optional[List[int]] = Field(default=None, description="逐坐标分区数，覆盖 cells_per_dim 与问题的 smooth_axes")

    @field_validator("axis_cells")
    @classmethod
    def validate_axis_cells(cls, v):
        if v is not None and (not v or any(c < 1 for c in v)):
            raise ValueError("axis_cells must be non-empty with positive entries")
        return v

    def min_count(self, dim: int) -> int:
        return self.min_cell_count if self.min_cell_count is not None else 10 * (dim + 1)


class QuadratureConfig(BaseModel):
    """求积后端配置"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    nodes: int = Field(default=20, ge=1, description="每维Gauss-Hermite节点数 q")
    mesh_nodes: List[int] = Field(default_factory=lambda: [400], description="每维网格节点数")
    mesh_box: Optional[Tuple[List[float], List[float]]] = Field(default=None, description="网格盒，缺省用问题的 domain_box")
    interpolation: Literal["linear", "cubic"] = Field(default="cubic")

    @field_validator("mesh_nodes")
    @classmethod
    def validate_mesh_nodes(cls, v):
        if not v or any(m < 2 for m in v):
            raise ValueError("mesh_nodes must be non-empty with at least 2 nodes per dimension")
        return v


@dataclass(frozen=True)
class Partition:
    """分位数超立方体分区；不足点数的单元已合并成组"""
    splits: Tuple[np.ndarray, ...]          # 每维内部分割点 (c_k − 1,)
    cells_per_axis: Tuple[int, ...]
    group_of_cell: np.ndarray = field(repr=False)   # 展平张量单元 -> 组号
    counts: np.ndarray = field(repr=False)          # 每组点数
    lower: np.ndarray = field(repr=False)           # 点云包围盒
    upper: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.splits)

    @property
    def group_count(self) -> int:
        return int(self.counts.shape[0])

    def clamp(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def lookup(self, x: np.ndarray) -> np.ndarray:
        """状态 -> 组号（盒外点先投影到盒上）"""
        x = np.atleast_2d(self.clamp(np.asarray(x, dtype=float)))
        flat = np.zeros(x.shape[0], dtype=np.int64)
        for k, cuts in enumerate(self.splits):
            idx = np.searchsorted(cuts, x[:, k], side="right")
            flat = flat * self.cells_per_axis[k] + idx
        return self.group_of_cell[flat]


@dataclass(frozen=True)
class LayerEstimator:
    """一层的 (ψ̂, D̂ψ, D̂²ψ) 估计器

    channel layout: 0 = value, 1..d = gradient, d+1.. = raw hessian (row-major d×d)
    """
    partition: Partition
    centers: np.ndarray = field(repr=False)        # [G, d]
    coefficients: np.ndarray = field(repr=False)   # [G, d+1, C]
    fallback_cells: int = 0

    @property
    def dim(self) -> int:
        return self.partition.dim

    @property
    def counts(self) -> np.ndarray:
        return self.partition.counts


@dataclass(frozen=True)
class QuadratureRule:
    """N(0, I_d) 的张量Gauss-Hermite规则"""
    per_dim: int
    nodes: np.ndarray = field(repr=False)     # [Q, d]
    weights: np.ndarray = field(repr=False)   # [Q]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]


@dataclass(frozen=True)
class TensorMesh:
    """求积后端的张量网格（d ≤ 2）"""
    axes: Tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(a.shape[0] for a in self.axes)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a[0] for a in self.axes])

    @property
    def upper(self) -> np.ndarray:
        return np.array([a[-1] for a in self.axes])

    @property
    def nodes(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def escapes(self, y: np.ndarray) -> int:
        """落在网格盒外的点数"""
        outside = np.any((y < self.lower) | (y > self.upper), axis=-1)
        return int(np.count_nonzero(outside))
