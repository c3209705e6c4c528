"""
Sampling Models
时间网格、路径集合与Hermite权重
"""
from dataclasses import dataclass, field

import numpy as np

from saturn_mousehunter_obstacle_engine.domain.errors import InvalidParameterError


@dataclass(frozen=True)
class TimeGrid:
    """等距时间网格 t_i = i·h"""
    horizon: float
    steps: int

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise InvalidParameterError(f"steps must be positive, got {self.steps}")
        if not self.horizon > 0:
            raise InvalidParameterError(f"horizon must be positive, got {self.horizon}")

    @property
    def h(self) -> float:
        return self.horizon / self.steps

    @property
    def knots(self) -> np.ndarray:
        # i·h 而非累加，保证 t_n = T
        return np.arange(self.steps + 1) * self.h

    def t(self, i: int) -> float:
        return i * self.h


@dataclass(frozen=True)
class PathEnsemble:
    """N 条Euler路径及其Brownian增量"""
    grid: TimeGrid
    seed: int
    states: np.ndarray = field(repr=False)       # [N, n+1, d]
    increments: np.ndarray = field(repr=False)   # [N, n, d]

    def __post_init__(self) -> None:
        self.states.setflags(write=False)
        self.increments.setflags(write=False)

    @property
    def count(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    def layer(self, i: int) -> np.ndarray:
        return self.states[:, i, :]


@dataclass(frozen=True)
class HermiteWeights:
    """(H0, H1, H2) 权重；可对单点或批量点"""
    h1: np.ndarray   # [..., d]
    h2: np.ndarray   # [..., d, d]

    @property
    def h0(self) -> float:
        return 1.0
