"""
Sampling Service
Brownian增量、Euler一步转移、路径集合与Hermite权重

Increments come from a counter-based generator (Philox keyed by
(seed, block)) mapped through the inverse normal CDF, so an ensemble is a
pure function of (spec, grid, count, seed) whatever the worker count.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from scipy.special import ndtri

from saturn_mousehunter_obstacle_engine.domain.errors import (
    InvalidParameterError,
    PathBlowupError,
    WeightSingularityError,
)
from saturn_mousehunter_obstacle_engine.domain.models import (
    HermiteWeights,
    PathEnsemble,
    ProblemSpec,
    TimeGrid,
)
from saturn_mousehunter_obstacle_engine.infrastructure.aop.decorators import measure
from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import get_app_config
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger

log = get_logger(__name__)

BLOCK_PATHS = 4096
_U64 = 1 << 64
_INV_2_53 = 2.0 ** -53


def euler_step(spec: ProblemSpec, t: float, x: np.ndarray, h: float, dW: np.ndarray) -> np.ndarray:
    """x + μ(t,x)h + σ(t,x)·ΔW（σ取左端点），支持批量"""
    if not h > 0:
        raise InvalidParameterError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    dW = np.asarray(dW, dtype=float)
    mu = np.asarray(spec.drift(t, x), dtype=float)
    sigma = np.asarray(spec.diffusion(t, x), dtype=float)
    out = x + mu * h + np.einsum("...ij,...j->...i", sigma, dW)
    if not np.all(np.isfinite(out)):
        d = out.shape[-1]
        rows = np.all(np.isfinite(out.reshape(-1, d)), axis=-1)
        j = int(np.argmax(~rows))
        origin = np.broadcast_to(x, out.shape).reshape(-1, d)[j]
        raise PathBlowupError(t, origin, path=j if out.ndim > 1 else None, step=None)
    return out


def gaussian_block(seed: int, block: int, size: int) -> np.ndarray:
    """(seed, block) 键控的标准正态数（逆CDF变换）"""
    key = np.array([seed % _U64, block], dtype=np.uint64)
    raw = np.random.Philox(key=key).random_raw(size)
    uniforms = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53
    return ndtri(uniforms)


def _simulate_block(
    spec: ProblemSpec,
    grid: TimeGrid,
    seed: int,
    block: int,
    start: int,
    stop: int,
    states: np.ndarray,
    increments: np.ndarray,
) -> None:
    count = stop - start
    d = spec.dim
    h = grid.h
    z = gaussian_block(seed, block, count * grid.steps * d).reshape(count, grid.steps, d)
    dW = math.sqrt(h) * z
    increments[start:stop] = dW
    states[start:stop, 0, :] = spec.x0
    for i in range(grid.steps):
        t = grid.t(i)
        x = states[start:stop, i, :]
        try:
            states[start:stop, i + 1, :] = euler_step(spec, t, x, h, dW[:, i, :])
        except PathBlowupError as exc:
            raise PathBlowupError(exc.t, exc.x, path=start + (exc.path or 0), step=i) from None


@measure("sampling_simulate_seconds")
def simulate(
    spec: ProblemSpec,
    grid: TimeGrid,
    count: int,
    seed: int,
    workers: Optional[int] = None,
) -> PathEnsemble:
    """N 条Euler路径，路径按固定大小分块并行"""
    if count < 1:
        raise InvalidParameterError(f"path count must be positive, got {count}")
    workers = workers or get_app_config().workers
    states = np.empty((count, grid.steps + 1, spec.dim))
    increments = np.empty((count, grid.steps, spec.dim))
    bounds = [(b, s, min(s + BLOCK_PATHS, count)) for b, s in enumerate(range(0, count, BLOCK_PATHS))]

    log.info(f"Simulating {count} paths, n={grid.steps}, d={spec.dim}, seed={seed}, workers={workers}")
    if workers == 1 or len(bounds) == 1:
        for block, start, stop in bounds:
            _simulate_block(spec, grid, seed, block, start, stop, states, increments)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_simulate_block, spec, grid, seed, block, start, stop, states, increments)
                for block, start, stop in bounds
            ]
            # 按块顺序取结果，首个失败块的异常确定
            for future in futures:
                future.result()

    return PathEnsemble(grid=grid, seed=seed, states=states, increments=increments)


def truncation_level(h: float, c: float) -> float:
    """|ΔW| 截断阈值 c·√h·√(2 log(1/h))"""
    # h ≥ 1/e 时 log 项取 1
    return c * math.sqrt(h) * math.sqrt(2.0 * max(math.log(1.0 / h), 1.0))


def weights(
    spec: ProblemSpec,
    t: float,
    x: np.ndarray,
    dW: np.ndarray,
    h: float,
    truncate: Optional[float] = None,
) -> HermiteWeights:
    """H1 = σ^{-T}ΔW/h，H2 = σ^{-T}(ΔWΔWᵀ − hI)σ^{-1}/h²

    truncate: 可选常数 c，构造 H2 前把 |ΔW| 截断到 truncation_level(h, c)
    """
    if not h > 0:
        raise InvalidParameterError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    dW = np.asarray(dW, dtype=float)
    sigma = np.asarray(spec.diffusion(t, x), dtype=float)
    det = np.linalg.det(sigma)
    singular = ~(np.abs(det) >= spec.sigma_floor)
    if np.any(singular):
        d = sigma.shape[-1]
        j = int(np.argmax(np.ravel(singular)))
        point = np.broadcast_to(x, sigma.shape[:-1]).reshape(-1, d)[j]
        raise WeightSingularityError(t, point, float(np.ravel(det)[j]))

    inv = np.linalg.inv(sigma)
    h1 = np.einsum("...ji,...j->...i", inv, dW) / h

    dW2 = dW
    if truncate is not None:
        level = truncation_level(h, truncate)
        dW2 = np.clip(dW, -level, level)
    d = sigma.shape[-1]
    middle = np.einsum("...i,...j->...ij", dW2, dW2) - h * np.eye(d)
    h2 = np.swapaxes(inv, -1, -2) @ middle @ inv / (h * h)
    return HermiteWeights(h1=h1, h2=h2)
