"""
Estimator Service
条件期望估计 - 分位数超立方体分区上的局部仿射回归（蒙特卡洛后端）
与张量Gauss-Hermite求积（确定性后端）
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.linalg import qr, solve_triangular

from saturn_mousehunter_obstacle_engine.application.services.sampling_service import euler_step, weights
from saturn_mousehunter_obstacle_engine.domain.errors import (
    EmptyCloudError,
    InvalidParameterError,
    QuadratureError,
)
from saturn_mousehunter_obstacle_engine.domain.models import (
    LayerEstimator,
    Partition,
    ProblemSpec,
    QuadratureRule,
)
from saturn_mousehunter_obstacle_engine.infrastructure.aop.decorators import measure
from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import get_app_config
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger

log = get_logger(__name__)

MAX_QUADRATURE_DIM = 2


def build_partition(
    points: np.ndarray,
    cells_per_dim: Union[int, Sequence[int]],
    min_cell_count: int,
) -> Partition:
    """按边缘分位数切分；点数不足的单元沿最后一维与相邻单元合并

    cells_per_dim is either one count for every axis or one count per axis.
    Within each line of cells (all coordinates fixed except the last one)
    cells are accumulated in order until the running count reaches
    min_cell_count; a short tail joins the line's last group. A whole line
    below min_cell_count joins the previous group (or the first group
    formed after it).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        raise EmptyCloudError("cannot partition an empty point cloud")
    n, d = points.shape
    counts = (cells_per_dim,) * d if np.isscalar(cells_per_dim) else tuple(int(c) for c in cells_per_dim)
    if len(counts) != d:
        raise InvalidParameterError(f"expected {d} per-axis cell counts, got {len(counts)}")
    if min(counts) < 1 or min_cell_count < 1:
        raise InvalidParameterError("cells_per_dim and min_cell_count must be positive")

    splits = tuple(
        np.quantile(points[:, k], np.arange(1, c) / c) if c > 1 else np.empty(0)
        for k, c in enumerate(counts)
    )
    total = int(np.prod(counts))
    line_length = counts[-1]

    flat = np.zeros(n, dtype=np.int64)
    for k, cuts in enumerate(splits):
        flat = flat * counts[k] + np.searchsorted(cuts, points[:, k], side="right")
    cell_counts = np.bincount(flat, minlength=total)

    group_of_cell = np.full(total, -1, dtype=np.int64)
    group_counts: List[int] = []
    pending: List[int] = []

    def _open(cells: List[int]) -> None:
        g = len(group_counts)
        members = pending + cells
        group_of_cell[members] = g
        group_counts.append(int(cell_counts[members].sum()))
        pending.clear()

    def _join_last(cells: List[int]) -> None:
        group_of_cell[cells] = len(group_counts) - 1
        group_counts[-1] += int(cell_counts[cells].sum())

    for line in range(total // line_length):
        cells = list(range(line * line_length, (line + 1) * line_length))
        if cell_counts[cells].sum() < min_cell_count:
            if group_counts:
                _join_last(cells)
            else:
                pending.extend(cells)
            continue
        acc: List[int] = []
        running = 0
        for cell in cells:
            acc.append(cell)
            running += int(cell_counts[cell])
            if running >= min_cell_count:
                _open(acc)
                acc, running = [], 0
        if acc:
            _join_last(acc)

    if not group_counts:
        # 整个点云不足一个单元
        group_of_cell[:] = 0
        group_counts = [n]

    return Partition(
        splits=splits,
        cells_per_axis=counts,
        group_of_cell=group_of_cell,
        counts=np.asarray(group_counts, dtype=np.int64),
        lower=points.min(axis=0),
        upper=points.max(axis=0),
    )


def _cell_solver(xs: np.ndarray, rank_tol: float) -> Tuple[np.ndarray, Callable[[np.ndarray], np.ndarray], bool]:
    """单元内基 (1, x − x̄) 的一次QR分解，返回 (x̄, 求解器, 是否退化为常数)

    Rank-deficient or too-small cells solve every right-hand side by its
    mean; an empty cell returns zero coefficients.
    """
    n, d = xs.shape
    center = xs.mean(axis=0) if n else np.zeros(d)

    def _constant(ys: np.ndarray) -> np.ndarray:
        coef = np.zeros((d + 1, ys.shape[1]))
        if n:
            coef[0] = ys.mean(axis=0)
        return coef

    if n < d + 1:
        return center, _constant, True
    basis = np.hstack([np.ones((n, 1)), xs - center])
    q, r, perm = qr(basis, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.count_nonzero(diag > rank_tol * diag[0]))
    if rank < d + 1:
        return center, _constant, True

    def _solve(ys: np.ndarray) -> np.ndarray:
        coef = np.zeros((d + 1, ys.shape[1]))
        coef[perm] = solve_triangular(r, q.T @ ys)
        return coef

    return center, _solve, False


def _fit_cell(xs: np.ndarray, ys: np.ndarray, rank_tol: float) -> Tuple[np.ndarray, np.ndarray, bool]:
    """单元内对基 (1, x − x̄) 的最小二乘；秩亏时退化为常数（单元均值）"""
    center, solve, fallback = _cell_solver(xs, rank_tol)
    return center, solve(ys), fallback


def _least_squares(design: np.ndarray, ys: np.ndarray, rank_tol: float) -> np.ndarray:
    """列主元QR最小二乘，数值秩以外的列系数置零"""
    coef = np.zeros((design.shape[1],) + ys.shape[1:])
    q, r, perm = qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        return coef
    rank = int(np.count_nonzero(diag > rank_tol * diag[0]))
    coef[perm[:rank]] = solve_triangular(r[:rank, :rank], q[:, :rank].T @ ys)
    return coef


def _fit_cell_centered(
    xs: np.ndarray,
    dx: np.ndarray,
    drift_step: np.ndarray,
    values: np.ndarray,
    h1: np.ndarray,
    h2: np.ndarray,
    rank_tol: float,
) -> Tuple[np.ndarray, np.ndarray, bool]:
    """以一步增量的二次回归作控制变量的逐通道拟合

    ψ is first fitted on (1, x − x̄, Δx, ½ΔxΔxᵀ) with coefficients
    (a, α, β, C). The fitted part has exact weight expectations
    E[·H1 | x] = β + C·μh and E[·H2 | x] = C, so only the residual is
    multiplied by the weights. Cells with fewer rows than that basis use
    the plain targets ψ·H.
    """
    n, d = xs.shape
    center, solve, fallback = _cell_solver(xs, rank_tol)
    rows, cols = np.triu_indices(d)
    width = 1 + 2 * d + rows.size

    if n > width:
        quadratic = dx[:, rows] * dx[:, cols] * np.where(rows == cols, 0.5, 1.0)
        design = np.hstack([np.ones((n, 1)), xs - center, dx, quadratic])
        beta = _least_squares(design, values, rank_tol)
        residual = values - design @ beta
        curvature = np.zeros((d, d))
        curvature[rows, cols] = beta[1 + 2 * d:]
        curvature = curvature + curvature.T - np.diag(np.diag(curvature))
        grad_targets = residual[:, None] * h1 + beta[1 + d:1 + 2 * d] + drift_step @ curvature
        hess_targets = residual[:, None, None] * h2 + curvature
    else:
        grad_targets = values[:, None] * h1
        hess_targets = values[:, None, None] * h2

    ys = np.hstack([values[:, None], grad_targets, hess_targets.reshape(n, d * d)])
    return center, solve(ys), fallback


def _run_cells(task: Callable[[int], Tuple], group_count: int, workers: Optional[int]) -> List[Tuple]:
    workers = workers or get_app_config().workers
    if workers == 1 or group_count == 1:
        return [task(g) for g in range(group_count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, range(group_count)))


def _assemble(partition: Partition, results: List[Tuple]) -> LayerEstimator:
    centers = np.stack([r[0] for r in results])
    coefficients = np.stack([r[1] for r in results])
    fallback = sum(1 for r in results if r[2])
    if fallback:
        log.debug(f"Constant fallback in {fallback}/{partition.group_count} cells")
    return LayerEstimator(partition=partition, centers=centers, coefficients=coefficients, fallback_cells=fallback)


@measure("estimator_fit_layer_seconds")
def fit_layer(
    partition: Partition,
    x_points: np.ndarray,
    targets: np.ndarray,
    rank_tol: float = 1e-10,
    workers: Optional[int] = None,
) -> LayerEstimator:
    """逐单元、逐通道的局部仿射回归

    Points are put in a canonical order (cell, coordinates, targets) first,
    so the fit does not depend on the order of the input cloud.
    """
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    if targets.shape[0] != x_points.shape[0]:
        raise InvalidParameterError("targets and x_points must have the same number of rows")
    if not np.all(np.isfinite(targets)):
        raise InvalidParameterError("regression targets must be finite")

    groups = partition.lookup(x_points)
    keys = tuple(targets.T[::-1]) + tuple(x_points.T[::-1]) + (groups,)
    order = np.lexsort(keys)
    xs, ys, gs = x_points[order], targets[order], groups[order]
    bounds = np.searchsorted(gs, np.arange(partition.group_count + 1))

    def _task(g: int):
        lo, hi = bounds[g], bounds[g + 1]
        return _fit_cell(xs[lo:hi], ys[lo:hi], rank_tol)

    return _assemble(partition, _run_cells(_task, partition.group_count, workers))


@measure("estimator_fit_layer_centered_seconds")
def fit_layer_centered(
    partition: Partition,
    x_points: np.ndarray,
    dx: np.ndarray,
    values: np.ndarray,
    h1: np.ndarray,
    h2: np.ndarray,
    rank_tol: float = 1e-10,
    workers: Optional[int] = None,
    drift_step: Optional[np.ndarray] = None,
) -> LayerEstimator:
    """带控制变量的逐层回归，通道布局与 fit_layer 相同

    dx is the one-step increment X_{i+1} − X_i of each path and drift_step
    its drift part μ(t_i, X_i)·h (zero when omitted). The weights must be the
    untruncated H1/H2 built from the same increments.
    """
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    values = np.asarray(values, dtype=float)
    n, d = x_points.shape
    dx = np.asarray(dx, dtype=float)
    drift_step = np.zeros((n, d)) if drift_step is None else np.asarray(drift_step, dtype=float)
    shapes = (values.shape, dx.shape, drift_step.shape, h1.shape, h2.shape)
    if shapes != ((n,), (n, d), (n, d), (n, d), (n, d, d)):
        raise InvalidParameterError("values, dx, drift_step, h1 and h2 must match x_points row for row")
    if not np.all(np.isfinite(values)):
        raise InvalidParameterError("regression targets must be finite")

    groups = partition.lookup(x_points)
    keys = (values,) + tuple(dx.T[::-1]) + tuple(x_points.T[::-1]) + (groups,)
    order = np.lexsort(keys)
    xs, ds, ms, vs = x_points[order], dx[order], drift_step[order], values[order]
    w1, w2 = h1[order], h2[order]
    bounds = np.searchsorted(groups[order], np.arange(partition.group_count + 1))

    def _task(g: int):
        lo, hi = bounds[g], bounds[g + 1]
        return _fit_cell_centered(xs[lo:hi], ds[lo:hi], ms[lo:hi], vs[lo:hi], w1[lo:hi], w2[lo:hi], rank_tol)

    return _assemble(partition, _run_cells(_task, partition.group_count, workers))


def evaluate(est: LayerEstimator, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(ψ̂, D̂ψ, D̂²ψ)，盒外点先投影到盒上；D̂²ψ 对称化"""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = est.partition.clamp(np.atleast_2d(x))
    d = est.dim
    groups = est.partition.lookup(pts)
    basis = np.hstack([np.ones((pts.shape[0], 1)), pts - est.centers[groups]])
    channels = np.einsum("nk,nkc->nc", basis, est.coefficients[groups])

    value = channels[:, 0]
    grad = channels[:, 1:1 + d]
    hess = np.zeros((pts.shape[0], d, d))
    if channels.shape[1] >= 1 + d + d * d:
        raw = channels[:, 1 + d:1 + d + d * d].reshape(-1, d, d)
        hess = 0.5 * (raw + np.swapaxes(raw, -1, -2))
    if single:
        return value[0], grad[0], hess[0]
    return value, grad, hess


def layer_targets(values: np.ndarray, h1: np.ndarray, h2: np.ndarray) -> np.ndarray:
    """通道目标 [ψ·H0, ψ·H1_k, ψ·(H2)_kl]"""
    n = values.shape[0]
    return np.hstack([
        values[:, None],
        values[:, None] * h1,
        (values[:, None, None] * h2).reshape(n, -1),
    ])


def quadrature_rule(nodes: int, dim: int) -> QuadratureRule:
    """N(0, I_d) 的张量Gauss-Hermite规则（权重归一化）"""
    if dim > MAX_QUADRATURE_DIM:
        raise QuadratureError(f"tensor quadrature is limited to d <= {MAX_QUADRATURE_DIM}, got d={dim}")
    if nodes < 1:
        raise InvalidParameterError(f"node count must be positive, got {nodes}")
    z, w = hermegauss(nodes)
    w = w / w.sum()
    grids = np.meshgrid(*([z] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    tensor_nodes = np.stack([g.ravel() for g in grids], axis=-1)
    tensor_weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return QuadratureRule(per_dim=nodes, nodes=tensor_nodes, weights=tensor_weights)


def _check_rule(rule: QuadratureRule) -> None:
    # ψ ≡ 1 时 H0/H2 通道必须精确
    if abs(rule.weights.sum() - 1.0) > 1e-12:
        raise QuadratureError("quadrature weights do not sum to one")
    z = rule.nodes
    second = np.einsum("q,qi,qj->ij", rule.weights, z, z) - np.eye(rule.dim)
    if np.max(np.abs(second)) > 1e-12:
        raise QuadratureError(f"quadrature rule with q={rule.per_dim} is too coarse for the second-order weights")


def quad_conditional(
    spec: ProblemSpec,
    t: float,
    x: np.ndarray,
    h: float,
    psi: Callable[[np.ndarray], np.ndarray],
    rule: QuadratureRule,
    on_points: Optional[Callable[[np.ndarray], None]] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """E[ψ(X̂_{t+h})·(H0, H1, H2) | X̂_t = x]，x 可批量 [M, d]

    psi maps next-layer states [..., d] to values [...]; on_points, if given,
    receives every next-layer state before psi is applied.
    """
    if spec.dim > MAX_QUADRATURE_DIM or rule.dim != spec.dim:
        raise QuadratureError(f"quadrature needs d <= {MAX_QUADRATURE_DIM} and a rule of matching dimension")
    _check_rule(rule)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    base = np.atleast_2d(x)[:, None, :]                   # [M, 1, d]
    dW = np.sqrt(h) * rule.nodes[None, :, :]              # [1, Q, d]
    dW = np.broadcast_to(dW, (base.shape[0],) + dW.shape[1:])
    y = euler_step(spec, t, base, h, dW)                  # [M, Q, d]
    if on_points is not None:
        on_points(y)
    values = np.asarray(psi(y), dtype=float)              # [M, Q]
    w = weights(spec, t, base, dW, h)

    value = values @ rule.weights
    grad = np.einsum("q,mq,mqi->mi", rule.weights, values, w.h1)
    raw = np.einsum("q,mq,mqij->mij", rule.weights, values, w.h2)
    hess = 0.5 * (raw + np.swapaxes(raw, -1, -2))
    if single:
        return value[0], grad[0], hess[0]
    return value, grad, hess
