"""
Scheme Service
倒向递推 vʰ(t_i) = max{ T_h[vʰ(t_{i+1})], g(t_i) }，
T_h[ψ] = Ê[ψ] + h·F(·, Ê[ψH0], Ê[ψH1], Ê[ψH2])

Two backends share the recursion: Monte-Carlo regression on a simulated
ensemble and tensor Gauss-Hermite quadrature on a fixed mesh (d ≤ 2).
"""
import math
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from saturn_mousehunter_obstacle_engine.application.services.assumption_service import check_assumptions
from saturn_mousehunter_obstacle_engine.application.services.estimator_service import (
    MAX_QUADRATURE_DIM,
    build_partition,
    evaluate,
    fit_layer,
    fit_layer_centered,
    layer_targets,
    quad_conditional,
    quadrature_rule,
)
from saturn_mousehunter_obstacle_engine.application.services.sampling_service import simulate, weights
from saturn_mousehunter_obstacle_engine.domain.errors import (
    AssumptionViolationError,
    InvalidParameterError,
    QuadratureError,
    SchemeError,
)
from saturn_mousehunter_obstacle_engine.domain.models import (
    AssumptionReport,
    EstimatorConfig,
    LayerDiagnostics,
    LayerValues,
    PathEnsemble,
    ProblemSpec,
    QuadratureConfig,
    QuadratureRule,
    SolveReport,
    TensorMesh,
    TimeGrid,
)
from saturn_mousehunter_obstacle_engine.infrastructure.aop.decorators import PhaseTimer, measure
from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import get_app_config
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger

log = get_logger(__name__)


def value_bound(spec: ProblemSpec, lipschitz_r: float = 0.0) -> float:
    """有界族上界 B = (|g|∞ + 1)·exp(L_r·T)"""
    if not math.isfinite(lipschitz_r):
        return float("inf")
    return (spec.obstacle_bound + 1.0) * math.exp(lipschitz_r * spec.horizon)


def _scale(values: np.ndarray) -> float:
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    return scale if scale > 0 else 1.0


def apply_nonlinearity(
    spec: ProblemSpec,
    t: float,
    x: np.ndarray,
    value: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    config: EstimatorConfig,
    scale: float,
    layer: int,
) -> Tuple[np.ndarray, int, int]:
    """F(t, x, ψ̂, D̂ψ, D̂²ψ) 及奇异性保护激活数 / 评估数

    On each concave axis k the estimate ψ_kk is clamped to at most −δ_k,
    δ_k = max(guard_delta·scale, curvature_floor(...)); the problem's floor
    keeps the implied control bounded where the estimate is nearly flat.
    """
    activations = 0
    evaluations = 0
    if config.singularity_guard and spec.concave_axes:
        delta = np.full(hess.shape[0], config.guard_delta * scale)
        if spec.curvature_floor is not None:
            with np.errstate(all="ignore"):
                floor = np.asarray(spec.curvature_floor(t, x, value, grad, hess), dtype=float)
            delta = np.maximum(delta, np.where(np.isfinite(floor), floor, 0.0))
        hess = hess.copy()
        active = np.zeros(hess.shape[0], dtype=bool)
        for k in spec.concave_axes:
            mask = hess[:, k, k] > -delta
            hess[:, k, k] = np.where(mask, -delta, hess[:, k, k])
            active |= mask
        activations = int(np.count_nonzero(active))
        evaluations = int(hess.shape[0])

    with np.errstate(all="ignore"):
        out = np.asarray(spec.nonlinearity(t, x, value, grad, hess), dtype=float)
    out = np.broadcast_to(out, value.shape)
    bad = ~np.isfinite(out)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise SchemeError("non-finite nonlinearity", layer=layer, x=np.atleast_2d(x)[j])
    return out, activations, evaluations


def _close_layer(
    spec: ProblemSpec,
    t: float,
    x: np.ndarray,
    continuation: np.ndarray,
    config: EstimatorConfig,
    value_cap: Optional[float],
) -> Tuple[np.ndarray, np.ndarray]:
    """投影到问题值域 [lo, hi]（开启截断时再与 ±B 取交）后与障碍取最大值"""
    lo, hi = spec.value_range
    if config.value_truncation and value_cap is not None and math.isfinite(value_cap):
        lo, hi = max(lo, -value_cap), min(hi, value_cap)
    continuation = np.clip(continuation, lo, hi)
    if not spec.early_exercise:
        return continuation, np.zeros(continuation.shape, dtype=bool)
    g = np.asarray(spec.obstacle(t, x), dtype=float)
    exercise = g >= continuation
    return np.maximum(continuation, g), exercise


def terminal_layer(spec: ProblemSpec, grid: TimeGrid, x: np.ndarray) -> LayerValues:
    values = spec.terminal(x)
    return LayerValues(index=grid.steps, values=values, exercise=np.ones(values.shape, dtype=bool))


def axis_cells(spec: ProblemSpec, config: EstimatorConfig) -> Tuple[int, ...]:
    """逐坐标分区数：axis_cells 优先，否则 smooth_axes 取1、其余取 cells_per_dim"""
    if config.axis_cells is not None:
        if len(config.axis_cells) != spec.dim:
            raise InvalidParameterError(f"axis_cells has {len(config.axis_cells)} entries, expected {spec.dim}")
        return tuple(config.axis_cells)
    return tuple(1 if k in spec.smooth_axes else config.cells_per_dim for k in range(spec.dim))


def backward_step(
    spec: ProblemSpec,
    grid: TimeGrid,
    i: int,
    next_values: LayerValues,
    ensemble: PathEnsemble,
    config: EstimatorConfig,
    value_cap: Optional[float] = None,
    workers: Optional[int] = None,
) -> LayerValues:
    """蒙特卡洛后端的一层：回归 ψ·H 通道，加 h·F，与障碍取最大值"""
    if next_values.index != i + 1:
        raise InvalidParameterError(f"next_values is layer {next_values.index}, expected {i + 1}")
    t = grid.t(i)
    h = grid.h
    x = ensemble.layer(i)
    dW = ensemble.increments[:, i, :]
    w = weights(spec, t, x, dW, h, truncate=config.truncation_c if config.weight_truncation else None)

    partition = build_partition(x, axis_cells(spec, config), config.min_count(spec.dim))
    if config.control_variates and not config.weight_truncation:
        estimator = fit_layer_centered(
            partition, x, ensemble.layer(i + 1) - x, next_values.values, w.h1, w.h2,
            rank_tol=config.rank_tol, workers=workers, drift_step=np.asarray(spec.drift(t, x), dtype=float) * h,
        )
    else:
        targets = layer_targets(next_values.values, w.h1, w.h2)
        estimator = fit_layer(partition, x, targets, rank_tol=config.rank_tol, workers=workers)
    value, grad, hess = evaluate(estimator, x)

    f, activations, evaluations = apply_nonlinearity(
        spec, t, x, value, grad, hess, config, _scale(next_values.values), i
    )
    values, exercise = _close_layer(spec, t, x, value + h * f, config, value_cap)
    return LayerValues(
        index=i,
        values=values,
        exercise=exercise,
        guard_activations=activations,
        evaluations=evaluations,
        fallback_cells=estimator.fallback_cells,
        cells=partition.group_count,
    )


def build_mesh(spec: ProblemSpec, quad_config: QuadratureConfig) -> TensorMesh:
    if spec.dim > MAX_QUADRATURE_DIM:
        raise QuadratureError(f"quadrature backend supports d <= {MAX_QUADRATURE_DIM}, got d={spec.dim}")
    if quad_config.mesh_box is not None:
        lo, hi = (np.asarray(c, dtype=float) for c in quad_config.mesh_box)
    else:
        lo, hi = spec.box
    counts = quad_config.mesh_nodes
    if len(counts) == 1:
        counts = counts * spec.dim
    if len(counts) != spec.dim or lo.shape[0] != spec.dim or hi.shape[0] != spec.dim:
        raise InvalidParameterError("mesh_nodes and mesh_box must match the problem dimension")
    return TensorMesh(axes=tuple(np.linspace(lo[k], hi[k], counts[k]) for k in range(spec.dim)))


def mesh_interpolant(mesh: TensorMesh, values: np.ndarray, method: str, extrapolate_axes: Tuple[int, ...] = ()):
    """网格层值的插值函数

    Points outside the box are projected onto it; along extrapolate_axes the
    boundary slope (last mesh cell) is continued linearly instead, so a
    concave profile does not flatten at the mesh edge.
    """
    interp = RegularGridInterpolator(mesh.axes, values.reshape(mesh.shape), method=method)

    def psi(y: np.ndarray) -> np.ndarray:
        flat = y.reshape(-1, mesh.dim)
        clamped = np.clip(flat, mesh.lower, mesh.upper)
        out = interp(clamped)
        for k in extrapolate_axes:
            over = flat[:, k] - clamped[:, k]
            outside = over != 0
            if not np.any(outside):
                continue
            axis = mesh.axes[k]
            step = axis[1] - axis[0]
            inner = clamped[outside].copy()
            inner[:, k] -= np.sign(over[outside]) * step
            slope = (out[outside] - interp(inner)) / step
            out[outside] += slope * np.abs(over[outside])
        return out.reshape(y.shape[:-1])

    return psi


def quadrature_backward_step(
    spec: ProblemSpec,
    grid: TimeGrid,
    i: int,
    next_values: LayerValues,
    mesh: TensorMesh,
    rule: QuadratureRule,
    config: EstimatorConfig,
    interpolation: str = "cubic",
    value_cap: Optional[float] = None,
    extra_points: Optional[np.ndarray] = None,
) -> Tuple[LayerValues, int, Optional[np.ndarray]]:
    """求积后端的一层；返回 (网格层值, 越界点数, extra_points 处的层值)"""
    if next_values.index != i + 1:
        raise InvalidParameterError(f"next_values is layer {next_values.index}, expected {i + 1}")
    t = grid.t(i)
    h = grid.h
    nodes = mesh.nodes
    points = nodes if extra_points is None else np.vstack([nodes, np.atleast_2d(extra_points)])

    escapes = 0

    def _count(y: np.ndarray) -> None:
        nonlocal escapes
        escapes += mesh.escapes(y)

    psi = mesh_interpolant(mesh, next_values.values, interpolation, extrapolate_axes=spec.concave_axes)
    value, grad, hess = quad_conditional(spec, t, points, h, psi, rule, on_points=_count)
    f, activations, evaluations = apply_nonlinearity(
        spec, t, points, value, grad, hess, config, _scale(next_values.values), i
    )
    values, exercise = _close_layer(spec, t, points, value + h * f, config, value_cap)

    m = nodes.shape[0]
    layer = LayerValues(
        index=i,
        values=values[:m],
        exercise=exercise[:m],
        guard_activations=activations,
        evaluations=evaluations,
        cells=m,
    )
    extra = None if extra_points is None else values[m:]
    return layer, escapes, extra


def _gate(
    spec: ProblemSpec,
    assumptions: Optional[AssumptionReport],
    override: bool,
    seed: int,
) -> AssumptionReport:
    if assumptions is None:
        assumptions = check_assumptions(spec, seed=seed)
    if not assumptions.all_pass:
        if not override:
            raise AssumptionViolationError(assumptions.failed())
        log.warning(f"Solving {spec.problem_id} despite failed assumptions {assumptions.failed()} (override)")
    return assumptions


@measure("scheme_solve_mc_seconds")
def solve_mc(
    spec: ProblemSpec,
    grid: TimeGrid,
    paths: int,
    seed: int,
    config: Optional[EstimatorConfig] = None,
    assumptions: Optional[AssumptionReport] = None,
    override: bool = False,
    workers: Optional[int] = None,
    ensemble: Optional[PathEnsemble] = None,
) -> SolveReport:
    """模拟一次路径集合，从 i=n−1 倒推到 0；v̂ʰ(0,x0) 为第0层（单一单元）的值"""
    config = config or EstimatorConfig()
    timer = PhaseTimer()
    with timer.phase("assumptions"):
        assumptions = _gate(spec, assumptions, override, seed)
    cap = value_bound(spec, assumptions.lipschitz_r)

    with timer.phase("simulate"):
        if ensemble is None:
            ensemble = simulate(spec, grid, paths, seed, workers=workers)
        elif ensemble.count != paths or ensemble.grid != grid:
            raise InvalidParameterError("supplied ensemble does not match the requested grid and path count")

    layer = terminal_layer(spec, grid, ensemble.layer(grid.steps))
    diagnostics = [LayerDiagnostics.from_layer(layer, grid.t(grid.steps))]
    activations = evaluations = 0
    with timer.phase("backward"):
        for i in range(grid.steps - 1, -1, -1):
            layer = backward_step(spec, grid, i, layer, ensemble, config, value_cap=cap, workers=workers)
            activations += layer.guard_activations
            evaluations += layer.evaluations
            diagnostics.append(LayerDiagnostics.from_layer(layer, grid.t(i)))
            log.debug(f"Layer {i} done: mean={diagnostics[-1].mean:.6g}, cells={layer.cells}")

    if evaluations and activations:
        log.warning(f"Singularity guard active in {activations}/{evaluations} evaluations")
    value = float(np.mean(layer.values))
    report = SolveReport(
        problem_id=spec.problem_id,
        backend="mc",
        steps=grid.steps,
        h=grid.h,
        paths=paths,
        seed=seed,
        value_at_origin=value,
        obstacle_at_origin=float(spec.obstacle(0.0, spec.x0)),
        exercise_frac_t0=float(np.mean(layer.exercise)),
        layers=diagnostics[::-1],
        assumptions=assumptions,
        guard_activations=activations,
        guard_evaluations=evaluations,
        value_bound=cap if math.isfinite(cap) else None,
        timings=timer.as_dict(),
        config={"estimator": config.model_dump(), "parameters": spec.parameters},
    )
    log.info(f"MC solve {spec.problem_id}: n={grid.steps}, N={paths}, seed={seed}, value={value:.6f}")
    return report


@measure("scheme_solve_quadrature_seconds")
def solve_quadrature(
    spec: ProblemSpec,
    grid: TimeGrid,
    quad_config: Optional[QuadratureConfig] = None,
    config: Optional[EstimatorConfig] = None,
    assumptions: Optional[AssumptionReport] = None,
    override: bool = False,
    seed: Optional[int] = None,
) -> SolveReport:
    """确定性求积后端；x0 处的值在第0层直接求积得到"""
    quad_config = quad_config or QuadratureConfig()
    config = config or EstimatorConfig()
    timer = PhaseTimer()
    with timer.phase("assumptions"):
        assumptions = _gate(spec, assumptions, override, seed if seed is not None else get_app_config().default_seed)
    cap = value_bound(spec, assumptions.lipschitz_r)

    mesh = build_mesh(spec, quad_config)
    rule = quadrature_rule(quad_config.nodes, spec.dim)
    layer = terminal_layer(spec, grid, mesh.nodes)
    diagnostics = [LayerDiagnostics.from_layer(layer, grid.t(grid.steps))]
    activations = evaluations = escapes = 0
    origin = None
    with timer.phase("backward"):
        for i in range(grid.steps - 1, -1, -1):
            layer, escaped, extra = quadrature_backward_step(
                spec, grid, i, layer, mesh, rule, config,
                interpolation=quad_config.interpolation,
                value_cap=cap,
                extra_points=spec.x0 if i == 0 else None,
            )
            escapes += escaped
            activations += layer.guard_activations
            evaluations += layer.evaluations
            diagnostics.append(LayerDiagnostics.from_layer(layer, grid.t(i)))
            if extra is not None:
                origin = extra

    if escapes:
        log.warning(f"{escapes} quadrature points left the mesh box and were clamped to its boundary")
    value = float(origin[0])
    g0 = float(spec.obstacle(0.0, spec.x0))
    report = SolveReport(
        problem_id=spec.problem_id,
        backend="quadrature",
        steps=grid.steps,
        h=grid.h,
        value_at_origin=value,
        obstacle_at_origin=g0,
        exercise_frac_t0=float(spec.early_exercise and g0 >= value),
        layers=diagnostics[::-1],
        assumptions=assumptions,
        guard_activations=activations,
        guard_evaluations=evaluations,
        boundary_escapes=escapes,
        value_bound=cap if math.isfinite(cap) else None,
        timings=timer.as_dict(),
        config={"estimator": config.model_dump(), "quadrature": quad_config.model_dump(), "parameters": spec.parameters},
    )
    log.info(f"Quadrature solve {spec.problem_id}: n={grid.steps}, value={value:.6f}")
    return report
