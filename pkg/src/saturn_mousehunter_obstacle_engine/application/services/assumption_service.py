"""
Assumption Service
结构性假设的数值抽查 - Assumption F (i)-(v) 与 HJB / HJB+
"""
from typing import Dict, Tuple

import numpy as np
from scipy.linalg import eigh

from saturn_mousehunter_obstacle_engine.domain.errors import InvalidParameterError
from saturn_mousehunter_obstacle_engine.domain.models import AssumptionReport, HJBReport, ProblemSpec
from saturn_mousehunter_obstacle_engine.infrastructure.aop.decorators import measure
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger

log = get_logger(__name__)

PROBE_SCALE = 10.0
CONCAVE_MARGIN = 1.0
PINV_CUTOFF = 1e-10


def _probe_cloud(spec: ProblemSpec, probe_count: int, seed: int) -> Tuple[np.ndarray, ...]:
    """(t, x, r, p, γ) 探针；凹向坐标上 γ_kk < 0"""
    rng = np.random.default_rng(seed)
    lo, hi = spec.box
    d = spec.dim
    t = rng.uniform(0.0, spec.horizon, probe_count)
    x = rng.uniform(lo, hi, (probe_count, d))
    r = rng.uniform(-spec.obstacle_bound, spec.obstacle_bound, probe_count)
    p = rng.uniform(-1.0, 1.0, (probe_count, d)) * PROBE_SCALE
    raw = rng.uniform(-1.0, 1.0, (probe_count, d, d)) * PROBE_SCALE
    gamma = 0.5 * (raw + np.swapaxes(raw, -1, -2))
    for k in spec.concave_axes:
        gamma[:, k, k] = -np.abs(gamma[:, k, k]) - CONCAVE_MARGIN
    return t, x, r, p, gamma


def _max(values: np.ndarray) -> float:
    if values.size == 0 or not np.all(np.isfinite(values)):
        return float("inf")
    return float(np.max(values))


def _min(values: np.ndarray) -> float:
    if values.size == 0 or not np.all(np.isfinite(values)):
        return float("-inf")
    return float(np.min(values))


def finite_difference_gradients(
    spec: ProblemSpec,
    t: np.ndarray,
    x: np.ndarray,
    r: np.ndarray,
    p: np.ndarray,
    gamma: np.ndarray,
    step: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """中心差分 (F_r, F_p, F_γ)；F_γ 按对称扰动取对称矩阵"""
    d = spec.dim

    def F(r_, p_, g_):
        with np.errstate(all="ignore"):
            return np.asarray(spec.nonlinearity(t, x, r_, p_, g_), dtype=float)

    f_r = (F(r + step, p, gamma) - F(r - step, p, gamma)) / (2.0 * step)

    f_p = np.empty_like(p)
    for k in range(d):
        e = np.zeros(d)
        e[k] = step
        f_p[:, k] = (F(r, p + e, gamma) - F(r, p - e, gamma)) / (2.0 * step)

    f_g = np.empty_like(gamma)
    for k in range(d):
        for l in range(k, d):
            e = np.zeros((d, d))
            e[k, l] = e[l, k] = step
            diff = F(r, p, gamma + e) - F(r, p, gamma - e)
            # 非对角扰动同时改变 (k,l) 与 (l,k)
            f_g[:, k, l] = f_g[:, l, k] = diff / (2.0 * step if k == l else 4.0 * step)
    return f_r, f_p, f_g


def _pseudo_inverse(matrix: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(matrix)
    keep = np.abs(w) > PINV_CUTOFF
    inv_w = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    return (v * inv_w) @ v.T


@measure("assumption_check_seconds")
def check_assumptions(
    spec: ProblemSpec,
    probe_count: int = 256,
    fd_step: float = 1e-4,
    seed: int = 0,
    tolerance: float = 1e-6,
) -> AssumptionReport:
    """Assumption F 抽查；σ 奇异的探针计入 skipped_probes 并使 (ii) 失败"""
    if probe_count < 1:
        raise InvalidParameterError(f"probe_count must be positive, got {probe_count}")
    if not fd_step > 0:
        raise InvalidParameterError(f"fd_step must be positive, got {fd_step}")

    t, x, r, p, gamma = _probe_cloud(spec, probe_count, seed)
    d = spec.dim

    with np.errstate(all="ignore"):
        f_zero = np.abs(np.asarray(
            spec.nonlinearity(t, x, np.zeros(probe_count), np.zeros((probe_count, d)), np.zeros((probe_count, d, d))),
            dtype=float,
        ))

    sigma = np.asarray(spec.diffusion(t, x), dtype=float)
    singular_values = np.linalg.svd(sigma, compute_uv=False)
    det = np.abs(np.linalg.det(sigma))
    valid = det >= spec.sigma_floor
    skipped = int(np.count_nonzero(~valid))

    tv, xv, rv, pv, gv = t[valid], x[valid], r[valid], p[valid], gamma[valid]
    f_r, f_p, f_g = finite_difference_gradients(spec, tv, xv, rv, pv, gv, fd_step)
    half_a = 0.5 * spec.covariance(tv, xv)

    count = int(np.count_nonzero(valid))
    domination = np.empty(count)
    ellipticity = np.empty(count)
    residual = np.empty(count)
    quadratic = np.empty(count)
    for j in range(count):
        if not (np.all(np.isfinite(f_g[j])) and np.all(np.isfinite(f_p[j]))):
            domination[j] = ellipticity[j] = residual[j] = quadratic[j] = np.nan
            continue
        domination[j] = eigh(f_g[j], half_a[j], eigvals_only=True)[-1]
        ellipticity[j] = np.linalg.eigvalsh(f_g[j])[0]
        pinv = _pseudo_inverse(f_g[j])
        projected = f_g[j] @ pinv @ f_p[j]
        residual[j] = np.linalg.norm(f_p[j] - projected) / max(np.linalg.norm(f_p[j]), 1.0)
        quadratic[j] = f_p[j] @ pinv @ f_p[j]
    monotonicity = f_r - 0.25 * quadratic

    report = dict(
        problem_id=spec.problem_id,
        probe_count=probe_count,
        skipped_probes=skipped,
        tolerance=tolerance,
        domination_max=_max(domination),
        monotonicity_min=_min(monotonicity),
        f_zero_bound=_max(f_zero),
        sigma_condition_min=float(np.min(singular_values)),
        ellipticity_min=_min(ellipticity),
        image_residual_max=_max(residual),
        fp_quadratic_max=_max(np.abs(quadratic)),
        lipschitz_r=_max(np.abs(f_r)),
    )
    passes: Dict[str, bool] = {
        "i": bool(np.isfinite(report["f_zero_bound"])),
        "ii": skipped == 0 and report["sigma_condition_min"] > 0,
        "iii": report["ellipticity_min"] >= -tolerance and report["domination_max"] <= 1.0 + tolerance,
        "iv": report["image_residual_max"] <= tolerance and bool(np.isfinite(report["fp_quadratic_max"])),
        "v": report["monotonicity_min"] >= -tolerance,
    }
    result = AssumptionReport(passes=passes, **report)
    if not result.all_pass:
        log.warning(f"Assumption F spot check failed for {spec.problem_id}: {result.failed()}")
    return result


@measure("assumption_check_hjb_seconds")
def check_hjb(
    spec: ProblemSpec,
    probe_count: int = 256,
    seed: int = 0,
    refine: int = 2,
    tolerance: float = 1e-3,
) -> HJBReport:
    """½a·γ + μ·p + F 与控制族极值 ext_α L^α 的相对残差；refine 倍加密网格衡量 HJB+"""
    family = spec.control_family
    if family is None:
        raise InvalidParameterError(f"problem {spec.problem_id} declares no control family")
    if refine < 1:
        raise InvalidParameterError(f"refine must be positive, got {refine}")

    t, x, r, p, gamma = _probe_cloud(spec, probe_count, seed)
    a = spec.covariance(t, x)
    mu = np.asarray(spec.drift(t, x), dtype=float)
    with np.errstate(all="ignore"):
        lhs = (
            0.5 * np.einsum("nij,nij->n", a, gamma)
            + np.einsum("ni,ni->n", mu, p)
            + np.asarray(spec.nonlinearity(t, x, r, p, gamma), dtype=float)
        )
        coarse = family.extremum(t, x, r, p, gamma)
        fine = family.extremum(t, x, r, p, gamma, resolution=refine * (family.resolution - 1) + 1)

    mask = np.isfinite(lhs) & np.isfinite(coarse) & np.isfinite(fine)
    if family.admissible is not None:
        with np.errstate(all="ignore"):
            mask &= np.asarray(family.admissible(t, x, r, p, gamma), dtype=bool)
    admissible = int(np.count_nonzero(mask))

    scale = np.maximum(1.0, np.abs(lhs[mask]))
    residual = _max(np.abs(lhs[mask] - coarse[mask]) / scale) if admissible else float("inf")
    gap = _max(np.abs(fine[mask] - coarse[mask]) / scale) if admissible else float("inf")
    pass_hjb = admissible > 0 and residual <= tolerance
    return HJBReport(
        problem_id=spec.problem_id,
        sense=family.sense,
        probe_count=probe_count,
        admissible_probes=admissible,
        residual_max=residual,
        refinement_gap=gap,
        tolerance=tolerance,
        pass_hjb=pass_hjb,
        pass_hjb_plus=pass_hjb and gap <= tolerance,
    )
