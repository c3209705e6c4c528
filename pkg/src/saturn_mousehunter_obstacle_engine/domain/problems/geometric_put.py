"""
Geometric American Put
几何篮子美式看跌期权 - 把线性方程拆成 σ0² 线性部分 + 非线性部分

The discount term r·v is folded into F, so the simulated diffusion is the
σ0-scaled Black-Scholes diffusion with (optionally) the risk-neutral drift.
"""
import math
from typing import Sequence

import numpy as np

from saturn_mousehunter_obstacle_engine.domain.errors import InvalidParameterError
from saturn_mousehunter_obstacle_engine.domain.models.problem_spec import ControlFamily, ProblemSpec


def _validate(r: float, sigmas: Sequence[float], strike: float, horizon: float, sigma0_sq: float, spots: Sequence[float]) -> None:
    if not (0.0 < sigma0_sq <= 1.0):
        raise InvalidParameterError(f"sigma0_sq must lie in (0, 1], got {sigma0_sq}")
    if r <= 0:
        raise InvalidParameterError(f"rate must be positive, got {r}")
    if strike <= 0:
        raise InvalidParameterError(f"strike must be positive, got {strike}")
    if horizon <= 0:
        raise InvalidParameterError(f"horizon must be positive, got {horizon}")
    if len(sigmas) == 0 or any(s <= 0 for s in sigmas):
        raise InvalidParameterError(f"sigmas must be positive, got {list(sigmas)}")
    if len(spots) != len(sigmas) or any(s <= 0 for s in spots):
        raise InvalidParameterError(f"spots must be positive with one entry per asset, got {list(spots)}")


def _put_spec(
    problem_id: str,
    rate: float,
    drift_rates: np.ndarray,
    vols: np.ndarray,
    spots: np.ndarray,
    strike: float,
    horizon: float,
    sigma0_sq: float,
    drift_in_linear_part: bool,
    american: bool,
    box_width: float,
    parameters: dict,
) -> ProblemSpec:
    d = vols.shape[0]
    sigma0 = math.sqrt(sigma0_sq)
    split = 0.5 * (1.0 - sigma0_sq)
    eye = np.eye(d)

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        if drift_in_linear_part:
            return drift_rates * x
        return np.zeros_like(x)

    def diffusion(t, x):
        x = np.asarray(x, dtype=float)
        return (sigma0 * vols * x)[..., None] * eye

    def nonlinearity(t, x, value, p, gamma):
        x = np.asarray(x, dtype=float)
        gamma_diag = np.diagonal(gamma, axis1=-2, axis2=-1)
        out = split * np.sum(x * x * vols * vols * gamma_diag, axis=-1) - rate * value
        if not drift_in_linear_part:
            out = out + np.sum(drift_rates * x * p, axis=-1)
        return out

    def obstacle(t, x):
        x = np.asarray(x, dtype=float)
        return np.maximum(strike - np.prod(x, axis=-1), 0.0)

    def full_generator(alphas, t, x, value, p, gamma):
        # 线性问题：唯一控制，L = ½Σx²σ²γ_ii + Σμ_i x_i p_i − r·v
        x = np.asarray(x, dtype=float)
        gamma_diag = np.diagonal(gamma, axis1=-2, axis2=-1)
        generator = (
            0.5 * np.sum(x * x * vols * vols * gamma_diag, axis=-1)
            + np.sum(drift_rates * x * p, axis=-1)
            - rate * value
        )
        return np.repeat(generator[..., None], alphas.shape[0], axis=-1)

    spread = box_width * vols * math.sqrt(horizon)
    lower = spots * np.exp(-spread)
    upper = spots * np.exp(spread)
    # |∂g/∂x_i| ≤ Π_{j≠i} upper_j
    partials = np.array([np.prod(np.delete(upper, i)) for i in range(d)]) if d > 1 else np.ones(1)

    return ProblemSpec(
        problem_id=problem_id,
        dim=d,
        horizon=horizon,
        drift=drift,
        diffusion=diffusion,
        nonlinearity=nonlinearity,
        obstacle=obstacle,
        eval_point=tuple(float(s) for s in spots),
        domain_box=(tuple(float(v) for v in lower), tuple(float(v) for v in upper)),
        lip_x=float(np.sqrt(np.sum(partials * partials))),
        holder_t=0.0,
        obstacle_bound=float(strike),
        early_exercise=american,
        control_family=ControlFamily(
            operator=full_generator,
            grid=lambda m: np.zeros(1),
            resolution=1,
            sense="inf",
        ),
        parameters=parameters,
    )


def make_geometric_put(
    r: float = 0.03,
    sigmas: Sequence[float] = (0.1, 0.1, 0.1),
    strike: float = 8.0,
    horizon: float = 1.0,
    sigma0_sq: float = 1.0,
    spots: Sequence[float] = (2.0, 2.0, 2.0),
    drift_in_linear_part: bool = True,
    american: bool = True,
    box_width: float = 5.0,
) -> ProblemSpec:
    """几何篮子美式看跌（每个资产一个状态坐标）"""
    _validate(r, sigmas, strike, horizon, sigma0_sq, spots)
    vols = np.asarray(sigmas, dtype=float)
    return _put_spec(
        problem_id="geometric_put_3d" if len(vols) == 3 else f"geometric_put_{len(vols)}d",
        rate=r,
        drift_rates=np.full(vols.shape[0], r),
        vols=vols,
        spots=np.asarray(spots, dtype=float),
        strike=strike,
        horizon=horizon,
        sigma0_sq=sigma0_sq,
        drift_in_linear_part=drift_in_linear_part,
        american=american,
        box_width=box_width,
        parameters={
            "r": r, "sigmas": list(sigmas), "strike": strike, "horizon": horizon,
            "sigma0_sq": sigma0_sq, "spots": list(spots),
            "drift_in_linear_part": drift_in_linear_part, "american": american,
        },
    )


def make_geometric_put_reduced(
    r: float = 0.03,
    sigmas: Sequence[float] = (0.1, 0.1, 0.1),
    strike: float = 8.0,
    horizon: float = 1.0,
    sigma0_sq: float = 1.0,
    spots: Sequence[float] = (2.0, 2.0, 2.0),
    drift_in_linear_part: bool = True,
    american: bool = True,
    box_width: float = 5.0,
) -> ProblemSpec:
    """降维到 ξ = Π s_i 的一维看跌：dξ = ξ(m·r dt + σ̄ dB)"""
    _validate(r, sigmas, strike, horizon, sigma0_sq, spots)
    vol_bar = math.sqrt(sum(s * s for s in sigmas))
    return _put_spec(
        problem_id="geometric_put_1d",
        rate=r,
        drift_rates=np.array([len(sigmas) * r]),
        vols=np.array([vol_bar]),
        spots=np.array([float(np.prod(spots))]),
        strike=strike,
        horizon=horizon,
        sigma0_sq=sigma0_sq,
        drift_in_linear_part=drift_in_linear_part,
        american=american,
        box_width=box_width,
        parameters={
            "r": r, "sigmas": list(sigmas), "strike": strike, "horizon": horizon,
            "sigma0_sq": sigma0_sq, "spots": list(spots),
            "drift_in_linear_part": drift_in_linear_part, "american": american,
        },
    )
