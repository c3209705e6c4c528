"""
Indifference Pricing
指数效用无差别定价 - 控制-停时问题，状态 (x, s_1, ..., s_m)

Linear part: L^S + ½ε²∂_xx (wealth coordinate driven by an auxiliary ε·dB̄).
Nonlinear part: F = −(μ0 φ_x + Σ c_i s_i φ_{x s_i})² / (2σ0² φ_xx) − ½ε² φ_xx.
"""
import math
from typing import Sequence

import numpy as np

from saturn_mousehunter_obstacle_engine.domain.errors import InvalidParameterError
from saturn_mousehunter_obstacle_engine.domain.models.problem_spec import ControlFamily, ProblemSpec

THETA_MAX = 50.0
# 保护下的投资量上限（Merton比例的倍数）
GUARD_MERTON_MULTIPLE = 3.0


def _validate(mu0: float, sigma0: float, gamma_ra: float, eps: float, horizon: float, strike: float) -> None:
    if eps <= 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    if gamma_ra <= 0:
        raise InvalidParameterError(f"gamma_ra must be positive, got {gamma_ra}")
    if sigma0 <= 0:
        raise InvalidParameterError(f"sigma0 must be positive, got {sigma0}")
    if horizon <= 0:
        raise InvalidParameterError(f"horizon must be positive, got {horizon}")
    if strike < 0:
        raise InvalidParameterError(f"strike must be non-negative, got {strike}")
    if not math.isfinite(mu0):
        raise InvalidParameterError("mu0 must be finite")


def _indifference_spec(
    problem_id: str,
    mu0: float,
    sigma0: float,
    asset_drifts: np.ndarray,
    asset_vols: np.ndarray,
    cross: np.ndarray,
    gamma_ra: float,
    strike: float,
    horizon: float,
    eps: float,
    wealth: float,
    spots: np.ndarray,
    american: bool,
    box_width: float,
    parameters: dict,
) -> ProblemSpec:
    m = asset_vols.shape[0]
    d = m + 1
    sharpe_half = mu0 * mu0 / (2.0 * sigma0 * sigma0)
    vols = np.concatenate([[eps], asset_vols])
    eye = np.eye(d)

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 1:] = asset_drifts * x[..., 1:]
        return out

    def diffusion(t, x):
        x = np.asarray(x, dtype=float)
        scale = np.concatenate([np.ones(x.shape[:-1] + (1,)), x[..., 1:]], axis=-1)
        return (vols * scale)[..., None] * eye

    def _numerator(x, p, gamma):
        return mu0 * p[..., 0] + np.sum(cross * x[..., 1:] * gamma[..., 0, 1:], axis=-1)

    def nonlinearity(t, x, value, p, gamma):
        x = np.asarray(x, dtype=float)
        gxx = gamma[..., 0, 0]
        num = _numerator(x, p, gamma)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -num * num / (2.0 * sigma0 * sigma0 * gxx) - 0.5 * eps * eps * gxx

    def _claim(x):
        return np.maximum(strike - np.prod(x[..., 1:], axis=-1), 0.0)

    def obstacle(t, x):
        x = np.asarray(x, dtype=float)
        return -np.exp(-sharpe_half * (horizon - t) - gamma_ra * (x[..., 0] + _claim(x)))

    def controlled_generator(thetas, t, x, value, p, gamma):
        # L^θ = L^S + ½θ²σ0² φ_xx + θ(μ0 φ_x + Σ c_i s_i φ_{x s_i})
        x = np.asarray(x, dtype=float)
        s = x[..., 1:]
        gamma_diag = np.diagonal(gamma, axis1=-2, axis2=-1)[..., 1:]
        base = np.sum(0.5 * asset_vols ** 2 * s * s * gamma_diag + asset_drifts * s * p[..., 1:], axis=-1)
        num = _numerator(x, p, gamma)
        gxx = gamma[..., 0, 0]
        return (
            base[..., None]
            + 0.5 * sigma0 * sigma0 * thetas * thetas * gxx[..., None]
            + thetas * num[..., None]
        )

    merton = abs(mu0) / (sigma0 * sigma0 * gamma_ra)
    guard_theta = GUARD_MERTON_MULTIPLE * merton if merton > 0 else THETA_MAX

    def curvature_floor(t, x, value, p, gamma):
        # |θ*| = |num| / (σ0² |φ_xx|) ≤ guard_theta
        return np.abs(_numerator(np.asarray(x, dtype=float), p, gamma)) / (sigma0 * sigma0 * guard_theta)

    def admissible(t, x, value, p, gamma):
        gxx = gamma[..., 0, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            theta_star = -_numerator(np.asarray(x, dtype=float), p, gamma) / (sigma0 * sigma0 * gxx)
        return (gxx < 0) & (np.abs(theta_star) <= THETA_MAX)

    lower = np.concatenate([[wealth - box_width * eps * math.sqrt(horizon)], spots * np.exp(-box_width * asset_vols * math.sqrt(horizon))])
    upper = np.concatenate([[wealth + box_width * eps * math.sqrt(horizon)], spots * np.exp(box_width * asset_vols * math.sqrt(horizon))])
    bound = math.exp(-gamma_ra * lower[0])
    if m > 1:
        spot_partials = np.array([np.prod(np.delete(upper[1:], i)) for i in range(m)])
    else:
        spot_partials = np.ones(1)

    return ProblemSpec(
        problem_id=problem_id,
        dim=d,
        horizon=horizon,
        drift=drift,
        diffusion=diffusion,
        nonlinearity=nonlinearity,
        obstacle=obstacle,
        eval_point=tuple([float(wealth)] + [float(s) for s in spots]),
        domain_box=(tuple(float(v) for v in lower), tuple(float(v) for v in upper)),
        lip_x=float(gamma_ra * bound * math.sqrt(1.0 + float(np.sum(spot_partials ** 2)))),
        holder_t=float(sharpe_half * bound * math.sqrt(horizon)),
        obstacle_bound=bound,
        early_exercise=american,
        concave_axes=(0,),
        curvature_floor=curvature_floor,
        smooth_axes=(0,),
        value_range=(-math.inf, 0.0),
        control_family=ControlFamily(
            operator=controlled_generator,
            grid=lambda k: np.linspace(-THETA_MAX, THETA_MAX, k),
            resolution=2001,
            sense="sup",
            admissible=admissible,
        ),
        parameters=parameters,
    )


def make_indifference(
    mu0: float = 0.1,
    sigma0: float = 0.1,
    mus: Sequence[float] = (0.1, 0.1),
    sigmas: Sequence[float] = (0.1, 0.1),
    rhos: Sequence[float] = (0.1, 0.1),
    gamma_ra: float = 1.0,
    strike: float = 1.0,
    horizon: float = 1.0,
    eps: float = 0.05,
    wealth: float = 1.0,
    spots: Sequence[float] = (1.0, 1.0),
    american: bool = True,
    box_width: float = 4.0,
) -> ProblemSpec:
    """两只不可交易资产上的几何看跌，状态 (x, s1, s2)"""
    _validate(mu0, sigma0, gamma_ra, eps, horizon, strike)
    if not (len(mus) == len(sigmas) == len(rhos) == len(spots)) or any(s <= 0 for s in sigmas):
        raise InvalidParameterError("mus, sigmas, rhos and spots must have equal length with positive sigmas")
    vols = np.asarray(sigmas, dtype=float)
    return _indifference_spec(
        problem_id="indifference_2+1d" if len(vols) == 2 else f"indifference_{len(vols)}+1d",
        mu0=mu0,
        sigma0=sigma0,
        asset_drifts=np.asarray(mus, dtype=float),
        asset_vols=vols,
        cross=sigma0 * np.asarray(rhos, dtype=float) * vols,
        gamma_ra=gamma_ra,
        strike=strike,
        horizon=horizon,
        eps=eps,
        wealth=wealth,
        spots=np.asarray(spots, dtype=float),
        american=american,
        box_width=box_width,
        parameters={
            "mu0": mu0, "sigma0": sigma0, "mus": list(mus), "sigmas": list(sigmas), "rhos": list(rhos),
            "gamma_ra": gamma_ra, "strike": strike, "horizon": horizon, "eps": eps,
            "wealth": wealth, "spots": list(spots), "american": american,
        },
    )


def make_indifference_reduced(
    mu0: float = 0.1,
    sigma0: float = 0.1,
    mus: Sequence[float] = (0.1, 0.1),
    sigmas: Sequence[float] = (0.1, 0.1),
    rhos: Sequence[float] = (0.1, 0.1),
    gamma_ra: float = 1.0,
    strike: float = 1.0,
    horizon: float = 1.0,
    eps: float = 0.05,
    wealth: float = 1.0,
    spots: Sequence[float] = (1.0, 1.0),
    american: bool = True,
    box_width: float = 4.0,
) -> ProblemSpec:
    """降维问题 u(t, x, ξ)，ξ = Π s_i：dξ = ξ(μ̄ dt + σ̄ dB)"""
    _validate(mu0, sigma0, gamma_ra, eps, horizon, strike)
    if not (len(mus) == len(sigmas) == len(rhos) == len(spots)) or any(s <= 0 for s in sigmas):
        raise InvalidParameterError("mus, sigmas, rhos and spots must have equal length with positive sigmas")
    vol_bar = math.sqrt(sum(s * s for s in sigmas))
    return _indifference_spec(
        problem_id="indifference_1+1d",
        mu0=mu0,
        sigma0=sigma0,
        asset_drifts=np.array([float(sum(mus))]),
        asset_vols=np.array([vol_bar]),
        cross=np.array([sigma0 * sum(r * s for r, s in zip(rhos, sigmas))]),
        gamma_ra=gamma_ra,
        strike=strike,
        horizon=horizon,
        eps=eps,
        wealth=wealth,
        spots=np.array([float(np.prod(spots))]),
        american=american,
        box_width=box_width,
        parameters={
            "mu0": mu0, "sigma0": sigma0, "mus": list(mus), "sigmas": list(sigmas), "rhos": list(rhos),
            "gamma_ra": gamma_ra, "strike": strike, "horizon": horizon, "eps": eps,
            "wealth": wealth, "spots": list(spots), "american": american,
        },
    )
