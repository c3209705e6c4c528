"""
Reference Service
独立参考解 - 几何篮子降维、CRR二叉树美式看跌、对数正态欧式看跌
"""
import math
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy.stats import norm

from saturn_mousehunter_obstacle_engine.domain.errors import InvalidLatticeError, InvalidParameterError
from saturn_mousehunter_obstacle_engine.domain.models import ReducedGBM
from saturn_mousehunter_obstacle_engine.domain.problems.registry import default_parameters
from saturn_mousehunter_obstacle_engine.infrastructure.aop.decorators import measure
from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import get_app_config
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger

log = get_logger(__name__)


def reduce_geometric(
    mus: Sequence[float],
    sigmas: Sequence[float],
    spots: Sequence[float],
    r: float = 0.0,
) -> ReducedGBM:
    """ξ = Π s_i：μ̄ = Σμ_i，σ̄ = (Σσ_i²)^½"""
    if not (len(mus) == len(sigmas) == len(spots)) or len(spots) == 0:
        raise InvalidParameterError("mus, sigmas and spots must be non-empty with equal length")
    if any(s <= 0 for s in spots):
        raise InvalidParameterError(f"spots must be positive, got {list(spots)}")
    return ReducedGBM(
        drift_bar=float(sum(mus)),
        vol_bar=math.sqrt(sum(s * s for s in sigmas)),
        spot=float(np.prod(spots)),
        rate=r,
    )


@measure("reference_binomial_seconds")
def binomial_american_put(red: ReducedGBM, strike: float, horizon: float, steps: int, american: bool = True) -> float:
    """CRR树：u = e^{σ̄√h}，d = 1/u，p = (e^{μ̄h} − d)/(u − d)，每步贴现 e^{−rh}"""
    if steps < 1:
        raise InvalidParameterError(f"steps must be positive, got {steps}")
    if not horizon > 0:
        raise InvalidParameterError(f"horizon must be positive, got {horizon}")
    h = horizon / steps
    jump = red.vol_bar * math.sqrt(h)
    u = math.exp(jump)
    d = 1.0 / u
    p = (math.exp(red.drift_bar * h) - d) / (u - d)
    if not 0.0 < p < 1.0:
        raise InvalidLatticeError(f"lattice probability {p:.6g} outside (0, 1); use more steps")
    discount = math.exp(-red.rate * h)

    prices = red.spot * np.exp(jump * (2.0 * np.arange(steps + 1) - steps))
    values = np.maximum(strike - prices, 0.0)
    for i in range(steps - 1, -1, -1):
        values = discount * (p * values[1:i + 2] + (1.0 - p) * values[:i + 1])
        if american:
            prices = red.spot * np.exp(jump * (2.0 * np.arange(i + 1) - i))
            values = np.maximum(values, strike - prices)
    return float(values[0])


def lognormal_european_put(red: ReducedGBM, strike: float, horizon: float) -> float:
    """e^{−rT}·E[(K − ξ_T)₊]，ln ξ_T ~ N(ln ξ0 + (μ̄ − ½σ̄²)T, σ̄²T)"""
    if not horizon > 0:
        raise InvalidParameterError(f"horizon must be positive, got {horizon}")
    if strike <= 0:
        return 0.0
    sd = red.vol_bar * math.sqrt(horizon)
    forward = red.spot * math.exp(red.drift_bar * horizon)
    d1 = (math.log(forward / strike) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    undiscounted = strike * norm.cdf(-d2) - forward * norm.cdf(-d1)
    return math.exp(-red.rate * horizon) * float(undiscounted)


def geometric_put_reference(params: Optional[Dict[str, Any]] = None, steps: Optional[int] = None) -> Dict[str, Any]:
    """几何篮子看跌的二叉树 / 欧式参考值（风险中性：μ_i = r）"""
    merged = {**default_parameters("geometric_put_3d"), **(params or {})}
    r = float(merged["r"])
    sigmas = list(merged["sigmas"])
    red = reduce_geometric([r] * len(sigmas), sigmas, list(merged["spots"]), r)
    steps = steps or get_app_config().binomial_reference_steps
    american = binomial_american_put(red, merged["strike"], merged["horizon"], steps)
    european = lognormal_european_put(red, merged["strike"], merged["horizon"])
    log.info(f"Geometric put reference: binomial({steps})={american:.6f}, european={european:.6f}")
    return {
        "reduced": red.model_dump(),
        "strike": merged["strike"],
        "horizon": merged["horizon"],
        "steps": steps,
        "american": american,
        "european": european,
    }
