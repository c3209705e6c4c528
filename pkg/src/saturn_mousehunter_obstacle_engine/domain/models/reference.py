"""
Reference Models
参考解模型 - 几何篮子降维后的一维GBM
"""
from pydantic import BaseModel, ConfigDict, Field


class ReducedGBM(BaseModel):
    """ξ = Π s_i 满足 dξ = ξ(μ̄ dt + σ̄ dB)"""
    model_config = ConfigDict(frozen=True)

    drift_bar: float = Field(..., description="μ̄ = Σ μ_i")
    vol_bar: float = Field(..., gt=0, description="σ̄ = (Σ σ_i²)^½")
    spot: float = Field(..., gt=0, description="Π s_i")
    rate: float = Field(default=0.0, description="贴现率 r")
