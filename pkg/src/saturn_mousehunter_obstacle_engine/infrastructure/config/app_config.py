"""
Application Configuration
障碍问题求解引擎应用配置
"""
import os
from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class AppConfig(BaseSettings):
    """应用配置"""

    model_config = SettingsConfigDict(
        env_prefix="OBSTACLE_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # 应用信息
    app_name: str = "Saturn MouseHunter Obstacle Engine"
    app_version: str = "0.1.0"
    environment: str = Field(default="development")
    debug: bool = Field(default=False)

    # 服务配置
    host: str = Field(default="0.0.0.0")
    port: int = Field(default=8003)

    # 日志配置
    log_level: str = Field(default="INFO")
    log_format: str = Field(default="json")

    # 计算资源
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    max_paths: int = Field(default=2_000_000, ge=1, description="API请求允许的最大路径数")

    # 数值配置
    sigma_floor: float = Field(default=1e-12, gt=0, description="扩散矩阵行列式下限")
    default_seed: int = Field(default=20130901)

    # 参考值配置
    binomial_reference_steps: int = Field(default=20000, ge=1)
    expected_binomial_value: float = Field(default=0.338778)
    reference_tolerance: float = Field(default=1e-4, gt=0)

    # 输出配置
    output_dir: Path = Field(default=Path("results"))
    ensemble_dump_dir: Optional[Path] = Field(default=None)


@lru_cache()
def get_app_config() -> AppConfig:
    """获取应用配置（单例）"""
    return AppConfig()
