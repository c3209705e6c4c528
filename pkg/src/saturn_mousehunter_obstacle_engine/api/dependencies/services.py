"""
Service Dependencies
服务依赖注入
"""
from functools import lru_cache

from saturn_mousehunter_obstacle_engine.application.services.experiment_service import ExperimentService
from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import get_app_config
from saturn_mousehunter_obstacle_engine.infrastructure.repositories import EnsembleDumpRepo, ResultCsvRepo


@lru_cache()
def get_result_repo() -> ResultCsvRepo:
    """获取结果CSV Repository"""
    return ResultCsvRepo()


@lru_cache()
def get_ensemble_repo() -> EnsembleDumpRepo:
    """获取路径集合Repository"""
    return EnsembleDumpRepo()


def get_experiment_service() -> ExperimentService:
    """获取实验服务"""
    return ExperimentService(get_result_repo(), get_ensemble_repo(), get_app_config())
