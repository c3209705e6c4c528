"""
共享测试夹具
"""
import pytest

from saturn_mousehunter_obstacle_engine.domain.problems import build
from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import AppConfig
from saturn_mousehunter_obstacle_engine.infrastructure.repositories import EnsembleDumpRepo, ResultCsvRepo
from saturn_mousehunter_obstacle_engine.application.services.experiment_service import ExperimentService


@pytest.fixture
def put_1d():
    return build("geometric_put_1d")


@pytest.fixture
def put_1d_split():
    """σ0² = 0.9，非线性部分非零"""
    return build("geometric_put_1d", sigma0_sq=0.9)


@pytest.fixture
def put_3d():
    return build("geometric_put_3d")


@pytest.fixture
def indifference():
    return build("indifference_2+1d")


@pytest.fixture
def indifference_reduced():
    return build("indifference_1+1d")


@pytest.fixture
def app_config(tmp_path):
    return AppConfig(
        workers=2,
        output_dir=tmp_path / "results",
        binomial_reference_steps=2000,
        log_format="text",
    )


@pytest.fixture
def experiment_service(app_config):
    return ExperimentService(ResultCsvRepo(), EnsembleDumpRepo(), app_config)
