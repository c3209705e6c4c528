"""
Problem Routes
问题注册表与假设抽查API路由
"""
from typing import Any, Dict, List

from fastapi import APIRouter, HTTPException, Query
from pydantic import BaseModel

from saturn_mousehunter_obstacle_engine.application.services.assumption_service import check_assumptions, check_hjb
from saturn_mousehunter_obstacle_engine.domain.errors import ObstacleEngineError
from saturn_mousehunter_obstacle_engine.domain.problems.registry import build, default_parameters, problem_ids
from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import get_app_config
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger

log = get_logger(__name__)
router = APIRouter(prefix="/api/v1/problems", tags=["problems"])


class ProblemSummary(BaseModel):
    """注册问题概要"""
    problem_id: str
    dim: int
    horizon: float
    eval_point: List[float]
    defaults: Dict[str, Any]


@router.get("", response_model=List[ProblemSummary])
def list_problems():
    """列出注册问题及默认参数"""
    out = []
    for problem_id in problem_ids():
        spec = build(problem_id)
        out.append(ProblemSummary(
            problem_id=problem_id,
            dim=spec.dim,
            horizon=spec.horizon,
            eval_point=list(spec.eval_point),
            defaults=default_parameters(problem_id),
        ))
    return out


@router.get("/{problem_id}/assumptions")
def get_assumptions(
    problem_id: str,
    probe_count: int = Query(256, ge=1, le=100_000),
    fd_step: float = Query(1e-4, gt=0),
    seed: int = Query(0),
):
    """Assumption F 抽查报告（默认参数）"""
    try:
        spec = build(problem_id, sigma_floor=get_app_config().sigma_floor)
        report = check_assumptions(spec, probe_count=probe_count, fd_step=fd_step, seed=seed)
    except ObstacleEngineError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return report.model_dump(mode="json", by_alias=True)


@router.get("/{problem_id}/hjb")
def get_hjb(
    problem_id: str,
    probe_count: int = Query(256, ge=1, le=100_000),
    seed: int = Query(0),
    refine: int = Query(2, ge=1, le=16),
):
    """Assumption HJB / HJB+ 抽查报告"""
    try:
        report = check_hjb(build(problem_id, sigma_floor=get_app_config().sigma_floor), probe_count=probe_count, seed=seed, refine=refine)
    except ObstacleEngineError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return report.model_dump(mode="json")
