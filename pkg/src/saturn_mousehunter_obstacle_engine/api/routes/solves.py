"""
Solve Routes
求解、收敛率与参考值API路由
"""
from typing import Any, Dict, List, Optional, Tuple, Union

from fastapi import APIRouter, Depends, HTTPException, Query
from pydantic import BaseModel, Field

from saturn_mousehunter_obstacle_engine.api.dependencies.services import get_experiment_service
from saturn_mousehunter_obstacle_engine.application.services.experiment_service import ExperimentService, rate_analysis
from saturn_mousehunter_obstacle_engine.application.services.reference_service import geometric_put_reference
from saturn_mousehunter_obstacle_engine.domain.errors import ObstacleEngineError
from saturn_mousehunter_obstacle_engine.domain.models import RateTable, ResultRow, RunConfig
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger

log = get_logger(__name__)
router = APIRouter(prefix="/api/v1", tags=["solves"])


class SolveResponse(BaseModel):
    """求解响应"""
    rows: List[ResultRow]
    reports: List[Dict[str, Any]]


class RateRequest(BaseModel):
    """收敛率分析请求"""
    values: List[Tuple[float, float]] = Field(..., description="(h, value) 列表")
    reference: float
    ref_floor: float = Field(default=1e-6, ge=0)


@router.post("/solves", response_model=SolveResponse)
def create_solve(config: RunConfig, service: ExperimentService = Depends(get_experiment_service)):
    """按运行配置求解，不写文件"""
    too_many = [p for p in config.paths if p > service.app_config.max_paths]
    if config.backend == "mc" and too_many:
        raise HTTPException(status_code=400, detail=f"paths {too_many} exceed max_paths={service.app_config.max_paths}")
    try:
        rows, reports = service.execute(config.model_copy(update={"dump_ensemble": False}))
    except ObstacleEngineError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return SolveResponse(
        rows=rows,
        reports=[r.model_dump(mode="json", by_alias=True, exclude={"layers"}) for r in reports],
    )


@router.post("/rates", response_model=RateTable)
def create_rate_table(request: RateRequest):
    """相邻步长误差比"""
    try:
        return rate_analysis(request.values, request.reference, request.ref_floor)
    except ObstacleEngineError as e:
        raise HTTPException(status_code=400, detail=str(e))


@router.get("/reference/geometric-put")
def get_geometric_put_reference(
    steps: Optional[int] = Query(None, ge=1, le=50_000),
    strike: Optional[float] = Query(None, gt=0),
    r: Optional[float] = Query(None, gt=0),
):
    """几何篮子看跌的二叉树美式值与对数正态欧式值"""
    params: Dict[str, Union[float, int]] = {}
    if strike is not None:
        params["strike"] = strike
    if r is not None:
        params["r"] = r
    try:
        return geometric_put_reference(params, steps=steps)
    except ObstacleEngineError as e:
        raise HTTPException(status_code=400, detail=str(e))
