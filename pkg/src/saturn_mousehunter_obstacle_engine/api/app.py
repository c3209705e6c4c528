"""
Saturn MouseHunter Obstacle Engine
障碍问题求解引擎服务
"""
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from saturn_mousehunter_obstacle_engine.api.routes import problems, solves
from saturn_mousehunter_obstacle_engine.domain.problems.registry import problem_ids
from saturn_mousehunter_obstacle_engine.infrastructure.aop.decorators import metrics
from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import get_app_config
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger

# 获取配置和日志
config = get_app_config()
log = get_logger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """应用生命周期管理"""
    log.info(f"Starting Obstacle Engine service, problems: {problem_ids()}")
    yield
    log.info(f"Obstacle Engine service stopped, metrics: {metrics.snapshot()}")


# 创建FastAPI应用
app = FastAPI(
    title=config.app_name,
    version=config.app_version,
    description="Saturn MouseHunter 障碍问题求解引擎 - 回归蒙特卡洛格式、参考解与收敛率分析",
    lifespan=lifespan,
    debug=config.debug,
)

# 注册路由
app.include_router(problems.router)
app.include_router(solves.router)


# 健康检查端点
@app.get("/health")
async def health_check():
    """健康检查"""
    return JSONResponse({
        "status": "healthy",
        "service": "obstacle-engine",
        "version": config.app_version,
        "environment": config.environment,
    })


# 根路径
@app.get("/")
async def root():
    """根路径"""
    return {
        "message": "Saturn MouseHunter Obstacle Engine",
        "version": config.app_version,
        "status": "running",
    }


@app.get("/metrics")
async def get_metrics():
    """耗时指标快照"""
    return metrics.snapshot()


# 全局异常处理器
@app.exception_handler(Exception)
async def global_exception_handler(request, exc):
    """全局异常处理"""
    log.error(f"Unhandled exception: {exc}")
    return JSONResponse(
        status_code=500,
        content={"detail": "Internal server error"},
    )
