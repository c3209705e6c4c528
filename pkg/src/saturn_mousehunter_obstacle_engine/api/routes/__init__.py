"""API Routes Initialization"""

from .problems import router as problems_router
from .solves import router as solves_router

__all__ = ["problems_router", "solves_router"]
