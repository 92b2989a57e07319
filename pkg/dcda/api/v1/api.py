# dcda/api/v1/api.py
"""API router aggregation"""

from fastapi import APIRouter

from dcda.api.v1.endpoints import bounds, experiments, health

api_router = APIRouter()

api_router.include_router(health.router, prefix="/health", tags=["health"])
api_router.include_router(experiments.router, prefix="/experiments", tags=["experiments"])
api_router.include_router(bounds.router, prefix="/bounds", tags=["bounds"])
