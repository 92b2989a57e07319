# dcda/api/v1/endpoints/health.py
"""Health check endpoints"""

from fastapi import APIRouter

from dcda.config import settings
from dcda.models.responses import HealthResponse

router = APIRouter()


@router.get("/", response_model=HealthResponse)
async def health_check():
    """Health check endpoint"""
    return HealthResponse(status="healthy", version=settings.VERSION)
