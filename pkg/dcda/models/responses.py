# dcda/models/responses.py
"""API response models"""

from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    """Health check response"""
    status: str = "healthy"
    timestamp: datetime = Field(default_factory=datetime.now)
    version: str


class RunSummaryResponse(BaseModel):
    """Outcome of one simulation run"""
    T: int
    n: int
    final_gap_max: Optional[float]
    final_gap_mean: Optional[float]
    final_dual_consensus: float
    metadata: Dict[str, Any]
    files: List[str] = Field(default_factory=list)
    processing_time: float


class BoundResponse(BaseModel):
    scheme: str
    value: float
    sigma2: float
    inputs: Dict[str, Any]
