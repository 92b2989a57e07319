# dcda/models/requests.py
"""API request models"""

from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator


class RunExperimentRequest(BaseModel):
    """Config text in the flat ``key = value`` format"""
    config: str = Field(..., description="Experiment configuration text")
    write_files: bool = Field(False, description="Write trace and metadata under OUTPUT_DIR")


class BoundRequest(BaseModel):
    """Inputs of a closed-form scheme bound.

    Give ``sigma2`` directly, or a graph the service builds the mixing
    matrix from.
    """
    L: float = Field(..., ge=0)
    psi_star: float = Field(..., ge=0)
    C: float = Field(1.0, gt=0, description="Step constant of alpha(t) = C / sqrt(t)")
    T: int = Field(..., ge=1)
    d: int = Field(..., ge=1)
    n: int = Field(..., ge=1)
    m: Optional[int] = Field(None, ge=0, description="Coordinates per step")
    sigma2: Optional[float] = Field(None, ge=0)
    delta: float = Field(0.05, gt=0, lt=1)
    graph_kind: Optional[Literal["full", "ring"]] = None
    l: int = Field(1, ge=1)
    weights: Literal["max_degree", "metropolis"] = "max_degree"
    mode: Literal["subset", "all_to_all"] = "subset"
    rho: float = Field(1.0, gt=0, le=1)

    @model_validator(mode="after")
    def check_spectrum_source(self):
        if self.sigma2 is None and self.graph_kind is None:
            raise ValueError("give either sigma2 or graph_kind")
        return self
