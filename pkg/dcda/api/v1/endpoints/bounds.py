# dcda/api/v1/endpoints/bounds.py
"""Closed-form bound calculators"""

from typing import Literal

from fastapi import APIRouter, HTTPException

from dcda.api.dependencies import http_error
from dcda.core.bounds import bound_randomized, bound_round_robin, bound_static
from dcda.core.exceptions import DCDAException
from dcda.core.schedule import expected_squared_mixing, make_randomized
from dcda.core.topology import make_full, make_ring, mixing_from_adjacency, second_singular_value
from dcda.models.domain import MixingMatrix, StepSchedule
from dcda.models.requests import BoundRequest
from dcda.models.responses import BoundResponse

router = APIRouter()


def _sigma2(request: BoundRequest, scheme: str) -> float:
    if request.sigma2 is not None:
        return request.sigma2
    graph = make_full(request.n) if request.graph_kind == "full" else make_ring(request.n, request.l)
    mixing = mixing_from_adjacency(graph, method=request.weights)
    if scheme != "randomized":
        return second_singular_value(mixing)
    m = request.m if request.m is not None else request.d
    policy = make_randomized(mixing, request.d, seed=0, mode=request.mode, m=m, rho=request.rho)
    return second_singular_value(MixingMatrix(expected_squared_mixing(policy, 0)))


@router.post("/{scheme}", response_model=BoundResponse)
async def evaluate_bound(scheme: Literal["static", "round_robin", "randomized"], request: BoundRequest):
    """Bound value of a sharing scheme for the given constants"""
    schedule = StepSchedule(C=request.C)
    try:
        sigma2 = _sigma2(request, scheme)
        if scheme == "static":
            value = bound_static(request.L, request.psi_star, schedule, request.d, request.n, request.T, sigma2)
        elif scheme == "round_robin":
            if request.m is None:
                raise HTTPException(status_code=422, detail="round_robin needs m")
            value = bound_round_robin(
                request.L, request.psi_star, schedule, request.d, request.m, request.n, request.T, sigma2
            )
        else:
            value = bound_randomized(
                request.L, request.psi_star, schedule, request.d, request.n, request.T, sigma2, request.delta
            )
    except DCDAException as e:
        raise http_error(e)
    return BoundResponse(scheme=scheme, value=value, sigma2=sigma2, inputs=request.model_dump())
