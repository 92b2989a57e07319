# dcda/api/v1/endpoints/experiments.py
"""Experiment endpoints"""

import logging
import time

from fastapi import APIRouter, Depends
from fastapi.concurrency import run_in_threadpool

from dcda.api.dependencies import get_runner, http_error
from dcda.core.exceptions import DCDAException
from dcda.models.requests import RunExperimentRequest
from dcda.models.responses import RunSummaryResponse
from dcda.services.config_parser import parse_config
from dcda.services.experiment_runner import ExperimentRunner

logger = logging.getLogger(__name__)
router = APIRouter()


@router.post("/run", response_model=RunSummaryResponse)
async def run_experiment(request: RunExperimentRequest, runner: ExperimentRunner = Depends(get_runner)):
    """Parse a config, simulate it and return the run summary"""
    start = time.perf_counter()
    try:
        config = parse_config(request.config)
        action = runner.run if request.write_files else runner.execute
        result = await run_in_threadpool(action, config)
    except DCDAException as e:
        raise http_error(e)
    summary = result.summary()
    logger.info(f"Served {config.problem.family} run with T={config.T}")
    return RunSummaryResponse(**summary, processing_time=time.perf_counter() - start)
