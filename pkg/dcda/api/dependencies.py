# dcda/api/dependencies.py
"""Shared dependencies for API endpoints"""

import logging
from functools import lru_cache

from fastapi import HTTPException

from dcda.core.exceptions import ConfigurationError, DCDAException, DomainError, NumericalDivergenceError
from dcda.services.experiment_runner import ExperimentRunner

logger = logging.getLogger(__name__)


@lru_cache()
def get_runner() -> ExperimentRunner:
    """One runner per process"""
    return ExperimentRunner()


def http_error(exc: DCDAException) -> HTTPException:
    """422 for bad input, 409 for divergence, 500 otherwise"""
    if isinstance(exc, ConfigurationError):
        detail = [{"line": line, "key": key, "message": msg} for line, key, msg in exc.errors] or str(exc)
        return HTTPException(status_code=422, detail=detail)
    if isinstance(exc, DomainError):
        return HTTPException(status_code=422, detail=str(exc))
    if isinstance(exc, NumericalDivergenceError):
        return HTTPException(status_code=409, detail={"message": str(exc), "diagnostics": exc.diagnostics})
    logger.error(f"Request failed: {str(exc)}")
    return HTTPException(status_code=500, detail=str(exc))
