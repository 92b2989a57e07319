# dcda/main.py
"""Main FastAPI application"""

import logging
import os
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from dcda.api.v1.api import api_router
from dcda.config import settings
from dcda.services.experiment_runner import PRESETS
from dcda.utils.logger import setup_logging

setup_logging(settings.LOG_LEVEL, settings.LOG_FILE)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Manage application lifecycle"""
    logger.info(f"Starting {settings.PROJECT_NAME} v{settings.VERSION}")
    os.makedirs(settings.OUTPUT_DIR, exist_ok=True)
    yield
    logger.info("Shutting down")


app = FastAPI(
    title=settings.PROJECT_NAME,
    version=settings.VERSION,
    openapi_url=f"{settings.API_V1_STR}/openapi.json",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(api_router, prefix=settings.API_V1_STR)


@app.get("/")
async def root():
    """Service identity and the presets the CLI can reproduce"""
    return {
        "service": settings.PROJECT_NAME,
        "version": settings.VERSION,
        "presets": list(PRESETS),
        "output_dir": settings.OUTPUT_DIR,
        "docs": "/docs",
    }
