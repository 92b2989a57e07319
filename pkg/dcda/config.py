# dcda/config.py
"""Configuration management for the DCDA simulator"""

from typing import List, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings"""
    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # API Configuration
    API_V1_STR: str = "/api/v1"
    PROJECT_NAME: str = "DCDA Simulator"
    VERSION: str = "0.2.0"

    # File paths
    DATA_DIR: str = "./data"
    OUTPUT_DIR: str = "./data/output"

    # Simulation defaults
    DEFAULT_HORIZON: int = 2000
    MAX_CONCURRENT_RUNS: int = 4
    REFERENCE_ITERS_FACTOR: int = 100
    REFERENCE_GRID: List[float] = [0.01, 0.03, 0.1, 0.3, 1.0]
    LIPSCHITZ_SAMPLES: int = 10_000

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None


settings = Settings()
