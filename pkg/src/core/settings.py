import os
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Process-wide defaults, read from CQ_* environment variables or a local .env file.
    Campaign-specific values (seed, range, buckets) live in the campaign spec instead.
    """
    model_config = SettingsConfigDict(env_prefix="CQ_", env_file=".env", extra="ignore")

    log_level: str = Field(default="INFO", description="Root logging level")
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1, description="Default compile worker count")
    compile_timeout: float = Field(default=30.0, gt=0, description="Seconds before a compile is classified as timeout")
    search_ceiling: int = Field(default=10**60, gt=0, description="Index ceiling for the EstimateIndex forward walk")
    initial_max_k: int = Field(default=16, ge=1, description="Strata precomputed when an enumeration is built")
    stderr_head_bytes: int = Field(default=4096, ge=0, description="Diagnostics kept per compile")
    campaign_root: str = Field(default="campaign", description="Parent directory of campaign folders")


@lru_cache
def get_settings() -> Settings:
    return Settings()
