import logging
import os
from functools import lru_cache
from typing import Any

from dotenv import load_dotenv
from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables from a local .env file if present.
load_dotenv()


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="VSYSTEM_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    workers: int = 1
    log_level: str = "WARNING"
    points_per_decade: int = 64
    output_dir: str = "."

    @field_validator("workers", mode="before")
    @classmethod
    def _workers(cls, value: Any) -> Any:
        if value is None or (isinstance(value, str) and not value.strip()):
            return os.cpu_count() or 1
        numeric = int(value)
        if numeric < 0:
            raise ValueError("must not be negative")
        if numeric == 0:
            return os.cpu_count() or 1
        return numeric

    @field_validator("log_level", mode="before")
    @classmethod
    def _log_level(cls, value: Any) -> Any:
        if isinstance(value, str):
            normalized = value.strip().upper() or "WARNING"
            if not isinstance(logging.getLevelName(normalized), int):
                raise ValueError(f"unknown log level {value!r}")
            return normalized
        return value

    @field_validator("points_per_decade")
    @classmethod
    def _points_per_decade(cls, value: int) -> int:
        if value < 4:
            raise ValueError("must be at least 4")
        return value

    @field_validator("output_dir", mode="before")
    @classmethod
    def _output_dir(cls, value: Any) -> Any:
        if isinstance(value, str):
            return value.strip() or "."
        return value

    @property
    def level(self) -> int:
        return logging.getLevelName(self.log_level)


@lru_cache
def get_settings() -> Settings:
    return Settings()


__all__ = ["Settings", "get_settings"]
