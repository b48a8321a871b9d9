from typing import Literal

from pydantic import field_validator
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    PROJECT_NAME: str = "Geometric Hyena"
    VERSION: str = "0.1.0"

    # Worker cap for data generation fan-out; benchmarks always time on one thread.
    THREADS: int = 1
    DTYPE: Literal["float64", "float32"] = "float64"
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "runs"

    @field_validator("THREADS")
    @classmethod
    def validate_threads(cls, v: int) -> int:
        if v < 1:
            raise ValueError("GHYENA_THREADS must be at least 1")
        return v

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        if isinstance(v, str):
            return v.upper()
        return v

    class Config:
        case_sensitive = True
        env_prefix = "GHYENA_"
        env_file = ".env"
        extra = "ignore"


settings = Settings()
