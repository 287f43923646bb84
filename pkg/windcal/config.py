"""Configuration module for windcal."""

from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="WINDCAL_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log_level: str = Field(default="INFO", description="Log level")
    log_format: str = Field(default="text", pattern="^(text|json)$", description="Log format: text or json")

    # Parallelism
    threads: int = Field(default=1, ge=1, description="Default worker count for factor blocks and campaign pools")
    block_size: int = Field(default=1024, ge=1, description="Ordered points per Vecchia factor block")

    # Cost guards
    dense_max_n: int = Field(default=2000, ge=1, description="Largest set accepted by the dense likelihood oracle")
    simulate_max_n: int = Field(default=20000, ge=1, description="Largest set accepted by the dense simulator")


# Singleton instance - use get_settings() everywhere
_settings_instance: Optional[Settings] = None


def get_settings() -> Settings:
    """Get or create settings singleton instance."""
    global _settings_instance
    if _settings_instance is None:
        _settings_instance = Settings()
    return _settings_instance


def reset_settings() -> None:
    """Drop the cached settings so the next access re-reads the environment."""
    global _settings_instance
    _settings_instance = None
