"""
Configuration management with Pydantic Settings
Auto-load from .env file
"""

from pydantic_settings import BaseSettings
from typing import List


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    # Application Info
    app_name: str = "Stieltjes Calculus Service"
    app_version: str = "1.0.0"
    environment: str = "development"

    # Server Configuration
    host: str = "0.0.0.0"
    port: int = 8000
    workers: int = 1
    reload: bool = False

    # Security (empty key disables the header check)
    api_key: str = ""
    allowed_origins: str = "http://localhost:3000,http://localhost:5173"

    # Document cache
    document_cache_enabled: bool = True
    document_cache_size: int = 256
    max_document_size: int = 1048576  # 1MB
    fixtures_dir: str = "fixtures"

    # Logging
    log_level: str = "INFO"
    log_format: str = "colorlog"

    # ================================
    # Numerical defaults
    # ================================
    tol: float = 1e-9
    series_tol: float = 1e-12
    quad_tol: float = 1e-10
    max_depth: int = 24
    max_cells: int = 4096
    divergence_budget: float = 1e6
    continuity_tol: float = 1e-12
    increasing_tol: float = 1e-10
    ode_tol: float = 1e-8
    tab_grid: int = 2048
    n_jobs: int = 1

    model_config = {
        "env_file": ".env",
        "case_sensitive": False,
        "protected_namespaces": ()
    }

    @property
    def cors_origins(self) -> List[str]:
        """Parse allowed origins from comma-separated string"""
        return [origin.strip() for origin in self.allowed_origins.split(",")]


# Global settings instance
settings = Settings()
