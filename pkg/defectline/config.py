from pydantic_settings import BaseSettings
from functools import lru_cache


class Settings(BaseSettings):
    # Root finding
    ZERO_TOL: float = 1e-9
    DEDUP_TOL: float = 1e-6
    GRID_DENSITY_2D: int = 32
    GRID_DENSITY_4D: int = 12
    NEWTON_MAX_ITER: int = 60
    JACOBIAN_COND_LIMIT: float = 1e10
    SUSPECT_TOL: float = 1e-5

    # Linear algebra
    CONDITION_CAP: float = 1e8
    STEP_FACTOR: float = 50.0  # evolve_2x2_cycle: max ||M1 - M0|| per unit delta_t

    # Classification
    CONTOUR_SAMPLES: int = 256
    CONTOUR_RADIUS_CAP: float = 0.1
    CONTOUR_BAND: float = 0.1
    DEGENERATE_JACOBIAN: float = 1e-12

    # Tracking
    MATCH_RADIUS_FLOOR: float = 0.05
    DT_MIN_DIVISOR: int = 1024
    REFINE_DIVISOR: int = 64  # extra bisection below dt_min for unbalanced events
    TIE_TOL: float = 1e-9

    # Ensemble
    TRIALS_DESK: int = 1000
    TRIALS_PAPER: int = 5000
    SWEEP_WORKERS: int = 1

    # HTTP / CLI
    APP_NAME: str = "defectline"
    APP_VERSION: str = "0.3.0"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"
    CORS_ORIGINS: str = "*"

    class Config:
        env_file = ".env"
        env_prefix = "DEFECTLINE_"
        case_sensitive = True


@lru_cache()
def get_settings() -> Settings:
    return Settings()
