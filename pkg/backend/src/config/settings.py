from typing import Optional
from pydantic_settings import BaseSettings
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

class Settings(BaseSettings):
    # Project settings
    PROJECT_NAME: str = "hslab"
    CODE_VERSION: str = "0.1.0"

    # Default seed when neither --seed nor a config file provides one (HSLAB_SEED)
    SEED: Optional[int] = None

    # Replica workers (1 = serial)
    WORKERS: int = 1

    # Monte Carlo volume estimator settings
    VOLUME_SAMPLES: int = 4096
    STAR_CHECK_SAMPLES: int = 10_000

    # Oracle quadrature cells per axis
    ORACLE_CELLS: int = 200

    # Sampler budgets
    REJECTION_MAX_ATTEMPTS: int = 100_000
    HEAT_BATH_MAX_ATTEMPTS: int = 10_000
    HEAT_BATH_MAX_PROPOSALS: int = 64

    # Logging settings
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "text"

    class Config:
        case_sensitive = True
        env_prefix = "HSLAB_"
        env_file = ".env"
        extra = "ignore"

# Create settings instance
settings = Settings()
