from pydantic_settings import BaseSettings, SettingsConfigDict

class Settings(BaseSettings):
    # stopping defaults
    DEFAULT_TOL: float = 1e-8
    DEFAULT_MAX_ITER: int = 1_000_000
    RECORD_EVERY: int = 1
    THREADS: int = 1
    DEFAULT_SEED: int = 2024

    # parameter policy
    AUTO_C0_FACTOR: float = 1.001
    CONSENSUS_GAMMA: float = 0.3
    BASELINE_A: float = 1.0
    BASELINE_B: float = 1.0

    # artifacts / run records
    OUTPUT_DIR: str = "runs/"
    DATABASE_URL: str = "sqlite:///runs.db"

    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8")

settings = Settings()
