import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()  # loads .env from current working directory


class Settings(BaseModel):
    """Defaults shared by the CLI and the library entry points"""
    out_dir: str = "results"
    seed: int = Field(0, ge=0)
    log_level: str = "INFO"
    svm_max_samples: int = Field(5000, gt=1)
    density_threshold: float = Field(0.25, gt=0.0, le=1.0)
    check_interval: int = Field(1, ge=1)


def load_settings() -> Settings:
    return Settings(
        out_dir=os.getenv('ASCD_OUT_DIR', 'results'),
        seed=os.getenv('ASCD_SEED', '0'),
        log_level=os.getenv('ASCD_LOG_LEVEL', 'INFO').upper(),
        svm_max_samples=os.getenv('ASCD_SVM_MAX_SAMPLES', '5000'),
        density_threshold=os.getenv('ASCD_DENSITY_THRESHOLD', '0.25'),
        check_interval=os.getenv('ASCD_CHECK_INTERVAL', '1'),
    )


settings = load_settings()
