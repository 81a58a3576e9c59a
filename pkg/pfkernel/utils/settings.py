"""
Runtime configuration
Environment variables (optionally from a .env file) with built-in defaults
"""
import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()


class Settings(BaseModel):
    """Process-wide defaults; command-line flags override these."""
    log_level: str = Field("INFO", description="logging level name")
    n_jobs: int = Field(1, description="joblib worker count (-1 = all cores)")
    fgt_epsilon: float = Field(1e-6, gt=0, lt=1, description="default FGT error tolerance")
    kfdr_gamma: float = Field(1e-3, gt=0, description="default KFDR regularization")
    output_dir: str = Field("./output", description="default output directory")
    svm_tolerance: float = Field(1e-3, gt=0, description="SMO stopping tolerance")
    svm_max_iter: int = Field(10_000_000, gt=0, description="SMO iteration cap")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """
    Read settings from the environment once.

    Returns:
        Settings instance
    """
    return Settings(
        log_level=os.getenv("PF_LOG_LEVEL", "INFO"),
        n_jobs=int(os.getenv("PF_N_JOBS", "1")),
        fgt_epsilon=float(os.getenv("PF_FGT_EPSILON", "1e-6")),
        kfdr_gamma=float(os.getenv("PF_KFDR_GAMMA", "1e-3")),
        output_dir=os.getenv("PF_OUTPUT_DIR", "./output"),
        svm_tolerance=float(os.getenv("PF_SVM_TOLERANCE", "1e-3")),
        svm_max_iter=int(os.getenv("PF_SVM_MAX_ITER", "10000000")),
    )
