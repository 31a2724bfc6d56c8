from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Global engine settings. Reads from environment variables prefixed with CONEGEOM_
    (e.g. CONEGEOM_OUTPUT_DIR) and from a local .env file.
    """

    model_config = SettingsConfigDict(
        env_prefix="CONEGEOM_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )

    PROJECT_NAME: str = "Cone Minkowski Verification Engine"

    # Output
    OUTPUT_DIR: str = "./results"
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    CSV_SIGNIFICANT_DIGITS: int = 12

    # Quadrature (levels double every resolution)
    DEFAULT_N_PHI: int = 256
    DEFAULT_N_S: int = 64
    DEFAULT_N_B: int = 512
    DEFAULT_LEVELS: int = 3

    # Geometry tolerances
    ORTHOGONALITY_TOL: float = 1e-8
    BOUNDARY_TOL: float = 1e-8
    TANGENCY_TOL: float = 1e-8
    CONVEXITY_TOL: float = 1e-10
    CMC_TOL: float = 1e-8

    # Spectral solver
    DEFAULT_MESH_LEVELS: list[int] = [8, 16, 32]
    EIGEN_MAX_ITER: int = 500
    EIGEN_TOL: float = 1e-12
    EIGEN_SHIFT: float = -0.01
    EIGEN_BLOCK_SIZE: int = 4

    # Flow expansion check
    FLOW_T_STEP: float = 1e-3

    # Randomized node samples
    NODE_SAMPLE_SIZE: int = 200
    DEFAULT_SEED: int = 0


settings = Settings()
