"""Configuration management for the sparsity-diversity bounds toolkit."""

from typing import Literal
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Numerical and runtime settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="SPARSITY_",
        extra="ignore"
    )

    # Application Configuration
    app_name: str = Field("sparsity-diversity-bounds", description="Application name")
    app_version: str = Field("1.0.0", description="Application version")
    log_level: str = Field("INFO", description="Logging level")
    log_json: bool = Field(False, description="Render log events as JSON lines")

    # Execution
    workers: int = Field(1, ge=1, description="Parallel workers for curve points and trials")
    joblib_backend: str = Field("loky", description="joblib backend used when workers > 1")

    # Special functions
    quantile_tol: float = Field(1e-10, gt=0, description="Absolute tolerance of chi-square/normal quantiles")
    gamma_series_max_iter: int = Field(1000, ge=10, description="Iteration cap of the incomplete gamma expansions")
    gauss_hermite_order: int = Field(61, ge=2, description="Default Gauss-Hermite order")
    simpson_rtol: float = Field(1e-9, gt=0, description="Relative tolerance of adaptive Simpson")
    simpson_max_depth: int = Field(50, ge=5, description="Maximum bisection depth of adaptive Simpson")
    split_rtol: float = Field(1e-10, gt=0, description="Relative tolerance of composite Gauss-Legendre")

    # Bounds
    beta_grid_points: int = Field(2001, ge=11, description="Uniform beta grid size of the achievability and converse searches")
    golden_tol: float = Field(1e-6, gt=0, description="Golden-section tolerance on beta")
    rho_bisection_iterations: int = Field(60, ge=10, description="Bisection steps on the sampling rate")
    e2_denominator: Literal["corrected", "as_printed"] = Field(
        "corrected", description="Form of the E2 denominator in the nearest-subspace bound"
    )
    max_rate_per_vector: float = Field(1e6, gt=0, description="Largest J*r examined by two-stage searches")
    rate_bisection_iterations: int = Field(60, ge=10, description="Bisection steps for two-stage rates")

    # Scalar channels
    se_damping: float = Field(0.5, gt=0, le=1, description="State-evolution damping")
    se_rtol: float = Field(1e-9, gt=0, description="State-evolution relative convergence tolerance")
    se_max_iter: int = Field(10_000, ge=10, description="State-evolution iteration cap")
    mmse_grid_points: int = Field(400, ge=10, description="Logarithmic sigma^2 grid for the replica objective")
    mmse_rtol: float = Field(1e-8, gt=0, description="Relative tolerance of the replica minimizer")
    lambda_grid_points: int = Field(50, ge=5, description="Lambda sweep size for two-stage LASSO")

    # Simulator
    ns_max_subsets: int = Field(1_000_000, ge=1, description="Largest exhaustive nearest-subspace search")
    cd_tol: float = Field(1e-8, gt=0, description="Coordinate-descent coordinate change tolerance")
    cd_max_sweeps: int = Field(100_000, ge=1, description="Coordinate-descent sweep cap")
    amp_tol: float = Field(1e-8, gt=0, description="AMP estimate change tolerance")
    amp_max_iter: int = Field(500, ge=1, description="AMP iteration cap")
    amp_divergence_norm: float = Field(1e6, gt=0, description="AMP estimate norm treated as divergence")

    # Output
    csv_float_format: str = Field("%.12g", description="printf format of CSV numbers")


# Global settings instance
settings = Settings()
