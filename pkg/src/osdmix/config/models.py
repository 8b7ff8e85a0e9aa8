"""Pydantic models for osdmix configuration."""

from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from osdmix.core.models import GaussianLaw, JumpLaw, LevySpec, ProcessSpec, ProcessVariant

Matrix = List[List[float]]
Vector = List[float]

# Fields that choose where and how fast a run executes; they never change results.
EXECUTION_FIELDS = ("workers", "out_path")


class LoggingSettings(BaseModel):
    """Logging configuration settings."""

    level: str = Field(default="INFO", description="The logging level")
    output_file: Optional[str] = Field(
        default=None, description="Log file path (if None, logs to stderr only)"
    )
    json_output: bool = Field(default=False, description="Whether to output logs in JSON format")


class ExecutionSettings(BaseModel):
    """Execution resources; they never change results."""

    workers: int = Field(default=1, ge=1, description="Worker threads for replica loops")
    chunk_size: int = Field(default=256, ge=1, description="Replicas per streamed chunk")


class Settings(BaseSettings):
    """
    Ambient application settings.

    Read from environment variables prefixed with OSDMIX_, nested fields
    separated by a double underscore (OSDMIX_LOGGING__LEVEL=DEBUG).
    """

    model_config = SettingsConfigDict(env_prefix="OSDMIX_", env_nested_delimiter="__")

    logging: LoggingSettings = Field(default_factory=LoggingSettings)
    execution: ExecutionSettings = Field(default_factory=ExecutionSettings)
    output_dir: str = Field(default="results", description="Default experiment output directory")


class Experiment(str, Enum):
    SIMULATE_MIXING = "simulate-mixing"
    ESTIMATE_ALPHA = "estimate-alpha"
    CLT_RUN = "clt-run"
    OSD_SAMPLE = "osd-sample"
    EXTRACT_Q = "extract-q"
    VERIFY = "verify"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProcessConfig(_Section):
    """Strongly mixing process; unset matrices take dimension-dependent defaults."""

    variant: ProcessVariant = ProcessVariant.AR1
    length: int = Field(default=256, ge=1, description="Path length for simulate-mixing")
    b: Optional[Matrix] = Field(default=None, description="AR1 coefficient matrix")
    order: int = Field(default=1, ge=0, description="MA order when theta is unset (Theta_k = I)")
    theta: Optional[List[Matrix]] = Field(default=None, description="MA coefficients")
    innovation_mean: Optional[Vector] = None
    innovation_cov: Optional[Matrix] = None


class LevyConfig(_Section):
    """Lévy driver for osd-sample; defaults to a standard Brownian driver."""

    drift: Optional[Vector] = None
    diffusion: Optional[Matrix] = None
    jump_rate: float = Field(default=0.0, ge=0.0)
    jump_mean: Optional[Vector] = None
    jump_cov: Optional[Matrix] = None


class CltConfig(_Section):
    checkpoints: List[int] = Field(default_factory=lambda: [2**k for k in range(8, 15)])
    eps_grid: List[float] = Field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125])
    regularize: bool = True
    windows: int = Field(default=16, ge=1)
    shuffles: int = Field(default=200, ge=0)
    max_points: int = Field(default=1000, ge=100)
    gaps: List[int] = Field(default_factory=lambda: [1, 4, 16])
    cf_replicas: int = Field(default=20000, ge=100, description="Replicas for the CF residual batch")
    ratio_limit: float = Field(default=2.0, gt=0.0)
    infinitesimality_eps: float = Field(default=0.25, gt=0.0)
    infinitesimality_target: float = Field(default=0.01, ge=0.0)

    @field_validator("checkpoints")
    @classmethod
    def _increasing(cls, value: List[int]) -> List[int]:
        if not value or any(b <= a for a, b in zip(value, value[1:])) or value[0] < 1:
            raise ValueError("checkpoints must be positive and strictly increasing")
        return value


class AlphaConfig(_Section):
    lags: List[int] = Field(default_factory=lambda: [1, 2, 4, 8])
    length: int = Field(default=32, ge=2, description="Path length for estimate-alpha")
    directions: int = Field(default=8, ge=1)
    thresholds: int = Field(default=7, ge=1)
    positions: int = Field(default=3, ge=1)
    tolerance: float = Field(default=0.01, ge=0.0, description="Bound for independent lags")


class GeneratorConfig(_Section):
    c_values: List[float] = Field(default_factory=lambda: [0.9, 0.8, 0.7])
    w_values: List[str] = Field(default_factory=lambda: ["1/4", "1/2", "1", "2"])
    t_grid: List[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 4.0])
    base_exponent: int = Field(default=12, ge=1, description="Dense grid starts at n0 = 2**base_exponent")
    grid_factor: float = Field(default=2.1, gt=1.0)
    grid_divisor: int = Field(default=256, ge=1, description="Grid step is n0 / grid_divisor")
    consistency_threshold: float = Field(default=0.05, gt=0.0)
    margin_tol: float = Field(default=1e-6, ge=0.0)
    normalizers: Optional[str] = Field(default=None, description="normalizers.json to reuse")

    @field_validator("c_values")
    @classmethod
    def _unit_interval(cls, value: List[float]) -> List[float]:
        if not value or any(not 0.0 < c < 1.0 for c in value):
            raise ValueError("c values must lie in (0, 1)")
        return value

    @field_validator("w_values")
    @classmethod
    def _rationals(cls, value: List[str]) -> List[str]:
        try:
            parsed = [Fraction(str(w)) for w in value]
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"w values must be rationals: {e}") from e
        if sum(1 for w in parsed if w > 0) < 2 or any(w < 0 for w in parsed):
            raise ValueError("need at least two positive w values and none negative")
        return [str(w) for w in value]

    def fractions(self) -> List[Fraction]:
        return [Fraction(w) for w in self.w_values]


class OsdConfig(_Section):
    generator: Optional[Matrix] = Field(default=None, description="Q; identity when unset")
    samples: int = Field(default=20000, ge=1)
    step: float = Field(default=1.0 / 64.0, gt=0.0)
    jump_grid: int = Field(default=8, ge=1)
    block_size: int = Field(default=4096, ge=1)
    t: float = Field(default=1.0, gt=0.0)
    control_scale: float = Field(default=0.1, gt=0.0, description="Corrupted generator factor")
    residual_threshold: float = Field(default=0.05, gt=0.0)
    control_threshold: float = Field(default=0.15, gt=0.0)


class VerifyConfig(_Section):
    q_file: Optional[str] = None
    t: float = Field(default=1.0, gt=0.0)
    driver: Literal["lyapunov", "levy"] = "lyapunov"
    samples: int = Field(default=20000, ge=1)
    samples_file: Optional[str] = Field(default=None, description="OSDB or CSV samples to test")
    t_grid: List[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 4.0])


class RunConfig(_Section):
    """One experiment invocation: common options and per-experiment sections."""

    experiment: Experiment = Experiment.CLT_RUN
    seed: int = Field(default=7, ge=0, lt=2**64)
    dim: int = Field(default=2, ge=1, le=10)
    replicas: int = Field(default=20000, ge=1)
    out_path: str = "results"
    out_format: Literal["csv", "json"] = Field(
        default="csv", description="csv, or json (alias binary) for the OSDB dump"
    )
    workers: int = Field(default=1, ge=1)

    process: ProcessConfig = Field(default_factory=ProcessConfig)
    levy: LevyConfig = Field(default_factory=LevyConfig)
    clt: CltConfig = Field(default_factory=CltConfig)
    alpha: AlphaConfig = Field(default_factory=AlphaConfig)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    osd: OsdConfig = Field(default_factory=OsdConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)

    @field_validator("out_format", mode="before")
    @classmethod
    def _binary_alias(cls, value: object) -> object:
        return "json" if value == "binary" else value

    @model_validator(mode="after")
    def _check_shapes(self) -> "RunConfig":
        d = self.dim
        square = {
            "process.b": self.process.b,
            "process.innovation_cov": self.process.innovation_cov,
            "levy.diffusion": self.levy.diffusion,
            "levy.jump_cov": self.levy.jump_cov,
            "osd.generator": self.osd.generator,
        }
        for name, value in square.items():
            if value is not None and np.asarray(value, dtype=float).shape != (d, d):
                raise ValueError(f"{name} must be a {d}x{d} matrix")
        vectors = {
            "process.innovation_mean": self.process.innovation_mean,
            "levy.drift": self.levy.drift,
            "levy.jump_mean": self.levy.jump_mean,
        }
        for name, value in vectors.items():
            if value is not None and len(value) != d:
                raise ValueError(f"{name} must have {d} entries")
        for k, mat in enumerate(self.process.theta or []):
            if np.asarray(mat, dtype=float).shape != (d, d):
                raise ValueError(f"process.theta[{k}] must be a {d}x{d} matrix")
        return self

    def report_echo(self) -> Dict[str, Any]:
        """The configuration as embedded in report.json, without execution-only fields."""
        return self.model_dump(mode="json", exclude=set(EXECUTION_FIELDS))

    def innovation_law(self) -> GaussianLaw:
        mean = np.zeros(self.dim) if self.process.innovation_mean is None else self.process.innovation_mean
        cov = np.eye(self.dim) if self.process.innovation_cov is None else self.process.innovation_cov
        return GaussianLaw(mean=mean, cov=cov)

    def process_spec(self) -> ProcessSpec:
        """The configured process with dimension-dependent defaults filled in."""
        from osdmix.core.mixing import default_ar1_matrix

        variant = self.process.variant
        law = self.innovation_law()
        if variant is ProcessVariant.IID:
            return ProcessSpec(variant=variant, innovation=law)
        if variant is ProcessVariant.MA:
            theta = self.process.theta
            if theta is None:
                theta = [np.eye(self.dim)] * (self.process.order + 1)
            return ProcessSpec(variant=variant, innovation=law, theta=theta)
        b = default_ar1_matrix(self.dim) if self.process.b is None else self.process.b
        return ProcessSpec(variant=variant, innovation=law, b=b)

    def levy_spec(self) -> LevySpec:
        d = self.dim
        levy = self.levy
        jump_law = None
        if levy.jump_rate > 0.0:
            jump_law = JumpLaw(
                mean=np.zeros(d) if levy.jump_mean is None else levy.jump_mean,
                cov=np.eye(d) if levy.jump_cov is None else levy.jump_cov,
            )
        return LevySpec(
            drift=np.zeros(d) if levy.drift is None else levy.drift,
            diffusion=np.eye(d) if levy.diffusion is None else levy.diffusion,
            jump_rate=levy.jump_rate,
            jump_law=jump_law,
        )

    def osd_generator(self) -> np.ndarray:
        if self.osd.generator is None:
            return np.eye(self.dim)
        return np.asarray(self.osd.generator, dtype=np.float64)
