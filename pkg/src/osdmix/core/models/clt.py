"""
Models for the partial-sum limit harness.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from osdmix.core.models._types import ARRAY_MODEL_CONFIG, Array


class NormalizerTrack(BaseModel):
    """Matrix normalizers A_n and centerings b_n along increasing checkpoints."""

    model_config = ARRAY_MODEL_CONFIG

    checkpoints: List[int]
    A: Dict[int, Array]
    b: Dict[int, Array]
    regularized: bool = False

    @model_validator(mode="after")
    def _check(self) -> "NormalizerTrack":
        if any(n2 <= n1 for n1, n2 in zip(self.checkpoints, self.checkpoints[1:])):
            raise ValueError("checkpoints must be strictly increasing")
        missing = [n for n in self.checkpoints if n not in self.A or n not in self.b]
        if missing:
            raise ValueError(f"normalizers missing for checkpoints {missing}")
        return self

    @property
    def dim(self) -> int:
        return int(self.A[self.checkpoints[0]].shape[0])

    def matrices(self) -> Dict[int, np.ndarray]:
        return {n: self.A[n] for n in self.checkpoints}


class DeltaSchedule(BaseModel):
    """
    Nonincreasing threshold schedule: delta_n = 1/m on [N_m, N_{m+1}).
    """

    breakpoints: List[Tuple[int, int]] = Field(
        ..., description="Pairs (N_m, m) with N_1 < N_2 < ..."
    )

    def delta(self, n: int) -> float:
        m = 1
        for start, level in self.breakpoints:
            if n >= start:
                m = level
            else:
                break
        return 1.0 / m


class NormalizerReport(BaseModel):
    """Diagnostics of a normalizer track."""

    norms: Dict[int, float]
    det_ratios: Dict[int, float] = Field(
        default_factory=dict, description="|det A_{n_k+1} / det A_{n_k}| keyed by n_k+1"
    )
    det_exponents: Dict[int, float] = Field(
        default_factory=dict, description="log-ratio of determinants per log-ratio of n"
    )
    det_ratio_per_step: Dict[int, float] = Field(default_factory=dict)
    ratio_bound: float
    prefix_ratio_bounds: Dict[int, float] = Field(default_factory=dict)
    rotation_residuals: Dict[int, float] = Field(
        default_factory=dict, description="||orthogonal polar factor of successive ratios - I||"
    )
    flags: List[str] = Field(default_factory=list)


class BlockSumReport(BaseModel):
    """Worst-case margins of the block-sum tail bound per checkpoint."""

    margins: Dict[int, float]
    worst_margin: float
    windows: int

    @property
    def holds(self) -> bool:
        return self.worst_margin <= 0.0


class CfIndependence(BaseModel):
    """Empirical CF factorization residual against the mixing-coefficient bound."""

    residual: float
    bound: float
    slack: float
    alpha: float
    split: int
    gap: int

    @property
    def within_bound(self) -> bool:
        return self.residual <= self.bound + self.slack


class LimitDistance(BaseModel):
    """Energy distance and CF sup-distance between samples and a target law."""

    energy: float
    cf_sup: float
    points: int = Field(default=0, ge=0, description="Samples entering the energy statistic")
    null_quantile: Optional[float] = None
    null_spread: Optional[float] = None

    @property
    def within_null(self) -> bool:
        return self.null_quantile is not None and self.energy <= self.null_quantile
