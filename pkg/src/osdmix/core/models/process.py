"""
Models for strongly mixing process specifications and simulated path batches.
"""

from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from osdmix.core.models._types import ARRAY_MODEL_CONFIG, Array
from osdmix.core.models.laws import GaussianLaw


class ProcessVariant(str, Enum):
    """Generator family of a strongly mixing sequence."""

    IID = "iid"
    MA = "ma"
    AR1 = "ar1"


class ProcessSpec(BaseModel):
    """
    Parameters of an R^d-valued strongly mixing sequence.

    - IID: X_t = eps_t
    - MA:  X_t = sum_{k=0..m} Theta_k eps_{t-k}
    - AR1: X_{t+1} = B X_t + eps_{t+1}, started in its stationary law
    """

    model_config = ARRAY_MODEL_CONFIG

    variant: ProcessVariant
    innovation: GaussianLaw
    theta: Optional[List[Array]] = Field(default=None, description="MA coefficients Theta_0..Theta_m")
    b: Optional[Array] = Field(default=None, description="AR1 coefficient matrix")

    @model_validator(mode="after")
    def _check(self) -> "ProcessSpec":
        d = self.dim
        if self.variant is ProcessVariant.MA:
            if not self.theta:
                raise ValueError("MA process needs at least Theta_0")
            for k, mat in enumerate(self.theta):
                if mat.shape != (d, d):
                    raise ValueError(f"Theta_{k} has shape {mat.shape}, expected {(d, d)}")
        if self.variant is ProcessVariant.AR1:
            if self.b is None or self.b.shape != (d, d):
                raise ValueError(f"AR1 process needs a {d}x{d} coefficient matrix")
        return self

    @property
    def dim(self) -> int:
        return self.innovation.dim

    @property
    def order(self) -> int:
        """MA order m (0 for IID and AR1)."""
        if self.variant is ProcessVariant.MA and self.theta:
            return len(self.theta) - 1
        return 0


class PathBatch(BaseModel):
    """
    R independent replicated paths of length n in R^d.

    `data[r, t]` is X_{t+1} of replica `first_replica + r`; regeneration from
    (spec, length, replicas, seed) reproduces the data bit for bit.
    """

    model_config = ARRAY_MODEL_CONFIG

    data: Array
    seed: int = Field(..., ge=0, lt=2**64)
    spec: ProcessSpec
    first_replica: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "PathBatch":
        if self.data.ndim != 3 or self.data.shape[2] != self.spec.dim:
            raise ValueError(f"data shape {self.data.shape} inconsistent with d={self.spec.dim}")
        return self

    @property
    def replicas(self) -> int:
        return int(self.data.shape[0])

    @property
    def length(self) -> int:
        return int(self.data.shape[1])

    @property
    def dim(self) -> int:
        return int(self.data.shape[2])
