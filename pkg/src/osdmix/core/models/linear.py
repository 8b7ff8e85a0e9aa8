"""
Linear-algebra carrier types.
"""

import numpy as np
from pydantic import BaseModel, Field, model_validator

from osdmix.core.models._types import ARRAY_MODEL_CONFIG, Array

Mat = np.ndarray
"""A d x d float64 matrix (d >= 1) with finite entries."""


class Idempotent(BaseModel):
    """
    A projector J onto the subspace J(R^d), not necessarily orthogonal.
    """

    model_config = ARRAY_MODEL_CONFIG

    mat: Array = Field(..., description="The matrix J with J @ J == J")
    rank: int = Field(..., ge=0, description="Number of eigenvalues within tol of 1")
    tol: float = Field(default=1e-8, gt=0, description="Idempotency tolerance")

    @model_validator(mode="after")
    def _check(self) -> "Idempotent":
        m = self.mat
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError(f"idempotent must be a non-empty square matrix, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("idempotent has non-finite entries")
        if self.rank > m.shape[0]:
            raise ValueError(f"rank {self.rank} exceeds dimension {m.shape[0]}")
        # tolerance scales with ||J||^2 so oblique projectors are judged relatively
        scale = max(1.0, float(np.linalg.norm(m, 2))) ** 2
        defect = float(np.linalg.norm(m @ m - m, 2))
        if defect > self.tol * scale:
            raise ValueError(f"matrix is not idempotent: ||J J - J|| = {defect:.3g}")
        trace_rank = int(round(float(np.trace(m))))
        if trace_rank != self.rank:
            raise ValueError(f"rank {self.rank} does not match trace {trace_rank}")
        return self

    @property
    def dim(self) -> int:
        return int(self.mat.shape[0])

    def complement(self) -> "Idempotent":
        """The complementary projector I - J."""
        return Idempotent(
            mat=np.eye(self.dim) - self.mat, rank=self.dim - self.rank, tol=self.tol
        )
