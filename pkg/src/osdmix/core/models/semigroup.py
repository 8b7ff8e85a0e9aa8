"""
Result types of the decomposability-semigroup machinery.
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from osdmix.core.models._types import ARRAY_MODEL_CONFIG, Array
from osdmix.core.models.linear import Idempotent


class MembershipResult(BaseModel):
    """
    Outcome of testing A against the decomposability semigroup D(law).

    For a member, N(residual_mean, residual_cov) is the law of the independent
    residual Y in X = A X + Y.
    """

    model_config = ARRAY_MODEL_CONFIG

    member: bool
    margin: float = Field(..., description="Smallest eigenvalue of the residual covariance")
    residual_mean: Array
    residual_cov: Array


class KernelResult(BaseModel):
    """Unit of the kernel group of the closed semigroup generated by one matrix."""

    model_config = ARRAY_MODEL_CONFIG

    unit: Idempotent
    converged: bool
    iterations: int = Field(..., ge=0)
    tail_power: Array = Field(..., description="Last computed power T^k")


class GeneratorCertificate(BaseModel):
    """
    A recovered generator Q with the evidence that exp(-tQ) lies in D(law)
    and decays to zero.
    """

    model_config = ARRAY_MODEL_CONFIG

    Q: Array
    spectral_margin: float = Field(..., description="min Re(lambda) over eigenvalues of Q")
    membership_margins: Dict[float, float] = Field(default_factory=dict)
    consistency_residual: float = Field(..., description="max_w ||exp(-wQ) - C_w||")
    consistency_threshold: float = 0.05
    w_values: List[str] = Field(default_factory=list, description="Sampled w as fractions")
    decay_horizon: Optional[float] = Field(default=None, description="T = 20 / spectral_margin")
    decay_norm: Optional[float] = Field(default=None, description="||exp(-T Q)||")
    inverse_integral_residual: Optional[float] = Field(
        default=None, description="||int_0^inf exp(-sQ) ds - Q^-1||"
    )

    @property
    def consistency_flagged(self) -> bool:
        return self.consistency_residual > self.consistency_threshold

    def certified(self, margin_tol: float = 1e-6) -> bool:
        """spectral_margin > 0 and every membership margin >= -margin_tol."""
        return self.spectral_margin > 0.0 and all(
            m >= -margin_tol for m in self.membership_margins.values()
        )
