"""
Probability laws: full Gaussian laws, jump laws and Lévy triplets.
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from osdmix.core.models._types import ARRAY_MODEL_CONFIG, Array

SYMMETRY_TOL = 1e-12


class GaussianLaw(BaseModel):
    """
    A full Gaussian law N(mean, cov) on R^d.

    The covariance must be symmetric and positive definite; a full law is one
    whose support spans no proper hyperplane.
    """

    model_config = ARRAY_MODEL_CONFIG

    mean: Array = Field(..., description="Mean vector in R^d")
    cov: Array = Field(..., description="Symmetric positive-definite covariance")

    @model_validator(mode="after")
    def _check(self) -> "GaussianLaw":
        mean, cov = self.mean, self.cov
        if mean.ndim != 1 or cov.shape != (mean.shape[0], mean.shape[0]) or mean.shape[0] < 1:
            raise ValueError(f"shape mismatch: mean {mean.shape}, cov {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("law parameters must be finite")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * scale:
            raise ValueError("covariance is not symmetric")
        if np.min(np.linalg.eigvalsh((cov + cov.T) / 2.0)) <= 0.0:
            raise ValueError("covariance is not positive definite; law is not full")
        return self

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @classmethod
    def standard(cls, dim: int) -> "GaussianLaw":
        """N(0, I_d)."""
        return cls(mean=np.zeros(dim), cov=np.eye(dim))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` vectors as a (size, d) array."""
        chol = np.linalg.cholesky(self.cov)
        return self.mean + rng.standard_normal((size, self.dim)) @ chol.T

    def cf(self, z: np.ndarray) -> np.ndarray:
        """Characteristic function exp(i<z, m> - <z, cov z>/2) at the rows of z."""
        z = np.atleast_2d(z)
        quad = np.einsum("ki,ij,kj->k", z, self.cov, z)
        return np.exp(1j * (z @ self.mean) - 0.5 * quad)


class JumpLaw(BaseModel):
    """
    Gaussian jump-size law N(mean, cov); cov may be singular (point masses allowed).
    """

    model_config = ARRAY_MODEL_CONFIG

    mean: Array
    cov: Array

    @model_validator(mode="after")
    def _check(self) -> "JumpLaw":
        if self.mean.ndim != 1 or self.cov.shape != (self.mean.shape[0],) * 2:
            raise ValueError(f"shape mismatch: mean {self.mean.shape}, cov {self.cov.shape}")
        if np.min(np.linalg.eigvalsh((self.cov + self.cov.T) / 2.0)) < -1e-12:
            raise ValueError("jump covariance must be positive semidefinite")
        return self

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        d = self.mean.shape[0]
        vals, vecs = np.linalg.eigh((self.cov + self.cov.T) / 2.0)
        root = vecs * np.sqrt(np.clip(vals, 0.0, None))
        return self.mean + rng.standard_normal((size, d)) @ root.T

    def second_moment(self) -> np.ndarray:
        """E[J J^T]."""
        return self.cov + np.outer(self.mean, self.mean)


class LevySpec(BaseModel):
    """
    Lévy triplet of a background driving process: drift b, diffusion D and a
    compound-Poisson part with rate lambda and jump law.
    """

    model_config = ARRAY_MODEL_CONFIG

    drift: Array
    diffusion: Array
    jump_rate: float = Field(default=0.0, ge=0.0)
    jump_law: Optional[JumpLaw] = None

    @model_validator(mode="after")
    def _check(self) -> "LevySpec":
        d = self.drift.shape[0]
        if self.drift.ndim != 1 or self.diffusion.shape != (d, d):
            raise ValueError(f"shape mismatch: drift {self.drift.shape}, D {self.diffusion.shape}")
        if np.max(np.abs(self.diffusion - self.diffusion.T), initial=0.0) > 1e-10:
            raise ValueError("diffusion matrix must be symmetric")
        if np.min(np.linalg.eigvalsh(self.diffusion)) < -1e-12:
            raise ValueError("diffusion matrix must be positive semidefinite")
        if self.jump_rate > 0.0:
            if self.jump_law is None:
                raise ValueError("jump_rate > 0 requires a jump_law")
            if self.jump_law.mean.shape[0] != d:
                raise ValueError("jump law dimension differs from drift dimension")
        return self

    @property
    def dim(self) -> int:
        return int(self.drift.shape[0])


class OsdSampler(BaseModel):
    """
    Sampler state for the random integral of exp(-tQ) against a Lévy process.

    Built through `osdmix.core.bdlp.make_sampler`, which enforces the horizon
    invariant ||exp(-T Q)|| <= 1e-6.
    """

    model_config = ARRAY_MODEL_CONFIG

    Q: Array
    levy: LevySpec
    step: float = Field(default=1.0 / 64.0, gt=0.0)
    horizon: float = Field(..., gt=0.0)
    jump_grid: int = Field(default=8, ge=1, description="Left-point subdivisions for jump times")
    block_size: int = Field(default=4096, ge=1, description="Draws per derived random stream")

    @property
    def dim(self) -> int:
        return int(self.Q.shape[0])

    @property
    def steps(self) -> int:
        return int(np.ceil(self.horizon / self.step - 1e-9))
