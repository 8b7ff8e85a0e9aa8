"""
Dense small-dimension matrix algebra.

Exponentials and logarithms, determinants restricted to the range of an
idempotent, idempotent calculus and positive-semidefiniteness margins. All
functions are pure; inputs are never modified.
"""

from typing import Optional

import numpy as np
import scipy.linalg

from osdmix.core.models.linear import Idempotent, Mat
from osdmix.utils.errors import (
    DomainError,
    LinalgError,
    MagnitudeError,
    PreconditionError,
    SpectrumError,
    SubspaceError,
)
from osdmix.utils.logging import get_logger

logger = get_logger(__name__)

DEFAULT_TOL = 1e-8
PIVOT_TOL = 1e-10

# Taylor series is summed on X / 2**s with ||X / 2**s||_1 <= _TAYLOR_RADIUS.
_TAYLOR_RADIUS = 0.5
_TAYLOR_MAX_TERMS = 40
_EPS = np.finfo(np.float64).eps


def as_mat(A: object, name: str = "matrix") -> Mat:
    """Validate and return A as a finite square float64 matrix."""
    arr = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise DomainError(f"{name} must be a non-empty square matrix", details={"shape": arr.shape})
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def op_norm(A: Mat) -> float:
    """Operator 2-norm (largest singular value)."""
    return float(np.linalg.norm(A, 2))


def eigenvalues(A: Mat) -> np.ndarray:
    """Eigenvalues from the real Schur form (LAPACK Hessenberg-QR)."""
    return scipy.linalg.eigvals(as_mat(A))


def spectral_radius(A: Mat) -> float:
    return float(np.max(np.abs(eigenvalues(A))))


def spectral_margin(Q: Mat) -> float:
    """min Re(lambda) over the eigenvalues of Q."""
    return float(np.min(eigenvalues(Q).real))


def mat_exp(A: Mat, t: float = 1.0) -> Mat:
    """
    e^{tA} by scaling and squaring with a truncated Taylor series.

    Raises:
        MagnitudeError: if the result overflows to non-finite entries.
    """
    A = as_mat(A)
    t = float(t)
    if not np.isfinite(t):
        raise DomainError("exponent scale t must be finite", details={"t": t})
    X = t * A
    d = X.shape[0]
    norm = float(np.linalg.norm(X, 1))
    if norm == 0.0:
        return np.eye(d)

    squarings = max(0, int(np.ceil(np.log2(norm / _TAYLOR_RADIUS))))
    Y = X / (2.0**squarings)

    result = np.eye(d)
    term = np.eye(d)
    for k in range(1, _TAYLOR_MAX_TERMS + 1):
        term = term @ Y / k
        result = result + term
        if np.linalg.norm(term, 1) <= _EPS * np.linalg.norm(result, 1):
            break

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(squarings):
            result = result @ result

    if not np.all(np.isfinite(result)):
        raise MagnitudeError(
            "matrix exponential overflowed", details={"norm_tA": norm, "squarings": squarings}
        )
    return result


def mat_log(A: Mat, tol: float = 1e-9) -> Mat:
    """
    Principal matrix logarithm L with e^L = A.

    Raises:
        SpectrumError: if A is singular or has an eigenvalue on the closed
            negative real axis.
    """
    A = as_mat(A)
    eig = eigenvalues(A)
    scale = max(1.0, float(np.max(np.abs(eig))))
    on_axis = (np.abs(eig.imag) <= 1e-10 * scale) & (eig.real <= 0.0)
    if np.any(np.abs(eig) <= 1e-12 * scale) or np.any(on_axis):
        raise SpectrumError(
            "log not principal-branch computable",
            details={"eigenvalues": np.round(eig, 12).tolist()},
        )

    L = scipy.linalg.logm(A)
    if np.iscomplexobj(L):
        if np.max(np.abs(L.imag)) > 1e-8 * max(1.0, float(np.max(np.abs(L.real)))):
            raise SpectrumError("principal logarithm is not real")
        L = L.real
    L = np.asarray(L, dtype=np.float64)

    residual = op_norm(mat_exp(L) - A) / max(1.0, op_norm(A))
    if residual > tol:
        logger.warning("matrix log round trip above tolerance", residual=residual, tol=tol)
    return L


def range_basis(J: Mat, pivot_tol: float = PIVOT_TOL) -> Mat:
    """Orthonormal basis of range(J) from a column-pivoted QR factorization."""
    q, r, _ = scipy.linalg.qr(as_mat(J), pivoting=True)
    rank = int(np.sum(np.abs(np.diag(r)) > pivot_tol))
    return q[:, :rank]


def det_sub(J: Idempotent, A: Mat) -> float:
    """
    Determinant of J A restricted to range(J).

    With B an orthonormal basis of range(J), solves B C = J A B for the r x r
    matrix C and returns det C; the value does not depend on the basis.

    Raises:
        SubspaceError: if J has rank 0.
    """
    A = as_mat(A)
    B = range_basis(J.mat)
    if B.shape[1] == 0:
        raise SubspaceError("det_J undefined on zero subspace")
    C, *_ = np.linalg.lstsq(B, J.mat @ A @ B, rcond=None)
    return float(np.linalg.det(C))


def is_idempotent(A: Mat, tol: float = DEFAULT_TOL) -> bool:
    A = as_mat(A)
    return op_norm(A @ A - A) <= tol


def make_idempotent(A: Mat, tol: float = DEFAULT_TOL) -> Idempotent:
    """
    Wrap A as an Idempotent, computing its rank from its spectrum.

    Raises:
        PreconditionError: if ||A A - A|| > tol.
    """
    A = as_mat(A)
    defect = op_norm(A @ A - A)
    if defect > tol:
        raise PreconditionError("matrix is not idempotent", details={"defect": defect, "tol": tol})
    eig = eigenvalues(A)
    rank = int(np.sum(np.abs(eig - 1.0) <= max(tol, 1e-10)))
    return Idempotent(mat=A, rank=rank, tol=tol)


def is_under(K: Idempotent, J: Idempotent, tol: float = DEFAULT_TOL) -> bool:
    """K is under J: K != J, J K = K and K J = K."""
    return (
        op_norm(K.mat - J.mat) > tol
        and op_norm(J.mat @ K.mat - K.mat) <= tol
        and op_norm(K.mat @ J.mat - K.mat) <= tol
    )


def psd_margin(S: Mat) -> float:
    """Smallest eigenvalue of the symmetric part (S + S^T) / 2."""
    S = as_mat(S)
    return float(scipy.linalg.eigh((S + S.T) / 2.0, eigvals_only=True)[0])


def sym_sqrt(S: Mat, inverse: bool = False) -> Mat:
    """
    Symmetric square root of a symmetric positive-definite matrix, or its inverse.

    Raises:
        LinalgError: if S is not positive definite.
    """
    S = as_mat(S)
    vals, vecs = scipy.linalg.eigh((S + S.T) / 2.0)
    if vals[0] <= 0.0:
        raise LinalgError("matrix is not positive definite", details={"min_eigenvalue": vals[0]})
    power = -0.5 if inverse else 0.5
    return (vecs * vals**power) @ vecs.T


def polar_orthogonal(A: Mat) -> Mat:
    """Orthogonal factor U of the polar decomposition A = U P."""
    u, _ = scipy.linalg.polar(as_mat(A))
    return np.asarray(u)


def condition_number(A: Mat) -> float:
    return float(np.linalg.cond(as_mat(A)))


def checked_inverse(A: Mat, max_cond: float = 1e12, name: Optional[str] = None) -> Mat:
    """
    Inverse of A, refusing numerically singular input.

    Raises:
        LinalgError: if cond(A) exceeds max_cond.
    """
    cond = condition_number(A)
    if not np.isfinite(cond) or cond > max_cond:
        raise LinalgError(
            f"{name or 'matrix'} is numerically singular", details={"condition": cond}
        )
    return np.linalg.inv(A)
