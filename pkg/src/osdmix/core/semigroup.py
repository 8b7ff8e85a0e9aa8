"""
Decomposability-semigroup machinery for full Gaussian laws.

Membership oracles for D(law) and A(law), the unit of the kernel group of a
monothetic matrix semigroup, and the constructive chain that turns a track of
matrix normalizers into a one-parameter semigroup exp(-tQ) inside D(law):
K_c extraction, idempotent approach, primitive decomposition, C_w
construction and generator recovery.
"""

import math
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.integrate import quad_vec

from osdmix.core import linalg
from osdmix.core.models import (
    GaussianLaw,
    GeneratorCertificate,
    Idempotent,
    KernelResult,
    Mat,
    MembershipResult,
)
from osdmix.utils.errors import (
    DegenerateSampleError,
    DomainError,
    HorizonError,
    LinalgError,
    NotCompactError,
    PreconditionError,
    SubspaceError,
)
from osdmix.utils.logging import get_logger

logger = get_logger(__name__)

Rational = Union[Fraction, int, float, str]
NormalizerSeq = Union[Mapping[int, Mat], Sequence[Mat]]

DEFAULT_T_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
CONSISTENCY_THRESHOLD = 0.05
DECAY_FACTOR = 20.0


def _check_dims(law: GaussianLaw, A: Mat) -> Mat:
    A = linalg.as_mat(A)
    if A.shape[0] != law.dim:
        raise DomainError(
            "matrix and law dimensions differ", details={"matrix": A.shape[0], "law": law.dim}
        )
    return A


# ---------------------------------------------------------------------------
# Membership oracles
# ---------------------------------------------------------------------------


def gaussian_membership(law: GaussianLaw, A: Mat, tol: float = linalg.DEFAULT_TOL) -> MembershipResult:
    """
    Test A against the decomposability semigroup of a Gaussian law.

    X = A X + Y with Y independent of X is solvable within Gaussian laws iff
    cov - A cov A^T is positive semidefinite; Y then has mean (I - A) mean.
    """
    A = _check_dims(law, A)
    residual_cov = law.cov - A @ law.cov @ A.T
    residual_cov = (residual_cov + residual_cov.T) / 2.0
    margin = linalg.psd_margin(residual_cov)
    return MembershipResult(
        member=margin >= -tol,
        margin=margin,
        residual_mean=(np.eye(law.dim) - A) @ law.mean,
        residual_cov=residual_cov,
    )


def symmetry_membership(law: GaussianLaw, A: Mat, tol: float = linalg.DEFAULT_TOL) -> bool:
    """A lies in the symmetry group of the law iff it preserves the covariance."""
    A = _check_dims(law, A)
    return linalg.op_norm(law.cov - A @ law.cov @ A.T) <= tol


def largest_group_check(
    law: GaussianLaw, A: Mat, tol: float = linalg.DEFAULT_TOL
) -> Tuple[float, float]:
    """
    Membership margins of A and A^-1 in D(law) for a symmetry A.

    Raises:
        PreconditionError: if A is not in the symmetry group of the law.
    """
    A = _check_dims(law, A)
    if not symmetry_membership(law, A, tol):
        raise PreconditionError("matrix is not a symmetry of the law")
    inverse = linalg.checked_inverse(A, name="symmetry")
    return (
        gaussian_membership(law, A, tol).margin,
        gaussian_membership(law, inverse, tol).margin,
    )


def member_norm_bound(law: GaussianLaw) -> float:
    """Upper bound lambda_max(cov) / lambda_min(cov) on ||A||^2 over members A of D(law)."""
    vals = scipy.linalg.eigh(law.cov, eigvals_only=True)
    return float(vals[-1] / vals[0])


def is_full(law: GaussianLaw) -> bool:
    return linalg.psd_margin(law.cov) > 0.0


def whiten(law: GaussianLaw) -> Tuple[Mat, Mat]:
    """The symmetric pair (cov^{1/2}, cov^{-1/2})."""
    return linalg.sym_sqrt(law.cov), linalg.sym_sqrt(law.cov, inverse=True)


def check_idempotent_factorization(
    law: GaussianLaw,
    J: Idempotent,
    tol: float = linalg.DEFAULT_TOL,
    under: Optional[Idempotent] = None,
) -> bool:
    """
    Covariance-level factorization law = J law * (I - J) law.

    With `under` = K below J, checks the three-way split along
    K + (J - K) + (I - J) = I instead.

    Raises:
        PreconditionError: if `under` is given but is not under J.
    """
    cov = law.cov
    eye = np.eye(law.dim)
    if under is None:
        parts = [J.mat, eye - J.mat]
    else:
        if not linalg.is_under(under, J, tol):
            raise PreconditionError("idempotent K is not under J")
        parts = [under.mat, J.mat - under.mat, eye - J.mat]
    recombined = sum(P @ cov @ P.T for P in parts)
    return linalg.op_norm(cov - recombined) <= tol


# ---------------------------------------------------------------------------
# Kernel group of a monothetic semigroup
# ---------------------------------------------------------------------------


def _unimodular_projector(T: Mat, tol: float) -> Tuple[Mat, int]:
    d = T.shape[0]

    def on_circle(re: float, im: float) -> bool:
        return abs(math.hypot(re, im) - 1.0) <= tol

    def off_circle(re: float, im: float) -> bool:
        return not on_circle(re, im)

    _, Z1, s1 = scipy.linalg.schur(T, output="real", sort=on_circle)
    if s1 == 0:
        return np.zeros((d, d)), 0

    restricted = Z1[:, :s1].T @ T @ Z1[:, :s1]
    _, vecs = np.linalg.eig(restricted)
    if np.linalg.cond(vecs) > 1e8:
        raise NotCompactError(
            "not conditionally compact", details={"reason": "defective unimodular eigenvalue"}
        )
    if s1 == d:
        return np.eye(d), d

    _, Z2, s2 = scipy.linalg.schur(T, output="real", sort=off_circle)
    basis = np.hstack([Z1[:, :s1], Z2[:, :s2]])
    selector = np.diag([1.0] * s1 + [0.0] * s2)
    return basis @ selector @ linalg.checked_inverse(basis, name="invariant basis"), s1


def numakura_kernel(
    T: Mat,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    power_bound: float = 1e6,
) -> KernelResult:
    """
    Unit L of the kernel group of the closed semigroup generated by T.

    L projects onto the invariant subspace of the unimodular eigenvalues along
    the complementary invariant subspace. Powers of T are iterated until the
    contracting part falls below tol.

    Raises:
        NotCompactError: if the powers of T are unbounded.
    """
    T = linalg.as_mat(T, "T")
    radius = linalg.spectral_radius(T)
    if radius > 1.0 + tol:
        raise NotCompactError("not conditionally compact", details={"spectral_radius": radius})

    L, rank = _unimodular_projector(T, tol)
    complement = np.eye(T.shape[0]) - L

    power = T.copy()
    converged = False
    iterations = 0
    for k in range(1, max_iter + 1):
        iterations = k
        norm = linalg.op_norm(power)
        if norm > power_bound:
            raise NotCompactError(
                "not conditionally compact", details={"iteration": k, "power_norm": norm}
            )
        if linalg.op_norm(complement @ power) <= tol:
            converged = True
            break
        power = power @ T

    logger.debug("kernel iteration finished", iterations=iterations, converged=converged, rank=rank)
    unit = Idempotent(mat=L, rank=rank, tol=max(tol, linalg.DEFAULT_TOL))
    return KernelResult(unit=unit, converged=converged, iterations=iterations, tail_power=power)


# ---------------------------------------------------------------------------
# K_c extraction from normalizers
# ---------------------------------------------------------------------------


def _as_track(normalizers: NormalizerSeq) -> Dict[int, Mat]:
    if isinstance(normalizers, Mapping):
        items = {int(n): np.asarray(A, dtype=np.float64) for n, A in normalizers.items()}
    else:
        items = {k + 1: np.asarray(A, dtype=np.float64) for k, A in enumerate(normalizers)}
    if not items:
        raise HorizonError("insufficient normalizer horizon", details={"available": 0})
    return dict(sorted(items.items()))


def _det_sub_many(J: Idempotent, mats: np.ndarray) -> np.ndarray:
    """det_sub(J, M) for a stack of matrices, sharing one range basis."""
    B = linalg.range_basis(J.mat)
    if B.shape[1] == 0:
        raise SubspaceError("det_J undefined on zero subspace")
    restricted = np.einsum("ia,ij,kjl,lb->kab", B, J.mat, mats, B)
    return np.linalg.det(restricted)


def _ratios(track: Dict[int, Mat], n: int) -> Tuple[List[int], np.ndarray]:
    try:
        inv_n = linalg.checked_inverse(track[n], name=f"A_{n}")
    except LinalgError as e:
        raise DegenerateSampleError("normalizer is singular", details={"n": n}) from e
    ms = [m for m in track if m >= n]
    stack = np.stack([track[m] for m in ms]) @ inv_n
    return ms, stack


def kc_crossing(
    normalizers: NormalizerSeq, J: Idempotent, c: float, n: int
) -> Tuple[int, float, Mat]:
    """
    The crossing index m_n and the value b_{m_n, n} with the matrix A_{m_n} A_n^-1.

    Raises:
        DomainError: if c is not in (0, 1) or n is not an available index.
        HorizonError: if b_{m, n} never drops below c within the track.
    """
    if not 0.0 < c < 1.0:
        raise DomainError("c must lie in (0, 1)", details={"c": c})
    track = _as_track(normalizers)
    if n not in track:
        raise DomainError("base index not in normalizer track", details={"n": n})
    ms, ratios = _ratios(track, n)
    b = _det_sub_many(J, ratios)
    above = np.nonzero(b >= c)[0]
    last = int(above[-1])
    if last == len(ms) - 1:
        raise HorizonError(
            "insufficient normalizer horizon",
            details={"n": n, "c": c, "last_index": ms[-1], "b_last": float(b[-1])},
        )
    return ms[last], float(b[last]), ratios[last]


def extract_kc(
    normalizers: NormalizerSeq, J: Idempotent, c: float, n: Optional[int] = None
) -> Mat:
    """
    Extract K_c = A_{m_n} A_n^-1 with det_J K_c close to c.

    b_{m,n} = det_J(A_m A_n^-1) starts at 1 for m = n; m_n is the last index
    with b_{m,n} >= c. Without an explicit n the largest base index whose
    crossing is observed within the track is used.

    Raises:
        DomainError: if c is not in (0, 1).
        HorizonError: if no crossing exists within the track.
        DegenerateSampleError: if a normalizer is singular.
    """
    if not 0.0 < c < 1.0:
        raise DomainError("c must lie in (0, 1)", details={"c": c})
    track = _as_track(normalizers)
    if n is not None:
        m_n, b_value, K = kc_crossing(track, J, c, n)
        logger.debug("extracted K_c", c=c, n=n, m_n=m_n, det_j=b_value)
        return K

    for base in reversed(list(track)):
        try:
            m_n, b_value, K = kc_crossing(track, J, c, base)
        except HorizonError:
            continue
        logger.debug("extracted K_c", c=c, n=base, m_n=m_n, det_j=b_value)
        return K
    raise HorizonError(
        "insufficient normalizer horizon", details={"c": c, "last_index": max(track)}
    )


def kc_increments(
    normalizers: NormalizerSeq, J: Idempotent, c: float, ns: Sequence[int]
) -> List[float]:
    """Cauchy increments ||K_c(n_{i+1}) - K_c(n_i)|| along the base indices ns."""
    track = _as_track(normalizers)
    extracted = [extract_kc(track, J, c, n) for n in ns]
    return [linalg.op_norm(b - a) for a, b in zip(extracted, extracted[1:])]


# ---------------------------------------------------------------------------
# Idempotent approach and primitive decomposition
# ---------------------------------------------------------------------------


def approach_idempotent(
    law: GaussianLaw,
    J: Idempotent,
    n: int,
    tol: float = linalg.DEFAULT_TOL,
    max_bisections: int = 60,
) -> Mat:
    """
    A contraction T_n = s J in D(law) with ||T_n - J|| <= 1/n.

    s is the largest scalar not above 1 - 1/(n max(1, ||J||)) that passes the
    membership oracle, found by bisection.

    Raises:
        DomainError: if n < 1.
        PreconditionError: if J is not in D(law).
    """
    if n < 1:
        raise DomainError("n must be positive", details={"n": n})
    membership = gaussian_membership(law, J.mat, tol)
    if not membership.member:
        raise PreconditionError(
            "idempotent is not in the decomposability semigroup",
            details={"margin": membership.margin},
        )

    s_max = 1.0 - 1.0 / (n * max(1.0, linalg.op_norm(J.mat)))
    if gaussian_membership(law, s_max * J.mat, tol).member:
        return s_max * J.mat

    lo, hi = 0.0, s_max
    for step in range(max_bisections):
        mid = (lo + hi) / 2.0
        if gaussian_membership(law, mid * J.mat, tol).member:
            lo = mid
        else:
            hi = mid
        logger.debug("idempotent approach bisection", step=step, lo=lo, hi=hi)
    return lo * J.mat


def primitive_decomposition(law: GaussianLaw) -> List[Idempotent]:
    """
    Rank-one idempotents J_r = W E_r W^-1 summing to I, with W = cov^{1/2}.

    Each J_r lies in D(law) and J_r J_s = 0 for r != s.

    Raises:
        PreconditionError: if the law is not full.
    """
    if not is_full(law):
        raise PreconditionError("law is not full")
    W, W_inv = whiten(law)
    parts = []
    for r in range(law.dim):
        E = np.zeros((law.dim, law.dim))
        E[r, r] = 1.0
        parts.append(Idempotent(mat=W @ E @ W_inv, rank=1))
    return parts


# ---------------------------------------------------------------------------
# C_w semigroup and generator recovery
# ---------------------------------------------------------------------------


def _as_fraction(w: Rational) -> Fraction:
    if isinstance(w, float):
        return Fraction(w).limit_denominator(1 << 20)
    return Fraction(w)


def integer_part_gap(a: float, b: float) -> int:
    """floor(a + b) - floor(a) - floor(b), always 0 or 1."""
    return math.floor(a + b) - math.floor(a) - math.floor(b)


def build_cw(T_per_r: Sequence[Tuple[Idempotent, Mat]], w: Rational, n: int = 0) -> Mat:
    """
    C_w = sum_r J_r T_r^{floor(w d_r)} J_r with d_r = floor(1 / -log det_J_r T_r).

    `n` labels the approximation step and is only logged.

    Raises:
        DomainError: if w < 0 or no blocks are given.
        PreconditionError: if some det_J_r T_r is outside (0, 1).
    """
    w = _as_fraction(w)
    if w < 0:
        raise DomainError("w must be non-negative", details={"w": str(w)})
    if not T_per_r:
        raise DomainError("at least one (J_r, T_r) block is required")
    dim = T_per_r[0][0].dim
    if w == 0:
        return np.eye(dim)

    result = np.zeros((dim, dim))
    for r, (J, T) in enumerate(T_per_r):
        T = linalg.as_mat(T, f"T_{r}")
        det = linalg.det_sub(J, T)
        if not 0.0 < det < 1.0:
            raise PreconditionError(
                "det_J T must lie in (0, 1)", details={"block": r, "det": det}
            )
        d_nr = math.floor(1.0 / -math.log(det))
        exponent = math.floor(w * d_nr)
        result += J.mat @ np.linalg.matrix_power(T, exponent) @ J.mat
    logger.debug("built C_w", w=str(w), n=n, blocks=len(T_per_r))
    return result


def decay_horizon(Q: Mat, factor: float = DECAY_FACTOR) -> Tuple[float, float]:
    """
    Horizon T = factor / spectral_margin(Q) and ||exp(-T Q)||.

    Raises:
        DomainError: if spectral_margin(Q) <= 0.
    """
    margin = linalg.spectral_margin(Q)
    if margin <= 0.0:
        raise DomainError("generator has non-positive spectral margin", details={"margin": margin})
    T = factor / margin
    return T, linalg.op_norm(linalg.mat_exp(Q, -T))


def generator_inverse_integral(Q: Mat) -> Tuple[Mat, float]:
    """
    int_0^inf exp(-sQ) ds by vector quadrature and its distance to Q^-1.

    Raises:
        DomainError: if spectral_margin(Q) <= 0.
    """
    Q = linalg.as_mat(Q, "Q")
    if linalg.spectral_margin(Q) <= 0.0:
        raise DomainError("integral diverges for non-positive spectral margin")
    integral, _ = quad_vec(lambda s: linalg.mat_exp(Q, -s), 0.0, np.inf, epsabs=1e-11, epsrel=1e-10)
    integral = np.asarray(integral, dtype=np.float64)
    return integral, linalg.op_norm(integral - np.linalg.inv(Q))


def extract_generator(
    cw_samples: Mapping[Rational, Mat],
    law: GaussianLaw,
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    consistency_threshold: float = CONSISTENCY_THRESHOLD,
) -> GeneratorCertificate:
    """
    Recover Q from sampled C_w as the mean of -log(C_w) / w over w > 0.

    Raises:
        DomainError: if fewer than two positive w are sampled.
        DegenerateSampleError: if some C_w is singular.
        PreconditionError: if det C_w >= 1 for some w > 0.
    """
    samples = {_as_fraction(w): linalg.as_mat(C, "C_w") for w, C in cw_samples.items()}
    positive = {w: C for w, C in sorted(samples.items()) if w > 0}
    if len(positive) < 2:
        raise DomainError(
            "at least two distinct positive w values are required",
            details={"w_values": [str(w) for w in samples]},
        )

    logs = []
    for w, C in positive.items():
        det = float(np.linalg.det(C))
        if abs(det) < 1e-12 or linalg.condition_number(C) > 1e12:
            raise DegenerateSampleError("degenerate semigroup sample", details={"w": str(w)})
        if det >= 1.0:
            raise PreconditionError("det C_w must be below 1 for w > 0", details={"w": str(w)})
        logs.append(-linalg.mat_log(C) / float(w))
    Q = np.mean(logs, axis=0)

    residual = max(
        linalg.op_norm(linalg.mat_exp(Q, -float(w)) - C) for w, C in positive.items()
    )
    if residual > consistency_threshold:
        logger.warning(
            "C_w samples are not consistent with one semigroup",
            residual=residual,
            threshold=consistency_threshold,
        )

    margin = linalg.spectral_margin(Q)
    memberships = {
        float(t): gaussian_membership(law, linalg.mat_exp(Q, -float(t))).margin for t in t_grid
    }

    horizon: Optional[float] = None
    decay_norm: Optional[float] = None
    inverse_residual: Optional[float] = None
    if margin > 0.0:
        horizon, decay_norm = decay_horizon(Q)
        _, inverse_residual = generator_inverse_integral(Q)

    certificate = GeneratorCertificate(
        Q=Q,
        spectral_margin=margin,
        membership_margins=memberships,
        consistency_residual=residual,
        consistency_threshold=consistency_threshold,
        w_values=[str(w) for w in positive],
        decay_horizon=horizon,
        decay_norm=decay_norm,
        inverse_integral_residual=inverse_residual,
    )
    logger.info(
        "recovered generator",
        spectral_margin=margin,
        consistency_residual=residual,
        certified=certificate.certified(),
    )
    return certificate
