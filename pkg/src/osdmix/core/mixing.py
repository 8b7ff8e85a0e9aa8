"""
Strongly mixing R^d-valued sequences and an empirical estimate of alpha(n).

Replica r of a batch is driven by its own Philox stream derived from
(seed, PATHS, r), so a batch can be produced in chunks, in any order and on
any number of worker threads with identical data.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Iterator, List, Optional, Tuple

import numpy as np
import scipy.linalg

from osdmix.core import linalg
from osdmix.core.models import Mat, PathBatch, ProcessSpec, ProcessVariant
from osdmix.utils.errors import DomainError, ProcessSpecError
from osdmix.utils.logging import get_logger
from osdmix.utils.rng import Stream, derive_rng

logger = get_logger(__name__)

DEFAULT_CHUNK_SIZE = 256
DEFAULT_DIRECTIONS = 8
DEFAULT_THRESHOLDS = 7
DEFAULT_POSITIONS = 3


def validate_spec(spec: ProcessSpec) -> None:
    """
    Raises:
        ProcessSpecError: if an AR1 coefficient matrix has spectral radius >= 1.
    """
    if spec.variant is ProcessVariant.AR1:
        radius = linalg.spectral_radius(spec.b)
        if radius >= 1.0:
            raise ProcessSpecError(
                "AR1 coefficient matrix is not stable",
                variant=spec.variant.value,
                spectral_radius=radius,
            )


def default_ar1_matrix(dim: int) -> Mat:
    """Upper bidiagonal matrix with diagonal 0.5, 0.3, 0.1, ... and super-diagonal 0.2."""
    diag = [0.5, 0.3] + [0.1] * max(0, dim - 2)
    B = np.diag(diag[:dim])
    B += np.diag([0.2] * (dim - 1), k=1)
    return B


def stationary_moments(spec: ProcessSpec) -> Tuple[np.ndarray, Mat]:
    """Stationary mean and covariance of X_t."""
    validate_spec(spec)
    m, C = spec.innovation.mean, spec.innovation.cov
    if spec.variant is ProcessVariant.IID:
        return m.copy(), C.copy()
    if spec.variant is ProcessVariant.MA:
        theta = spec.theta or []
        mean = sum(T for T in theta) @ m
        cov = sum(T @ C @ T.T for T in theta)
        return mean, cov
    eye = np.eye(spec.dim)
    mean = np.linalg.solve(eye - spec.b, m)
    cov = scipy.linalg.solve_discrete_lyapunov(spec.b, C)
    return mean, (cov + cov.T) / 2.0


def long_run_covariance(spec: ProcessSpec) -> Mat:
    """sum over all lags h of Cov(X_0, X_h), the asymptotic covariance of S_n / sqrt(n)."""
    validate_spec(spec)
    C = spec.innovation.cov
    if spec.variant is ProcessVariant.IID:
        return C.copy()
    if spec.variant is ProcessVariant.MA:
        total = sum(T for T in (spec.theta or []))
        return total @ C @ total.T
    resolvent = np.linalg.inv(np.eye(spec.dim) - spec.b)
    return resolvent @ C @ resolvent.T


def _simulate_chunk(spec: ProcessSpec, n: int, seed: int, replicas: range) -> np.ndarray:
    d = spec.dim
    law = spec.innovation
    out = np.empty((len(replicas), n, d))

    if spec.variant is ProcessVariant.IID:
        for i, r in enumerate(replicas):
            out[i] = law.sample(derive_rng(seed, Stream.PATHS, r), n)
        return out

    if spec.variant is ProcessVariant.MA:
        theta = spec.theta or []
        m = len(theta) - 1
        for i, r in enumerate(replicas):
            eps = law.sample(derive_rng(seed, Stream.PATHS, r), n + m)
            x = np.zeros((n, d))
            for k, T in enumerate(theta):
                x += eps[m - k : m - k + n] @ T.T
            out[i] = x
        return out

    mean, cov = stationary_moments(spec)
    root = np.linalg.cholesky(cov)
    eps = np.empty((len(replicas), n, d))
    for i, r in enumerate(replicas):
        rng = derive_rng(seed, Stream.PATHS, r)
        eps[i, 0] = mean + root @ rng.standard_normal(d)
        if n > 1:
            eps[i, 1:] = law.sample(rng, n - 1)
    B_t = spec.b.T
    out[:, 0] = eps[:, 0]
    for t in range(1, n):
        out[:, t] = out[:, t - 1] @ B_t + eps[:, t]
    return out


def _check_sizes(n: int, replicas: int) -> None:
    if n < 1 or replicas < 1:
        raise DomainError("path length and replicas must be positive", details={"n": n, "replicas": replicas})


def chunk_ranges(start: int, stop: int, chunk_size: int = DEFAULT_CHUNK_SIZE) -> List[range]:
    return [range(lo, min(lo + chunk_size, stop)) for lo in range(start, stop, chunk_size)]


def chunk_batch(spec: ProcessSpec, n: int, seed: int, replicas: range) -> PathBatch:
    """The replicas in `replicas` of any batch generated with (spec, n, seed)."""
    validate_spec(spec)
    _check_sizes(n, len(replicas))
    return PathBatch(
        data=_simulate_chunk(spec, n, seed, replicas),
        seed=seed,
        spec=spec,
        first_replica=replicas.start,
    )


def iter_chunks(
    spec: ProcessSpec,
    n: int,
    replicas: int,
    seed: int,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> Iterator[PathBatch]:
    """
    Yield consecutive replica chunks of generate(spec, n, replicas, seed).

    Chunk k holds replicas [k * chunk_size, (k + 1) * chunk_size) and equals
    that slice of the full batch exactly.
    """
    validate_spec(spec)
    _check_sizes(n, replicas)
    for block in chunk_ranges(0, replicas, chunk_size):
        yield chunk_batch(spec, n, seed, block)


def generate(
    spec: ProcessSpec,
    n: int,
    replicas: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> PathBatch:
    """
    Simulate `replicas` independent paths of length n.

    AR1 paths start in their stationary law; MA paths use n + m innovations.
    The data depend only on (spec, n, replicas, seed).

    Raises:
        ProcessSpecError: for an unstable AR1 specification.
        DomainError: for non-positive n or replicas.
    """
    validate_spec(spec)
    _check_sizes(n, replicas)
    data = np.empty((replicas, n, spec.dim))
    blocks = chunk_ranges(0, replicas, chunk_size)

    def fill(block: range) -> None:
        data[block.start : block.stop] = _simulate_chunk(spec, n, seed, block)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))
    else:
        for block in blocks:
            fill(block)

    logger.debug(
        "generated path batch", variant=spec.variant.value, n=n, replicas=replicas, dim=spec.dim
    )
    return PathBatch(data=data, seed=seed, spec=spec)


def _directions(seed: int, count: int, dim: int) -> np.ndarray:
    raw = derive_rng(seed, Stream.DIRECTIONS).standard_normal((count, dim))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def _positions(length: int, lag: int, count: int) -> List[int]:
    last = length - 1 - lag
    return sorted({int(round(p)) for p in np.linspace(0, last, count)})


def _indicators(values: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Indicators of {<u_i, X> <= tau} for every direction i and level, as (R, k * m) floats."""
    taus = np.quantile(values, levels, axis=0)
    return (values[:, None, :] <= taus[None, :, :]).reshape(values.shape[0], -1).astype(np.float64)


def alpha_estimate(
    batch: PathBatch,
    lag: int,
    directions: int = DEFAULT_DIRECTIONS,
    thresholds: int = DEFAULT_THRESHOLDS,
    positions: int = DEFAULT_POSITIONS,
    seed: Optional[int] = None,
) -> float:
    """
    Finite-family lower bound on alpha(lag), estimated across replicas.

    Events are half-spaces {<u, X_j> <= tau} at past positions j and
    {<u, X_{j+lag}> <= tau} in the future, with seeded directions u on the
    sphere and empirical-quantile levels tau between 0.1 and 0.9. Returns the
    largest |P(A and B) - P(A) P(B)| over the family.

    Raises:
        DomainError: if lag < 1 or lag >= path length.
    """
    if lag < 1 or lag >= batch.length:
        raise DomainError("lag must lie in [1, length)", details={"lag": lag, "length": batch.length})
    U = _directions(batch.seed if seed is None else seed, directions, batch.dim)
    levels = np.linspace(0.1, 0.9, thresholds)
    R = batch.replicas

    estimate = 0.0
    for j in _positions(batch.length, lag, positions):
        past = _indicators(batch.data[:, j] @ U.T, levels)
        future = _indicators(batch.data[:, j + lag] @ U.T, levels)
        joint = past.T @ future / R
        product = np.outer(past.mean(axis=0), future.mean(axis=0))
        estimate = max(estimate, float(np.max(np.abs(joint - product))))

    logger.debug("alpha estimate", lag=lag, replicas=R, estimate=estimate)
    return estimate
