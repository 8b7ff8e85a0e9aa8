"""
Partial-sum limit harness.

Matrix normalizers for partial sums, their regularization and diagnostics,
infinitesimality and the threshold schedule built from it, block-sum bounds,
distances to the limit law and the characteristic-function independence
residual across a gap.

Counting estimators come in two layers: `*_counts` functions return raw
replica counts that add up across chunks of one batch, and the public checks
turn counts into probabilities.
"""

import math
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from osdmix.core import linalg
from osdmix.core.mixing import alpha_estimate
from osdmix.core.models import (
    BlockSumReport,
    CfIndependence,
    DeltaSchedule,
    GaussianLaw,
    LimitDistance,
    Mat,
    NormalizerReport,
    NormalizerTrack,
    PathBatch,
)
from osdmix.utils.errors import DegenerateSampleError, DomainError, InfinitesimalityError
from osdmix.utils.logging import get_logger
from osdmix.utils.rng import Stream, derive_rng

logger = get_logger(__name__)

DEFAULT_CHECKPOINTS = [2**k for k in range(8, 15)]
DEFAULT_EPS_GRID = [1.0, 0.5, 0.25]
RATIO_LIMIT = 2.0
RATIO_GROWTH_LIMIT = 1.5
EXPONENT_SPREAD_LIMIT = 0.5
INFINITESIMALITY_FLOOR = 0.05
DEFAULT_WINDOWS = 16
DEFAULT_MAX_POINTS = 1000
DEFAULT_SHUFFLES = 200
CF_ALPHA_FACTOR = 16.0

TailTable = Mapping[Tuple[int, float], float]
TailFunction = Callable[[int, float], float]


def default_cf_grid(dim: int) -> np.ndarray:
    """Coordinate directions and the diagonal at radii 0.5, 1 and 2."""
    directions = np.vstack([np.eye(dim), np.ones((1, dim)) / math.sqrt(dim)])
    return np.vstack([r * directions for r in (0.5, 1.0, 2.0)])


def empirical_cf(samples: np.ndarray, z_grid: np.ndarray) -> np.ndarray:
    """Empirical characteristic function of the rows of `samples` at the rows of z_grid."""
    return np.exp(1j * (samples @ np.atleast_2d(z_grid).T)).mean(axis=0)


# ---------------------------------------------------------------------------
# Partial sums and normalizers
# ---------------------------------------------------------------------------


def _check_checkpoints(checkpoints: Sequence[int], length: int) -> List[int]:
    ordered = sorted(set(int(n) for n in checkpoints))
    if not ordered or ordered[0] < 1 or ordered[-1] > length:
        raise DomainError(
            "checkpoint out of range", details={"checkpoints": ordered, "length": length}
        )
    return ordered


def partial_sums(batch: PathBatch, checkpoints: Sequence[int]) -> Dict[int, np.ndarray]:
    """Per-replica S_n = X_1 + ... + X_n at every checkpoint, as (R, d) arrays."""
    ordered = _check_checkpoints(checkpoints, batch.length)
    sums: Dict[int, np.ndarray] = {}
    running = np.zeros((batch.replicas, batch.dim))
    previous = 0
    for n in ordered:
        running = running + batch.data[:, previous:n].sum(axis=1)
        sums[n] = running.copy()
        previous = n
    return sums


def choose_normalizers(sums: Mapping[int, np.ndarray]) -> NormalizerTrack:
    """
    A_n = Cov(S_n)^{-1/2} and b_n = -A_n mean(S_n) from the empirical moments.

    Raises:
        DegenerateSampleError: if an empirical covariance is singular.
    """
    A: Dict[int, Mat] = {}
    b: Dict[int, np.ndarray] = {}
    for n in sorted(sums):
        S = np.asarray(sums[n], dtype=np.float64)
        mean = S.mean(axis=0)
        centered = S - mean
        cov = centered.T @ centered / S.shape[0]
        vals, vecs = scipy.linalg.eigh(cov)
        if vals[0] <= 1e-12 * max(1.0, float(vals[-1])):
            raise DegenerateSampleError(
                "degenerate sums; law not full", details={"n": n, "min_eigenvalue": float(vals[0])}
            )
        A[n] = (vecs / np.sqrt(vals)) @ vecs.T
        b[n] = -A[n] @ mean
    return NormalizerTrack(checkpoints=sorted(A), A=A, b=b)


def normalized_sums(sums: Mapping[int, np.ndarray], track: NormalizerTrack, n: int) -> np.ndarray:
    """A_n S_n + b_n for every replica."""
    return sums[n] @ track.A[n].T + track.b[n]


def regularize_normalizers(
    track: NormalizerTrack, law: Optional[GaussianLaw] = None
) -> NormalizerTrack:
    """
    Replace A_n by H_n A_n with H_n in the symmetry group of the target law.

    H_0 = I; each next H is the orthogonal alignment that brings the ratio
    H_{k+1} A_{k+1} A_k^-1 H_k^-1 closest to I in Frobenius norm. For a
    non-standard target the alignment runs in its whitened frame.
    """
    d = track.dim
    if law is None:
        W, W_inv = np.eye(d), np.eye(d)
    else:
        W, W_inv = linalg.sym_sqrt(law.cov), linalg.sym_sqrt(law.cov, inverse=True)

    ns = track.checkpoints
    H_prev = np.eye(d)
    A_new: Dict[int, Mat] = {ns[0]: track.A[ns[0]].copy()}
    b_new: Dict[int, np.ndarray] = {ns[0]: track.b[ns[0]].copy()}
    for prev, cur in zip(ns, ns[1:]):
        if d == 1:
            H = np.eye(1)
        else:
            ratio = W_inv @ track.A[cur] @ np.linalg.inv(track.A[prev]) @ W
            O, _ = scipy.linalg.orthogonal_procrustes(ratio.T, H_prev.T)
            H = O.T
        H_prev = H
        H_full = W @ H @ W_inv
        A_new[cur] = H_full @ track.A[cur]
        b_new[cur] = H_full @ track.b[cur]
    return NormalizerTrack(checkpoints=list(ns), A=A_new, b=b_new, regularized=True)


def normalizer_diagnostics(
    track: NormalizerTrack,
    ratio_limit: float = RATIO_LIMIT,
    growth_limit: float = RATIO_GROWTH_LIMIT,
    exponent_spread_limit: float = EXPONENT_SPREAD_LIMIT,
) -> NormalizerReport:
    """
    Norm trend, determinant ratios and sup ||A_n A_m^-1|| over checkpoint pairs m <= n.

    Flags: ``norm_not_decreasing``, ``ratio_bound_exceeds_limit``,
    ``ratio_bound_growing`` and ``det_exponent_unstable``.
    """
    ns = track.checkpoints
    norms = {n: linalg.op_norm(track.A[n]) for n in ns}
    inverses = {n: np.linalg.inv(track.A[n]) for n in ns}
    dets = {n: abs(float(np.linalg.det(track.A[n]))) for n in ns}

    det_ratios: Dict[int, float] = {}
    det_exponents: Dict[int, float] = {}
    per_step: Dict[int, float] = {}
    rotations: Dict[int, float] = {}
    for prev, cur in zip(ns, ns[1:]):
        ratio = dets[cur] / dets[prev]
        det_ratios[cur] = ratio
        det_exponents[cur] = math.log(ratio) / math.log(cur / prev)
        per_step[cur] = ratio ** (1.0 / (cur - prev))
        step = track.A[cur] @ inverses[prev]
        rotations[cur] = linalg.op_norm(linalg.polar_orthogonal(step) - np.eye(track.dim))

    prefix: Dict[int, float] = {}
    bound = 0.0
    for i, n in enumerate(ns):
        for m in ns[: i + 1]:
            bound = max(bound, linalg.op_norm(track.A[n] @ inverses[m]))
        prefix[n] = bound

    flags: List[str] = []
    values = [norms[n] for n in ns]
    if any(b > a * (1.0 + 1e-9) for a, b in zip(values, values[1:])):
        flags.append("norm_not_decreasing")
    if bound > ratio_limit:
        flags.append("ratio_bound_exceeds_limit")
    if len(ns) > 2 and prefix[ns[-1]] > growth_limit * prefix[ns[len(ns) // 2]]:
        flags.append("ratio_bound_growing")
    if det_exponents and (
        max(det_exponents.values()) - min(det_exponents.values()) > exponent_spread_limit
    ):
        flags.append("det_exponent_unstable")

    if flags:
        logger.warning("normalizer diagnostics raised flags", flags=flags, ratio_bound=bound)
    return NormalizerReport(
        norms=norms,
        det_ratios=det_ratios,
        det_exponents=det_exponents,
        det_ratio_per_step=per_step,
        ratio_bound=bound,
        prefix_ratio_bounds=prefix,
        rotation_residuals=rotations,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# Infinitesimality and the threshold schedule
# ---------------------------------------------------------------------------


def exceedance_counts(
    batch: PathBatch, track: NormalizerTrack, eps_grid: Sequence[float] = DEFAULT_EPS_GRID
) -> np.ndarray:
    """
    Counts of replicas with ||A_n X_j|| >= eps.

    Returns an array of shape (checkpoints, eps, max checkpoint) whose entry
    [k, e, j] counts exceedances for n = checkpoints[k], j + 1 <= n.
    """
    ns = _check_checkpoints(track.checkpoints, batch.length)
    counts = np.zeros((len(ns), len(eps_grid), ns[-1]), dtype=np.int64)
    for k, n in enumerate(ns):
        norms = np.linalg.norm(batch.data[:, :n] @ track.A[n].T, axis=2)
        for e, eps in enumerate(eps_grid):
            counts[k, e, :n] = np.count_nonzero(norms >= eps, axis=0)
    return counts


def tails_from_counts(
    counts: np.ndarray, replicas: int, checkpoints: Sequence[int], eps_grid: Sequence[float]
) -> Dict[Tuple[int, float], float]:
    """max over j <= n of the exceedance frequency, keyed by (n, eps)."""
    table: Dict[Tuple[int, float], float] = {}
    for k, n in enumerate(sorted(checkpoints)):
        for e, eps in enumerate(eps_grid):
            table[(n, float(eps))] = float(counts[k, e, :n].max()) / replicas
    return table


def infinitesimality_check(
    batch: PathBatch, track: NormalizerTrack, eps_grid: Sequence[float] = DEFAULT_EPS_GRID
) -> Dict[Tuple[int, float], float]:
    """max_{j <= n} P(||A_n X_j|| >= eps) estimated across replicas."""
    counts = exceedance_counts(batch, track, eps_grid)
    return tails_from_counts(counts, batch.replicas, track.checkpoints, eps_grid)


def _tail_lookup(
    tail_prob: Union[TailTable, TailFunction], ns: Sequence[int]
) -> Tuple[Callable[[int, float], Optional[float]], List[int], Optional[List[float]]]:
    if callable(tail_prob):
        return (lambda n, eps: float(tail_prob(n, eps))), list(ns), None

    table = {(int(n), float(e)): float(v) for (n, e), v in tail_prob.items()}
    grid = sorted({e for _, e in table}, reverse=True)
    indices = sorted({n for n, _ in table})

    def lookup(n: int, eps: float) -> Optional[float]:
        usable = [e for e in grid if e <= eps + 1e-12]
        if not usable:
            return None
        return table.get((n, usable[0]))

    return lookup, indices, grid


def delta_schedule(
    tail_prob: Union[TailTable, TailFunction],
    ns: Optional[Sequence[int]] = None,
    max_level: int = 1000,
    floor: float = INFINITESIMALITY_FLOOR,
) -> DeltaSchedule:
    """
    Threshold schedule delta_n = 1/m on [N_m, N_{m+1}).

    N_1 is the first observed index and N_m the first index after N_{m-1} from
    which the tail at level 1/m stays at most 1/m. `tail_prob` is either a table
    keyed by (n, eps) (levels between grid points use the next smaller eps, an
    upper bound) or a callable evaluated on `ns`. Construction stops at the first
    level that is not reached within the observed indices.

    Raises:
        InfinitesimalityError: if the tail at the coarsest level still exceeds
            `floor` at the last observed index.
    """
    lookup, indices, grid = _tail_lookup(tail_prob, ns or [])
    if not indices:
        raise DomainError("tail table has no indices")

    top_eps = grid[0] if grid else 1.0
    final_tail = lookup(indices[-1], top_eps)
    if final_tail is None or final_tail > floor:
        raise InfinitesimalityError(
            "not infinitesimal at horizon",
            details={"n": indices[-1], "eps": top_eps, "tail": final_tail, "floor": floor},
        )

    breakpoints: List[Tuple[int, int]] = [(indices[0], 1)]
    position = 0
    for m in range(2, max_level + 1):
        level = 1.0 / m
        tails = [lookup(n, level) for n in indices]
        if any(t is None for t in tails):
            break
        start = None
        for i in range(len(indices) - 1, position, -1):
            if tails[i] > level:
                break
            start = i
        if start is None:
            break
        breakpoints.append((indices[start], m))
        position = start

    logger.debug("delta schedule built", levels=len(breakpoints), last=breakpoints[-1])
    return DeltaSchedule(breakpoints=breakpoints)


# ---------------------------------------------------------------------------
# Block sums
# ---------------------------------------------------------------------------


def _windows(n: int, delta: float, count: int, seed: int, index: int) -> List[Tuple[int, int]]:
    q_n = max(1, int(math.floor(delta ** -0.5)))
    rng = derive_rng(seed, Stream.WINDOWS, index)
    sizes = rng.integers(1, min(q_n, n) + 1, size=count)
    starts = [int(rng.integers(0, n - s + 1)) for s in sizes]
    return [(start, start + int(s)) for start, s in zip(starts, sizes)]


def block_sum_counts(
    batch: PathBatch,
    track: NormalizerTrack,
    schedule: DeltaSchedule,
    windows: int = DEFAULT_WINDOWS,
    seed: Optional[int] = None,
) -> Dict[int, np.ndarray]:
    """Per checkpoint, counts of replicas with ||A_n sum_{k in Q} X_k|| >= delta_n^{1/2} per window Q."""
    ns = _check_checkpoints(track.checkpoints, batch.length)
    base = batch.seed if seed is None else seed
    counts: Dict[int, np.ndarray] = {}
    for k, n in enumerate(ns):
        delta = schedule.delta(n)
        level = math.sqrt(delta)
        hits = np.zeros(windows, dtype=np.int64)
        for w, (lo, hi) in enumerate(_windows(n, delta, windows, base, k)):
            block = batch.data[:, lo:hi].sum(axis=1) @ track.A[n].T
            hits[w] = np.count_nonzero(np.linalg.norm(block, axis=1) >= level)
        counts[n] = hits
    return counts


def block_report_from_counts(
    counts: Mapping[int, np.ndarray], replicas: int, schedule: DeltaSchedule
) -> BlockSumReport:
    slack = 3.0 / math.sqrt(replicas)
    margins = {
        n: float(hits.max()) / replicas - math.sqrt(schedule.delta(n)) - slack
        for n, hits in counts.items()
    }
    windows = max((len(h) for h in counts.values()), default=0)
    return BlockSumReport(margins=margins, worst_margin=max(margins.values()), windows=windows)


def block_sum_check(
    batch: PathBatch,
    track: NormalizerTrack,
    schedule: DeltaSchedule,
    windows: int = DEFAULT_WINDOWS,
    seed: Optional[int] = None,
) -> BlockSumReport:
    """
    Worst margin of P(||A_n sum_Q X_k|| >= sqrt(delta_n)) - sqrt(delta_n) - 3/sqrt(R)
    over random windows Q of size at most floor(delta_n^{-1/2}).
    """
    counts = block_sum_counts(batch, track, schedule, windows, seed)
    return block_report_from_counts(counts, batch.replicas, schedule)


# ---------------------------------------------------------------------------
# Distances to the limit law
# ---------------------------------------------------------------------------


def _energy(D: np.ndarray, left: np.ndarray, right: np.ndarray) -> float:
    return float(
        2.0 * D[np.ix_(left, right)].mean()
        - D[np.ix_(left, left)].mean()
        - D[np.ix_(right, right)].mean()
    )


def _pooled_distances(samples: np.ndarray, law: GaussianLaw, seed: int, max_points: int):
    X = np.asarray(samples, dtype=np.float64)[:max_points]
    Y = law.sample(derive_rng(seed, Stream.REFERENCE), X.shape[0])
    pooled = np.vstack([X, Y])
    return cdist(pooled, pooled), X.shape[0]


def energy_null_band(
    samples: np.ndarray,
    law: GaussianLaw,
    seed: int = 0,
    shuffles: int = DEFAULT_SHUFFLES,
    quantile: float = 0.95,
    max_points: int = DEFAULT_MAX_POINTS,
) -> Tuple[float, float]:
    """Permutation-null quantile and standard deviation of the energy statistic."""
    D, m = _pooled_distances(samples, law, seed, max_points)
    rng = derive_rng(seed, Stream.PERMUTATION)
    null = np.empty(shuffles)
    for s in range(shuffles):
        perm = rng.permutation(2 * m)
        null[s] = _energy(D, perm[:m], perm[m:])
    return float(np.quantile(null, quantile)), float(null.std())


def limit_distance(
    samples: np.ndarray,
    law: GaussianLaw,
    cf_grid: Optional[np.ndarray] = None,
    seed: int = 0,
    shuffles: int = DEFAULT_SHUFFLES,
    max_points: int = DEFAULT_MAX_POINTS,
) -> LimitDistance:
    """
    Energy distance to fresh draws of the law and sup CF distance on a grid.

    The energy statistic uses at most `max_points` samples; with shuffles > 0
    its permutation-null 95% quantile and spread are attached.

    Raises:
        DomainError: for fewer than 100 samples.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] < 100:
        raise DomainError("at least 100 samples are required", details={"samples": samples.shape[0]})
    D, m = _pooled_distances(samples, law, seed, max_points)
    if m < samples.shape[0]:
        logger.info("energy statistic capped", samples=samples.shape[0], points=m)
    energy = _energy(D, np.arange(m), np.arange(m, 2 * m))

    cf_sup = 0.0
    if cf_grid is not None and len(cf_grid) > 0:
        grid = np.atleast_2d(cf_grid)
        cf_sup = float(np.max(np.abs(empirical_cf(samples, grid) - law.cf(grid))))

    quantile = spread = None
    if shuffles > 0:
        quantile, spread = energy_null_band(samples, law, seed, shuffles, max_points=max_points)
    return LimitDistance(
        energy=energy, cf_sup=cf_sup, null_quantile=quantile, null_spread=spread, points=m
    )


def cf_independence_residual(
    batch: PathBatch,
    track: NormalizerTrack,
    n: int,
    gap: int,
    z_grid: Optional[np.ndarray] = None,
    **alpha_options: int,
) -> CfIndependence:
    """
    CF factorization residual of V = A_n S_m and W = A_n (S_n - S_{m+q}).

    The split point is m = (n - q) // 2. The bound is 16 alpha(q + 1) with
    alpha estimated on the same batch, and the Monte-Carlo slack 5/sqrt(R).

    Raises:
        DomainError: if n is not a checkpoint or the split is empty.
    """
    if n not in track.A:
        raise DomainError("n is not a checkpoint of the track", details={"n": n})
    m = (n - gap) // 2
    if gap < 0 or m < 1 or m + gap >= n or n > batch.length:
        raise DomainError("invalid split indices", details={"n": n, "gap": gap, "m": m})

    A = track.A[n]
    V = batch.data[:, :m].sum(axis=1) @ A.T
    W = batch.data[:, m + gap : n].sum(axis=1) @ A.T
    grid = default_cf_grid(batch.dim) if z_grid is None else np.atleast_2d(z_grid)
    residual = float(
        np.max(np.abs(empirical_cf(V + W, grid) - empirical_cf(V, grid) * empirical_cf(W, grid)))
    )
    alpha = alpha_estimate(batch, gap + 1, **alpha_options)
    result = CfIndependence(
        residual=residual,
        bound=CF_ALPHA_FACTOR * alpha,
        slack=5.0 / math.sqrt(batch.replicas),
        alpha=alpha,
        split=m,
        gap=gap,
    )
    logger.debug("cf independence residual", n=n, gap=gap, residual=residual, bound=result.bound)
    return result


def merge_counts(parts: Iterable[np.ndarray]) -> np.ndarray:
    """Sum chunk-level count arrays."""
    total: Optional[np.ndarray] = None
    for part in parts:
        total = part.copy() if total is None else total + part
    if total is None:
        raise DomainError("no counts to merge")
    return total
