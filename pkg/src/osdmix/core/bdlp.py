"""
Random-integral representation of operator-selfdecomposable laws.

The law of int_0^inf exp(-tQ) dY(t) is sampled as the state of an operator
Ornstein-Uhlenbeck process z' = exp(-hQ) z + xi_h driven by the Lévy process
Y, run from zero over a horizon long enough for exp(-TQ) to be negligible.
The Gaussian part of every step is exact; compound-Poisson jumps are placed
at the left point of a sub-grid of the step.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import List, NamedTuple, Optional

import numpy as np
import scipy.linalg

from osdmix.core import linalg
from osdmix.core.clt import default_cf_grid, empirical_cf
from osdmix.core.models import LevySpec, Mat, OsdSampler
from osdmix.core.semigroup import DECAY_FACTOR
from osdmix.utils.errors import DomainError, HorizonError, PreconditionError
from osdmix.utils.logging import get_logger
from osdmix.utils.rng import Stream, derive_rng

logger = get_logger(__name__)

DEFAULT_STEP = 1.0 / 64.0
DEFAULT_JUMP_GRID = 8
HORIZON_TOL = 1e-6


def _psd_root(S: Mat) -> Mat:
    vals, vecs = scipy.linalg.eigh((S + S.T) / 2.0)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _check_step(h: float) -> None:
    if not h > 0.0:
        raise DomainError("step must be positive", details={"h": h})


def _check_levy(Q: Mat, spec: LevySpec) -> Mat:
    Q = linalg.as_mat(Q, "Q")
    if spec.dim != Q.shape[0]:
        raise DomainError(
            "generator and Lévy dimensions differ", details={"Q": Q.shape[0], "levy": spec.dim}
        )
    return Q


def _add_jumps(
    out: np.ndarray, spec: LevySpec, h: float, rng: np.random.Generator, transforms: Optional[np.ndarray] = None
) -> None:
    if spec.jump_rate <= 0.0 or spec.jump_law is None:
        return
    counts = rng.poisson(spec.jump_rate * h, size=out.shape[0])
    total = int(counts.sum())
    if total == 0:
        return
    rows = np.repeat(np.arange(out.shape[0]), counts)
    jumps = spec.jump_law.sample(rng, total)
    if transforms is not None:
        slots = rng.integers(0, transforms.shape[0], size=total)
        jumps = np.einsum("kij,kj->ki", transforms[slots], jumps)
    np.add.at(out, rows, jumps)


def levy_increment(
    spec: LevySpec, h: float, rng: np.random.Generator, size: Optional[int] = None
) -> np.ndarray:
    """
    Y(h) - Y(0): drift b h, a N(0, h D) draw and a Poisson(lambda h) sum of jumps.

    Returns a vector, or a (size, d) array when size is given.
    """
    _check_step(h)
    rows = 1 if size is None else size
    out = np.tile(spec.drift * h, (rows, 1))
    out += rng.standard_normal((rows, spec.dim)) @ _psd_root(h * spec.diffusion).T
    _add_jumps(out, spec, h, rng)
    return out[0] if size is None else out


def gaussian_step_covariance(Q: Mat, D: Mat, h: float) -> Mat:
    """
    Sigma_h = int_0^h exp(-sQ) D exp(-sQ^T) ds.

    Read off the exponential of the block matrix [[Q, D], [0, -Q^T]] h, whose
    (2,2) block F22 and (1,2) block F12 give Sigma_h = F22^T F12.
    """
    Q = linalg.as_mat(Q, "Q")
    d = Q.shape[0]
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = Q
    block[:d, d:] = D
    block[d:, d:] = -Q.T
    F = linalg.mat_exp(block, h)
    sigma = F[d:, d:].T @ F[:d, d:]
    return (sigma + sigma.T) / 2.0


def drift_step(Q: Mat, b: np.ndarray, h: float) -> np.ndarray:
    """int_0^h exp(-sQ) b ds, equal to Q^-1 (I - exp(-hQ)) b for invertible Q."""
    Q = linalg.as_mat(Q, "Q")
    d = Q.shape[0]
    block = np.zeros((d + 1, d + 1))
    block[:d, :d] = -Q
    block[:d, d] = b
    return linalg.mat_exp(block, h)[:d, d]


class StepKernel(NamedTuple):
    """Precomputed pieces of one OU step of length h."""

    propagator: Mat
    noise_root: Mat
    drift: np.ndarray
    jump_transforms: np.ndarray
    h: float
    levy: LevySpec


def step_kernel(Q: Mat, h: float, spec: LevySpec, jump_grid: int = DEFAULT_JUMP_GRID) -> StepKernel:
    _check_step(h)
    Q = _check_levy(Q, spec)
    sub = h / jump_grid
    transforms = np.stack([linalg.mat_exp(Q, -(h - k * sub)) for k in range(jump_grid)])
    return StepKernel(
        propagator=linalg.mat_exp(Q, -h),
        noise_root=_psd_root(gaussian_step_covariance(Q, spec.diffusion, h)),
        drift=drift_step(Q, spec.drift, h),
        jump_transforms=transforms,
        h=h,
        levy=spec,
    )


def advance(kernel: StepKernel, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One step for every row of z."""
    out = z @ kernel.propagator.T + kernel.drift
    out += rng.standard_normal(z.shape) @ kernel.noise_root.T
    _add_jumps(out, kernel.levy, kernel.h, rng, kernel.jump_transforms)
    return out


def ou_step(
    Q: Mat,
    h: float,
    z: np.ndarray,
    spec: LevySpec,
    rng: np.random.Generator,
    jump_grid: int = DEFAULT_JUMP_GRID,
) -> np.ndarray:
    """
    z' = exp(-hQ) z + xi_h for a state vector or for every row of a state array.

    xi_h combines the exact Gaussian part N(0, Sigma_h), the drift integral and
    jumps J_i propagated by exp(-(h - tau_i) Q) with tau_i at sub-grid left points.
    """
    z = np.asarray(z, dtype=np.float64)
    kernel = step_kernel(Q, h, spec, jump_grid)
    if z.ndim == 1:
        return advance(kernel, z[None, :], rng)[0]
    return advance(kernel, z, rng)


def stationary_covariance(Q: Mat, spec: LevySpec) -> Mat:
    """Solution of Q S + S Q^T = D + lambda E[J J^T]."""
    Q = _check_levy(Q, spec)
    source = spec.diffusion.copy()
    if spec.jump_rate > 0.0 and spec.jump_law is not None:
        source = source + spec.jump_rate * spec.jump_law.second_moment()
    sigma = scipy.linalg.solve_continuous_lyapunov(Q, source)
    return (sigma + sigma.T) / 2.0


def stationary_mean(Q: Mat, spec: LevySpec) -> np.ndarray:
    """Q^-1 (b + lambda E[J])."""
    Q = _check_levy(Q, spec)
    rate = spec.drift.copy()
    if spec.jump_rate > 0.0 and spec.jump_law is not None:
        rate = rate + spec.jump_rate * spec.jump_law.mean
    return np.linalg.solve(Q, rate)


def lyapunov_bdlp(Q: Mat, sigma: Mat) -> LevySpec:
    """
    Centered Gaussian Lévy driver whose OU stationary law is N(0, sigma): D = Q S + S Q^T.

    Raises:
        PreconditionError: if D is not positive semidefinite.
    """
    Q = linalg.as_mat(Q, "Q")
    D = Q @ sigma + sigma @ Q.T
    D = (D + D.T) / 2.0
    margin = linalg.psd_margin(D)
    if margin < -linalg.DEFAULT_TOL:
        raise PreconditionError(
            "no Gaussian driver realizes this stationary law", details={"margin": margin}
        )
    if margin < 0.0:
        vals, vecs = scipy.linalg.eigh(D)
        D = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return LevySpec(drift=np.zeros(Q.shape[0]), diffusion=D)


def make_sampler(
    Q: Mat,
    levy: LevySpec,
    step: float = DEFAULT_STEP,
    horizon: Optional[float] = None,
    jump_grid: int = DEFAULT_JUMP_GRID,
    block_size: int = 4096,
) -> OsdSampler:
    """
    Sampler with horizon T = 20 / spectral_margin(Q) unless given.

    Raises:
        HorizonError: if spectral_margin(Q) <= 0 or ||exp(-TQ)|| > 1e-6.
    """
    Q = _check_levy(Q, levy)
    margin = linalg.spectral_margin(Q)
    if margin <= 0.0:
        raise HorizonError("generator does not decay", details={"spectral_margin": margin})
    T = DECAY_FACTOR / margin if horizon is None else float(horizon)
    decay = linalg.op_norm(linalg.mat_exp(Q, -T))
    if decay > HORIZON_TOL:
        raise HorizonError(
            "sampler horizon too short", details={"horizon": T, "decay_norm": decay}
        )
    return OsdSampler(
        Q=Q, levy=levy, step=step, horizon=T, jump_grid=jump_grid, block_size=block_size
    )


def _run_from_zero(
    kernel: StepKernel, steps: int, rows: int, seed: int, stream: Stream, block: int
) -> np.ndarray:
    rng = derive_rng(seed, stream, block)
    z = np.zeros((rows, kernel.propagator.shape[0]))
    for _ in range(steps):
        z = advance(kernel, z, rng)
    return z


def _blocked(
    kernel: StepKernel,
    steps: int,
    N: int,
    seed: int,
    stream: Stream,
    block_size: int,
    workers: int,
) -> np.ndarray:
    sizes: List[int] = [min(block_size, N - start) for start in range(0, N, block_size)]

    def run(block: int) -> np.ndarray:
        return _run_from_zero(kernel, steps, sizes[block], seed, stream, block)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(block) for block in range(len(sizes))]
    if not parts:
        return np.zeros((0, kernel.propagator.shape[0]))
    return np.vstack(parts)


def sample_osd(sampler: OsdSampler, N: int, seed: int, workers: int = 1) -> np.ndarray:
    """
    N independent draws, each the OU state after T/h steps from zero.

    Draw block k uses the stream (seed, OSD, k), so output does not depend on workers.
    """
    if N < 0:
        raise DomainError("sample count must be non-negative", details={"N": N})
    kernel = step_kernel(sampler.Q, sampler.step, sampler.levy, sampler.jump_grid)
    samples = _blocked(
        kernel, sampler.steps, N, seed, Stream.OSD, sampler.block_size, workers
    )
    logger.debug("sampled OSD law", N=N, steps=sampler.steps, horizon=sampler.horizon)
    return samples


def sample_nu(sampler: OsdSampler, t: float, N: int, seed: int, workers: int = 1) -> np.ndarray:
    """N draws of int_0^t exp(-sQ) dY(s), on a stream disjoint from sample_osd."""
    if not t > 0.0:
        raise DomainError("t must be positive", details={"t": t})
    steps = max(1, int(round(t / sampler.step)))
    kernel = step_kernel(sampler.Q, t / steps, sampler.levy, sampler.jump_grid)
    return _blocked(kernel, steps, N, seed, Stream.NU, sampler.block_size, workers)


def factorization_check(
    samples: np.ndarray,
    Q: Mat,
    t: float,
    sampler: OsdSampler,
    z_grid: Optional[np.ndarray] = None,
    seed: int = 0,
    nu_samples: Optional[np.ndarray] = None,
) -> float:
    """
    max_z |phi_mu(z) - phi_mu(exp(-tQ^T) z) phi_nu_t(z)| with empirical CFs.

    `Q` is the generator placed in the CF argument; passing a generator other
    than the sampler's gives a negative control. nu_t is sampled from the
    sampler's own driver unless `nu_samples` are supplied.
    """
    samples = np.asarray(samples, dtype=np.float64)
    Q = linalg.as_mat(Q, "Q")
    if nu_samples is None:
        nu_samples = sample_nu(sampler, t, samples.shape[0], seed)
    grid = default_cf_grid(sampler.dim) if z_grid is None else np.atleast_2d(z_grid)
    A = linalg.mat_exp(Q, -t)
    lhs = empirical_cf(samples, grid)
    rhs = empirical_cf(samples, grid @ A) * empirical_cf(nu_samples, grid)
    residual = float(np.max(np.abs(lhs - rhs)))
    logger.debug("factorization residual", t=t, residual=residual)
    return residual
