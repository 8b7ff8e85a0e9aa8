"""
Experiment runner.

One function per experiment. Each takes a resolved RunConfig and an output
directory, writes its data files there and returns a Report; `run` adds
report.json and turns the report's flags into an exit code.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence, TypeVar

import numpy as np

from osdmix.config import Experiment, RunConfig, get_settings
from osdmix.core import bdlp, clt, linalg, mixing, semigroup
from osdmix.core.export import read_binary, read_csv, write_binary, write_csv, write_metrics_csv
from osdmix.core.models import (
    Flag,
    GaussianLaw,
    NormalizerTrack,
    PathBatch,
    ProcessSpec,
    ProcessVariant,
    Report,
)
from osdmix.core.report import (
    load_generator,
    load_track,
    new_report,
    save_generator,
    save_track,
    write_report,
)
from osdmix.utils.errors import InvalidConfigError, MissingConfigError
from osdmix.utils.logging import RunContext, get_logger

logger = get_logger(__name__)

T = TypeVar("T")

STATIONARITY_FACTOR = 5.0 * math.sqrt(2.0)
ALPHA_RESOLUTION_FACTOR = 1.5
COVARIANCE_FACTOR = 10.0
SCHEDULE_LEVELS = 8
MIN_CLT_REPLICAS = 100


def _map_chunks(
    spec: ProcessSpec,
    n: int,
    seed: int,
    ranges: Sequence[range],
    fn: Callable[[PathBatch], T],
    workers: int,
) -> List[T]:
    """Apply fn to every replica chunk; results keep chunk order for any worker count."""

    def task(block: range) -> T:
        return fn(mixing.chunk_batch(spec, n, seed, block))

    if workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(task, ranges))
    return [task(block) for block in ranges]


def _chunk_size() -> int:
    return get_settings().execution.chunk_size


def _stack_sums(parts: List[Dict[int, np.ndarray]], checkpoints: Sequence[int]) -> Dict[int, np.ndarray]:
    return {n: np.vstack([part[n] for part in parts]) for n in checkpoints}


def _normalizer_track(config: RunConfig, checkpoints: Sequence[int]) -> NormalizerTrack:
    """Normalizers of the configured process along checkpoints, streamed over replica chunks."""
    spec = config.process_spec()
    ranges = mixing.chunk_ranges(0, config.replicas, _chunk_size())
    parts = _map_chunks(
        spec,
        checkpoints[-1],
        config.seed,
        ranges,
        lambda b: clt.partial_sums(b, checkpoints),
        config.workers,
    )
    track = clt.choose_normalizers(_stack_sums(parts, checkpoints))
    if config.clt.regularize:
        track = clt.regularize_normalizers(track, GaussianLaw.standard(config.dim))
    return track


def _write_rows(config: RunConfig, out: Path, stem: str, chunks: Any, replicas: int, length: int, dim: int) -> Path:
    if config.out_format == "csv":
        return write_csv(out / f"{stem}.csv", chunks, dim)
    return write_binary(out / f"{stem}.osdb", chunks, replicas, length, dim)


# ---------------------------------------------------------------------------
# simulate-mixing
# ---------------------------------------------------------------------------


class _EndpointMoments:
    """Running first and second moments of X_1, X_2 and X_n across replica chunks."""

    def __init__(self, dim: int):
        self.count = 0
        self.first = np.zeros(dim)
        self.first_outer = np.zeros((dim, dim))
        self.last = np.zeros(dim)
        self.last_outer = np.zeros((dim, dim))
        self.second = np.zeros(dim)
        self.lag_cross = np.zeros((dim, dim))

    def add(self, batch: PathBatch) -> None:
        x1, xn = batch.data[:, 0], batch.data[:, -1]
        x2 = batch.data[:, 1] if batch.length > 1 else x1
        self.count += batch.replicas
        self.first += x1.sum(axis=0)
        self.first_outer += x1.T @ x1
        self.last += xn.sum(axis=0)
        self.last_outer += xn.T @ xn
        self.second += x2.sum(axis=0)
        self.lag_cross += x1.T @ x2

    def _cov(self, total: np.ndarray, outer: np.ndarray) -> np.ndarray:
        mean = total / self.count
        return outer / self.count - np.outer(mean, mean)

    def covariances(self) -> Dict[str, np.ndarray]:
        m1, m2 = self.first / self.count, self.second / self.count
        return {
            "cov_first": self._cov(self.first, self.first_outer),
            "cov_last": self._cov(self.last, self.last_outer),
            "lag1_autocov": self.lag_cross / self.count - np.outer(m1, m2),
        }


def simulate_mixing(config: RunConfig, out: Path) -> Report:
    spec = config.process_spec()
    n, R, d = config.process.length, config.replicas, config.dim
    moments = _EndpointMoments(d)

    def batches():
        for block in mixing.chunk_ranges(0, R, _chunk_size()):
            batch = mixing.chunk_batch(spec, n, config.seed, block)
            moments.add(batch)
            yield batch

    data_file = _write_rows(config, out, "paths", batches(), R, n, d)
    mean, cov = mixing.stationary_moments(spec)
    empirical = moments.covariances()
    scale = float(np.max(np.diag(cov)))
    tol = STATIONARITY_FACTOR * scale / math.sqrt(R)

    report = new_report(config.experiment.value, config.report_echo())
    report.metrics = {
        "data_file": data_file.name,
        "stationary_mean": mean,
        "stationary_cov": cov,
        "long_run_cov": mixing.long_run_covariance(spec),
        **empirical,
    }
    report.add_flag(
        Flag.at_most(
            "stationarity",
            float(np.max(np.abs(empirical["cov_first"] - empirical["cov_last"]))),
            tol,
        )
    )
    report.add_flag(
        Flag.at_most(
            "stationary_covariance", float(np.max(np.abs(empirical["cov_first"] - cov))), tol
        )
    )
    return report


# ---------------------------------------------------------------------------
# estimate-alpha
# ---------------------------------------------------------------------------


def estimate_alpha(config: RunConfig, out: Path) -> Report:
    spec = config.process_spec()
    options = config.alpha
    if max(options.lags) >= options.length:
        raise InvalidConfigError(
            "alpha.length must exceed every lag",
            details={"length": options.length, "lags": options.lags},
        )
    batch = mixing.generate(
        spec, options.length, config.replicas, config.seed, config.workers, _chunk_size()
    )
    alphas = {
        lag: mixing.alpha_estimate(
            batch,
            lag,
            directions=options.directions,
            thresholds=options.thresholds,
            positions=options.positions,
        )
        for lag in options.lags
    }

    resolution = 1.0 / math.sqrt(config.replicas)
    tol = max(options.tolerance, ALPHA_RESOLUTION_FACTOR * resolution)
    report = new_report(config.experiment.value, config.report_echo())
    report.metrics = {
        "alpha": {str(lag): value for lag, value in alphas.items()},
        "mc_resolution": resolution,
        "tolerance": tol,
    }
    report.add_flag(Flag.at_most("alpha_range", max(alphas.values()), 0.25 + 3.0 * resolution))
    for lag, value in alphas.items():
        independent = spec.variant is ProcessVariant.IID or (
            spec.variant is ProcessVariant.MA and lag > spec.order
        )
        if independent:
            report.add_flag(Flag.at_most(f"alpha_lag_{lag}", value, tol))
    if spec.variant is ProcessVariant.AR1 and len(alphas) > 1:
        short, long = alphas[min(alphas)], alphas[max(alphas)]
        report.add_flag(
            Flag(name="alpha_decreasing", passed=long < short, value=long, threshold=short)
        )
    return report


# ---------------------------------------------------------------------------
# clt-run
# ---------------------------------------------------------------------------


def clt_run(config: RunConfig, out: Path) -> Report:
    options = config.clt
    spec = config.process_spec()
    R, d, seed = config.replicas, config.dim, config.seed
    if R < MIN_CLT_REPLICAS:
        raise InvalidConfigError(
            "clt-run needs at least 100 replicas", details={"replicas": R}
        )
    C = list(options.checkpoints)
    n_max = C[-1]
    law = GaussianLaw.standard(d)
    chunk = _chunk_size()

    # pass 1: partial sums and normalizers
    parts = _map_chunks(
        spec, n_max, seed, mixing.chunk_ranges(0, R, chunk),
        lambda b: clt.partial_sums(b, C), config.workers,
    )
    sums = _stack_sums(parts, C)
    track = clt.choose_normalizers(sums)
    if options.regularize:
        track = clt.regularize_normalizers(track, law)
    diagnostics = clt.normalizer_diagnostics(track, ratio_limit=options.ratio_limit)
    logger.info("normalizers chosen", checkpoints=len(C), ratio_bound=diagnostics.ratio_bound)

    grid = clt.default_cf_grid(d)
    distances = {
        n: clt.limit_distance(
            clt.normalized_sums(sums, track, n),
            law,
            grid,
            seed=seed,
            shuffles=options.shuffles if n == n_max else 0,
            max_points=options.max_points,
        )
        for n in C
    }

    # pass 2: schedule from the first half of the replicas, checks on the second
    eps_grid = sorted(
        set(options.eps_grid)
        | {float(options.infinitesimality_eps)}
        | {1.0 / m for m in range(1, SCHEDULE_LEVELS + 1)}, reverse=True
    )
    half = R // 2
    calibration = clt.merge_counts(
        _map_chunks(
            spec, n_max, seed, mixing.chunk_ranges(0, half, chunk),
            lambda b: clt.exceedance_counts(b, track, eps_grid), config.workers,
        )
    )
    schedule = clt.delta_schedule(clt.tails_from_counts(calibration, half, C, eps_grid))

    held = _map_chunks(
        spec, n_max, seed, mixing.chunk_ranges(half, R, chunk),
        lambda b: (
            clt.exceedance_counts(b, track, eps_grid),
            clt.block_sum_counts(b, track, schedule, options.windows, seed),
        ),
        config.workers,
    )
    held_counts = clt.merge_counts(h[0] for h in held)
    block_counts = {n: clt.merge_counts(h[1][n] for h in held) for n in C}
    held_tails = clt.tails_from_counts(held_counts, R - half, C, eps_grid)
    tails = clt.tails_from_counts(calibration + held_counts, R, C, eps_grid)
    blocks = clt.block_report_from_counts(block_counts, R - half, schedule)

    # CF independence on the path prefixes up to the first checkpoint
    n_cf = C[0]
    cf_batch = mixing.generate(
        spec, n_cf, min(options.cf_replicas, R), seed, config.workers, chunk
    )
    cf_results = {
        gap: clt.cf_independence_residual(cf_batch, track, n_cf, gap, grid) for gap in options.gaps
    }

    rows: List[Dict[str, Any]] = []
    for n in C:
        row: Dict[str, Any] = {
            "n": n,
            "norm": diagnostics.norms[n],
            "ratio_bound": diagnostics.prefix_ratio_bounds[n],
            "det_ratio": diagnostics.det_ratios.get(n),
            "energy": distances[n].energy,
            "cf_sup": distances[n].cf_sup,
            "delta": schedule.delta(n),
            "block_margin": blocks.margins[n],
        }
        for eps in options.eps_grid:
            row[f"inf@{eps:g}"] = tails[(n, float(eps))]
        rows.append(row)
    if config.out_format == "csv":
        write_metrics_csv(out / "metrics.csv", rows, list(rows[0].keys()))
    save_track(track, out / "normalizers.json")

    final = distances[n_max]
    report = new_report(config.experiment.value, config.report_echo())
    report.metrics = {
        "checkpoints": {str(row["n"]): row for row in rows},
        "normalizers": diagnostics.model_dump(),
        "schedule": schedule.breakpoints,
        "energy_null_quantile": final.null_quantile,
        "energy_null_spread": final.null_spread,
        "energy_points": final.points,
        "block_sums": blocks.model_dump(),
        "cf_independence": {str(gap): res.model_dump() for gap, res in cf_results.items()},
    }

    report.add_flag(
        Flag(
            name="energy_within_null",
            passed=final.within_null,
            value=final.energy,
            threshold=final.null_quantile,
        )
    )
    eps = float(options.infinitesimality_eps)
    values = [tails[(n, eps)] for n in C]
    increase = max((b - a for a, b in zip(values, values[1:])), default=0.0)
    report.add_flag(Flag.at_most("infinitesimality_monotone", increase, 0.0))
    report.add_flag(
        Flag.at_most("infinitesimality_final", values[-1], options.infinitesimality_target)
    )
    report.add_flag(Flag.at_most("ratio_bound", diagnostics.ratio_bound, options.ratio_limit))
    report.add_flag(
        Flag(
            name="normalizer_diagnostics",
            passed=not diagnostics.flags,
            value=float(len(diagnostics.flags)),
            threshold=0.0,
        )
    )
    slack = 2.0 / math.sqrt(R - half)
    violation = max(
        held_tails[(n, _grid_level(schedule.delta(n), eps_grid))] - schedule.delta(n) - slack
        for n in C
    )
    report.add_flag(Flag.at_most("schedule_held_out", violation, 0.0))
    report.add_flag(Flag.at_most("block_sum_bound", blocks.worst_margin, 0.0))
    for gap, res in cf_results.items():
        report.add_flag(
            Flag(
                name=f"cf_bound_gap_{gap}",
                passed=res.within_bound,
                value=res.residual,
                threshold=res.bound + res.slack,
            )
        )
    return report


def _grid_level(delta: float, eps_grid: Sequence[float]) -> float:
    """Largest grid eps not above delta; exceedance tails only grow as eps shrinks."""
    return max(e for e in eps_grid if e <= delta + 1e-12)


# ---------------------------------------------------------------------------
# osd-sample
# ---------------------------------------------------------------------------


def osd_sample(config: RunConfig, out: Path) -> Report:
    options = config.osd
    Q = config.osd_generator()
    levy = config.levy_spec()
    sampler = bdlp.make_sampler(
        Q, levy, step=options.step, jump_grid=options.jump_grid, block_size=options.block_size
    )
    samples = bdlp.sample_osd(sampler, options.samples, config.seed, config.workers)
    N, d = samples.shape
    _write_rows(config, out, "samples", [samples], N, 1, d)

    sigma = bdlp.stationary_covariance(Q, levy)
    mean = bdlp.stationary_mean(Q, levy)
    nu = bdlp.sample_nu(sampler, options.t, N, config.seed, config.workers)
    residual = bdlp.factorization_check(samples, Q, options.t, sampler, nu_samples=nu)
    control = bdlp.factorization_check(
        samples, options.control_scale * Q, options.t, sampler, nu_samples=nu
    )
    cov_error = float(np.max(np.abs(np.cov(samples, rowvar=False).reshape(d, d) - sigma)))
    scale = max(1.0, float(np.max(np.abs(sigma))))

    report = new_report(config.experiment.value, config.report_echo())
    report.metrics = {
        "horizon": sampler.horizon,
        "steps": sampler.steps,
        "sample_mean": samples.mean(axis=0),
        "sample_cov": np.cov(samples, rowvar=False).reshape(d, d),
        "stationary_mean": mean,
        "stationary_cov": sigma,
        "factorization_residual": residual,
        "negative_control_residual": control,
    }
    report.add_flag(
        Flag.at_most("covariance", cov_error, COVARIANCE_FACTOR * scale / math.sqrt(N))
    )
    report.add_flag(Flag.at_most("factorization", residual, options.residual_threshold))
    report.add_flag(Flag.at_least("negative_control", control, options.control_threshold))
    return report


# ---------------------------------------------------------------------------
# extract-q
# ---------------------------------------------------------------------------


def _dense_grid(config: RunConfig) -> List[int]:
    options = config.generator
    n0 = 2**options.base_exponent
    step = max(1, n0 // options.grid_divisor)
    return list(range(n0, int(options.grid_factor * n0) + 1, step))


def extract_q(config: RunConfig, out: Path) -> Report:
    options = config.generator
    if options.normalizers:
        track = load_track(options.normalizers)
    else:
        track = _normalizer_track(config, _dense_grid(config))
        save_track(track, out / "normalizers.json")

    d = track.dim
    law = GaussianLaw.standard(d)
    base = track.checkpoints[0]
    matrices = track.matrices()
    full = linalg.make_idempotent(np.eye(d))
    blocks = semigroup.primitive_decomposition(law)

    report = new_report(config.experiment.value, config.report_echo())
    certificates = {}
    per_c: Dict[str, Any] = {}
    for c in options.c_values:
        K = semigroup.extract_kc(matrices, full, c, base)
        membership = semigroup.gaussian_membership(law, K)
        kernel = semigroup.numakura_kernel(K)
        T_per_r = [(J, J.mat @ K @ J.mat) for J in blocks]
        cw = {w: semigroup.build_cw(T_per_r, w, base) for w in options.fractions()}
        certificate = semigroup.extract_generator(
            cw, law, options.t_grid, options.consistency_threshold
        )
        certificates[f"{c:g}"] = certificate
        per_c[f"{c:g}"] = {
            "K": K,
            "det_K": linalg.det_sub(full, K),
            "K_membership_margin": membership.margin,
            "kernel_rank": kernel.unit.rank,
            "kernel_converged": kernel.converged,
            "kc_increments": semigroup.kc_increments(matrices, full, c, track.checkpoints[:4]),
            "consistency_flagged": certificate.consistency_flagged,
            "certificate": certificate.model_dump(),
        }

        if not membership.member:
            logger.warning("extracted K_c is not a member", c=c, margin=membership.margin)
        report.add_flag(
            Flag.at_least(f"kc_membership_c{c:g}", membership.margin, -options.margin_tol)
        )
        report.add_flag(
            Flag(
                name=f"spectral_margin_c{c:g}",
                passed=certificate.spectral_margin > 0.0,
                value=certificate.spectral_margin,
                threshold=0.0,
            )
        )
        report.add_flag(
            Flag.at_least(
                f"generator_membership_c{c:g}",
                min(certificate.membership_margins.values(), default=float("-inf")),
                -options.margin_tol,
            )
        )

    primary = f"{options.c_values[0]:g}"
    save_generator(
        certificates[primary].Q,
        out / "q.json",
        certificates,
        source={"c": options.c_values[0], "base_index": base, "checkpoints": len(track.checkpoints)},
    )
    report.metrics = {"base_index": base, "grid_size": len(track.checkpoints), "c": per_c}
    return report


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _load_samples(path: str) -> np.ndarray:
    data = read_binary(path) if Path(path).suffix == ".osdb" else read_csv(path)
    return data[:, -1, :]


def verify(config: RunConfig, out: Path) -> Report:
    options = config.verify
    if not options.q_file:
        raise MissingConfigError("verify needs a generator file (--q-file)")
    Q = load_generator(options.q_file)
    d = Q.shape[0]
    if options.driver == "lyapunov":
        levy = bdlp.lyapunov_bdlp(Q, np.eye(d))
    else:
        levy = config.levy_spec()
    sampler = bdlp.make_sampler(
        Q, levy, step=config.osd.step, jump_grid=config.osd.jump_grid,
        block_size=config.osd.block_size,
    )
    if options.samples_file:
        samples = _load_samples(options.samples_file)
    else:
        samples = bdlp.sample_osd(sampler, options.samples, config.seed, config.workers)

    nu = bdlp.sample_nu(sampler, options.t, samples.shape[0], config.seed, config.workers)
    residual = bdlp.factorization_check(samples, Q, options.t, sampler, nu_samples=nu)
    control = bdlp.factorization_check(
        samples, config.osd.control_scale * Q, options.t, sampler, nu_samples=nu
    )
    sigma = bdlp.stationary_covariance(Q, levy)
    stationary = GaussianLaw(mean=np.zeros(d), cov=sigma)
    margins = {
        f"{t:g}": semigroup.gaussian_membership(stationary, linalg.mat_exp(Q, -t)).margin
        for t in options.t_grid
    }

    report = new_report(config.experiment.value, config.report_echo())
    report.metrics = {
        "Q": Q,
        "spectral_margin": linalg.spectral_margin(Q),
        "horizon": sampler.horizon,
        "stationary_cov": sigma,
        "driver_diffusion": levy.diffusion,
        "factorization_residual": residual,
        "negative_control_residual": control,
        "membership_margins": margins,
    }
    report.add_flag(Flag.at_most("factorization", residual, config.osd.residual_threshold))
    for t, margin in margins.items():
        report.add_flag(Flag.at_least(f"membership_t{t}", margin, -config.generator.margin_tol))
    return report


EXPERIMENTS: Dict[Experiment, Callable[[RunConfig, Path], Report]] = {
    Experiment.SIMULATE_MIXING: simulate_mixing,
    Experiment.ESTIMATE_ALPHA: estimate_alpha,
    Experiment.CLT_RUN: clt_run,
    Experiment.OSD_SAMPLE: osd_sample,
    Experiment.EXTRACT_Q: extract_q,
    Experiment.VERIFY: verify,
}


def run_experiment(config: RunConfig) -> Report:
    """Run one experiment and write report.json next to its data files."""
    out = Path(config.out_path)
    out.mkdir(parents=True, exist_ok=True)
    with RunContext(experiment=config.experiment.value, seed=config.seed):
        logger.info("experiment started", out=str(out))
        report = EXPERIMENTS[config.experiment](config, out)
        write_report(report, out / "report.json")
        logger.info(
            "experiment finished",
            passed=report.passed,
            failed=[flag.name for flag in report.flags if not flag.passed],
        )
    return report


def run(config: RunConfig) -> int:
    """Exit code of one experiment: 0 iff every flag passes."""
    return 0 if run_experiment(config).passed else 1
