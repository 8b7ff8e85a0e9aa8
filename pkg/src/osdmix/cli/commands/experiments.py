"""
Experiment commands.

Each command maps its flags onto dotted RunConfig keys; a flag left unset
keeps the value from --config or the model default.
"""

from pathlib import Path
from typing import Any, Dict, Optional

import typer

from osdmix.cli.common import run_command
from osdmix.config import Experiment
from osdmix.core.models import ProcessVariant

CONFIG = typer.Option(None, "--config", "-c", help="Configuration file (.cfg, .yaml or .json)")
SEED = typer.Option(None, "--seed", help="Master seed")
DIM = typer.Option(None, "--dim", "-d", help="Dimension d (1 to 10)")
REPLICAS = typer.Option(None, "--replicas", "-R", help="Monte-Carlo replicas")
OUT = typer.Option(None, "--out", "-o", help="Output directory")
FORMAT = typer.Option(
    None, "--format", "-f", help="Data export: csv, or json (alias binary) for the OSDB binary dump"
)
WORKERS = typer.Option(None, "--workers", "-w", help="Worker threads; results do not depend on it")
PROCESS = typer.Option(None, "--process", "-p", help="Process variant: iid, ma or ar1")


def _common(
    seed: Optional[int],
    dim: Optional[int],
    replicas: Optional[int],
    out: Optional[str],
    out_format: Optional[str],
    workers: Optional[int],
    **extra: Any,
) -> Dict[str, Any]:
    overrides = {
        "seed": seed,
        "dim": dim,
        "replicas": replicas,
        "out_path": out,
        "out_format": out_format,
        "workers": workers,
    }
    overrides.update(extra)
    return overrides


def simulate_mixing(
    config: Optional[Path] = CONFIG,
    seed: Optional[int] = SEED,
    dim: Optional[int] = DIM,
    replicas: Optional[int] = REPLICAS,
    out: Optional[str] = OUT,
    out_format: Optional[str] = FORMAT,
    workers: Optional[int] = WORKERS,
    process: Optional[ProcessVariant] = PROCESS,
    length: Optional[int] = typer.Option(None, "--length", "-n", help="Path length"),
) -> None:
    """Simulate a strongly mixing process and export its paths."""
    overrides = _common(
        seed, dim, replicas, out, out_format, workers,
        **{"process.variant": process and process.value, "process.length": length},
    )
    run_command(Experiment.SIMULATE_MIXING, config, overrides)


def estimate_alpha(
    config: Optional[Path] = CONFIG,
    seed: Optional[int] = SEED,
    dim: Optional[int] = DIM,
    replicas: Optional[int] = REPLICAS,
    out: Optional[str] = OUT,
    out_format: Optional[str] = FORMAT,
    workers: Optional[int] = WORKERS,
    process: Optional[ProcessVariant] = PROCESS,
    lag: Optional[int] = typer.Option(None, "--lag", help="Single lag replacing alpha.lags"),
    length: Optional[int] = typer.Option(None, "--length", "-n", help="Path length"),
) -> None:
    """Estimate strong-mixing coefficients from half-space events across replicas."""
    overrides = _common(
        seed, dim, replicas, out, out_format, workers,
        **{
            "process.variant": process and process.value,
            "alpha.lags": None if lag is None else [lag],
            "alpha.length": length,
        },
    )
    run_command(Experiment.ESTIMATE_ALPHA, config, overrides)


def clt_run(
    config: Optional[Path] = CONFIG,
    seed: Optional[int] = SEED,
    dim: Optional[int] = DIM,
    replicas: Optional[int] = REPLICAS,
    out: Optional[str] = OUT,
    out_format: Optional[str] = FORMAT,
    workers: Optional[int] = WORKERS,
    process: Optional[ProcessVariant] = PROCESS,
) -> None:
    """Normalize partial sums, check infinitesimality and measure the distance to the limit."""
    overrides = _common(
        seed, dim, replicas, out, out_format, workers,
        **{"process.variant": process and process.value},
    )
    run_command(Experiment.CLT_RUN, config, overrides)


def osd_sample(
    config: Optional[Path] = CONFIG,
    seed: Optional[int] = SEED,
    dim: Optional[int] = DIM,
    replicas: Optional[int] = REPLICAS,
    out: Optional[str] = OUT,
    out_format: Optional[str] = FORMAT,
    workers: Optional[int] = WORKERS,
    t: Optional[float] = typer.Option(None, "--t", help="Time of the factorization check"),
    samples: Optional[int] = typer.Option(None, "--samples", "-N", help="Number of draws"),
) -> None:
    """Sample an operator-selfdecomposable law through its random-integral representation."""
    overrides = _common(
        seed, dim, replicas, out, out_format, workers,
        **{"osd.t": t, "osd.samples": samples},
    )
    run_command(Experiment.OSD_SAMPLE, config, overrides)


def extract_q(
    config: Optional[Path] = CONFIG,
    seed: Optional[int] = SEED,
    dim: Optional[int] = DIM,
    replicas: Optional[int] = REPLICAS,
    out: Optional[str] = OUT,
    out_format: Optional[str] = FORMAT,
    workers: Optional[int] = WORKERS,
    process: Optional[ProcessVariant] = PROCESS,
    normalizers: Optional[str] = typer.Option(
        None, "--normalizers", help="Reuse a normalizers.json instead of simulating"
    ),
) -> None:
    """Extract K_c, build the C_w semigroup and recover its generator Q."""
    overrides = _common(
        seed, dim, replicas, out, out_format, workers,
        **{"process.variant": process and process.value, "generator.normalizers": normalizers},
    )
    run_command(Experiment.EXTRACT_Q, config, overrides)


def verify(
    config: Optional[Path] = CONFIG,
    seed: Optional[int] = SEED,
    dim: Optional[int] = DIM,
    replicas: Optional[int] = REPLICAS,
    out: Optional[str] = OUT,
    out_format: Optional[str] = FORMAT,
    workers: Optional[int] = WORKERS,
    q_file: Optional[str] = typer.Option(None, "--q-file", "-q", help="q.json from extract-q"),
    t: Optional[float] = typer.Option(None, "--t", help="Time of the factorization check"),
    samples: Optional[str] = typer.Option(
        None, "--samples", help="Samples file (.osdb or .csv) to test instead of fresh draws"
    ),
) -> None:
    """Check the factorization and membership of exp(-tQ) for a stored generator."""
    overrides = _common(
        seed, dim, replicas, out, out_format, workers,
        **{"verify.q_file": q_file, "verify.t": t, "verify.samples_file": samples},
    )
    run_command(Experiment.VERIFY, config, overrides)


COMMANDS = {
    Experiment.SIMULATE_MIXING: simulate_mixing,
    Experiment.ESTIMATE_ALPHA: estimate_alpha,
    Experiment.CLT_RUN: clt_run,
    Experiment.OSD_SAMPLE: osd_sample,
    Experiment.EXTRACT_Q: extract_q,
    Experiment.VERIFY: verify,
}
