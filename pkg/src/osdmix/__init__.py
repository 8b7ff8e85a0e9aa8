"""
osdmix: operator-selfdecomposable limits of strongly mixing sequences.

Simulates strongly mixing R^d-valued sequences under matrix normalization,
builds the decomposability-semigroup machinery numerically (idempotents, K_c
extraction, C_w semigroups, generator Q) and verifies operator
selfdecomposability of limit laws through membership oracles and the
random-integral representation.
"""

__version__ = "0.1.0"

from osdmix.config import RunConfig, Settings, get_settings, load_run_config

__all__ = [
    "RunConfig",
    "Settings",
    "get_settings",
    "load_run_config",
    "__version__",
]
