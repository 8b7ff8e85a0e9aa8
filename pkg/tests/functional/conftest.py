"""
Pytest configuration for functional tests.

Fixtures here write small run configurations so that CLI end-to-end runs
finish in seconds.
"""

from pathlib import Path

import pytest


SMALL_RUN = """\
# reduced sizes for end-to-end runs
replicas = 400
clt.checkpoints = [16, 32, 64]
clt.shuffles = 20
clt.max_points = 200
clt.windows = 4
clt.gaps = [1, 4]
clt.cf_replicas = 400
alpha.length = 16
alpha.lags = [1, 4]
generator.base_exponent = 5
generator.grid_divisor = 8
generator.grid_factor = 3.0
osd.samples = 400
osd.step = 0.125
osd.block_size = 128
verify.samples = 400
"""


@pytest.fixture
def functional_test_dir(tmp_path) -> Path:
    """A clean directory for one end-to-end run."""
    out = tmp_path / "run"
    out.mkdir()
    return out


@pytest.fixture
def small_config(tmp_path) -> Path:
    """Flat configuration file with reduced replica counts and horizons."""
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_RUN, encoding="utf-8")
    return path
