"""
Pytest configuration file for the osdmix project.
Contains fixtures shared across unit, integration and functional tests.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add src directory to path so we can import the osdmix package
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from osdmix.config import reset_settings  # noqa: E402
from osdmix.core.models import GaussianLaw, ProcessSpec, ProcessVariant  # noqa: E402


@pytest.fixture
def cli_runner():
    """
    Fixture for testing CLI commands.
    Returns a typer CliRunner.
    """
    from typer.testing import CliRunner

    return CliRunner()


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Keep OSDMIX_* variables of the host out of the tests."""
    import os

    for key in list(os.environ):
        if key.startswith("OSDMIX_"):
            monkeypatch.delenv(key, raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def std_law():
    return GaussianLaw.standard(2)


@pytest.fixture
def ar1_spec():
    """Gaussian AR1 with the default bidiagonal coefficient matrix."""
    return ProcessSpec(
        variant=ProcessVariant.AR1,
        innovation=GaussianLaw.standard(2),
        b=np.array([[0.5, 0.2], [0.0, 0.3]]),
    )


@pytest.fixture
def iid_spec():
    return ProcessSpec(variant=ProcessVariant.IID, innovation=GaussianLaw.standard(2))


@pytest.fixture
def ma_spec():
    """MA(1) with Theta_0 = Theta_1 = I."""
    return ProcessSpec(
        variant=ProcessVariant.MA,
        innovation=GaussianLaw.standard(2),
        theta=[np.eye(2), np.eye(2)],
    )
