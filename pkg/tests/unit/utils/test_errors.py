"""
Unit tests for the error hierarchy and handler registry.
"""

import pytest

from osdmix.utils import errors
from osdmix.utils.errors import (
    ConfigurationError,
    InvalidConfigError,
    MagnitudeError,
    NotCompactError,
    OsdmixError,
    ProcessSpecError,
    format_error,
    handle_error,
    register_error_handler,
)


@pytest.fixture
def isolated_handlers(monkeypatch):
    monkeypatch.setattr(errors, "_ERROR_HANDLERS", {})


@pytest.mark.unit
class TestErrors:
    """Tests for error classes and formatting."""

    def test_str_includes_details(self):
        error = OsdmixError("bad thing", details={"n": 4})
        assert str(error) == "bad thing (n=4)"
        assert str(OsdmixError("plain")) == "plain"

    def test_hierarchy(self):
        assert issubclass(InvalidConfigError, ConfigurationError)
        assert issubclass(MagnitudeError, errors.LinalgError)
        assert issubclass(NotCompactError, errors.PreconditionError)

    def test_process_spec_details(self):
        error = ProcessSpecError("unstable", variant="ar1", spectral_radius=1.2)
        assert error.details == {"variant": "ar1", "spectral_radius": 1.2}

    def test_format_error(self):
        text = format_error(InvalidConfigError("Invalid run configuration", details={"dim": "too big"}))
        assert text.splitlines() == ["Error: Invalid run configuration", "Details:", "  dim: too big"]


@pytest.mark.unit
class TestHandlerRegistry:
    """Tests for register_error_handler and handle_error."""

    def test_first_match_wins(self, isolated_handlers):
        register_error_handler(ConfigurationError, lambda e: 2)
        register_error_handler(OsdmixError, lambda e: 1)
        assert handle_error(InvalidConfigError("x")) == 2
        assert handle_error(MagnitudeError("y")) == 1

    def test_unhandled_reraises(self, isolated_handlers):
        with pytest.raises(MagnitudeError):
            handle_error(MagnitudeError("overflow"))
