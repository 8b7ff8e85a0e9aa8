"""
Main entry point for the osdmix CLI.

This module allows the package to be run as a script with `python -m osdmix`.
"""

import sys
from typing import List, Optional

from osdmix.cli import app


def main(argv: Optional[List[str]] = None) -> int:
    """Run the osdmix command-line interface and return its exit code."""
    try:
        app(argv)
        return 0
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
