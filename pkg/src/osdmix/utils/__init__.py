"""Shared utilities: errors, logging, random streams and JSON output."""
