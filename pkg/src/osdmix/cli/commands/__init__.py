"""
Command implementations for the osdmix CLI.
"""
