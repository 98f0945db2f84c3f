"""Handlers behind the CLI commands."""
