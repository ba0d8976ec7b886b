"""Harness: configuration, CLI, wire protocol, and benchmark experiments."""

from .config import ConfigError, RunConfig, build_config, config_hash, fixed_batches, geometric_schedule
from .protocol import ProtocolError, StdioSource, serve_source

__all__ = [
    "ConfigError",
    "RunConfig",
    "build_config",
    "config_hash",
    "fixed_batches",
    "geometric_schedule",
    "ProtocolError",
    "StdioSource",
    "serve_source",
]
