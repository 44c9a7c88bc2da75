"""Warped-phase lifting of backward heat flow with fixed-frame reduced dynamics."""

from .config import ConfigError, RunConfig, bundled_config
from .lift import LiftSpec, build_lift, inject, recover
from .model import GridSpec, InitialState, build_model

__all__ = [
    "ConfigError",
    "GridSpec",
    "InitialState",
    "LiftSpec",
    "RunConfig",
    "build_lift",
    "build_model",
    "bundled_config",
    "inject",
    "recover",
]
__version__ = "0.1.0"
