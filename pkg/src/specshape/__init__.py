"""Network-coded PU traffic as a spectrum shaper for an opportunistic SU."""

from .core import (
    ConfigError,
    NetworkConfig,
    PuMode,
    SuStrategy,
    UnstableRegime,
    validate_config,
)

__version__ = "0.1.0"
