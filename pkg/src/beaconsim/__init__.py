"""System-level simulator for uplink-beacon tracking of individual and
grouped mobile users in an ultra-dense cellular network."""

__version__ = "0.1.0"

from .config import Scenario  # noqa: F401
