"""Simulation of branching symmetric stable processes driven by a catalyst.

Subpackages are imported lazily by the user; this module only exposes the
version and the most common entry points.
"""
__version__ = "0.1.0"

from .config import SimConfig, load_config  # noqa: E402,F401
from .stable import StableParams  # noqa: E402,F401
