"""Planar chain locomotion on rigid, SCM and DEM terrain."""

from ._terrasim import *  # noqa: F401,F403
from ._terrasim import __doc__  # noqa: F401

__version__ = "0.1.0"
