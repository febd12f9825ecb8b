"""
Flexible manipulator toolkit.

Modal analysis of a single flexible link, its finite-dimensional model,
sliding mode control, functional observer synthesis and closed-loop
simulation.
"""

from .errors import ManipulatorError

__all__ = ["ManipulatorError"]
