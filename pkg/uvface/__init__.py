"""
uvface - differentiable UV-space face rendering and morphable-model fitting.

This package renders a face from a 3D morphable model through UV-space shape
and albedo maps, back-propagates image losses to every parameter, and fits
model, camera and lighting parameters to images by analysis-by-synthesis.
"""

__version__ = "0.1.0"

from .main import app

__all__ = ["app", "__version__"]
