"""2D TM electromagnetic scattering by composite penetrable objects.

Single-source surface integral equation with a differential surface
admittance operator on the outermost boundaries, plus a PMCHWT-style
reference solver and an analytic series oracle for homogeneous circular
cylinders.
"""

from .assembly import Excitation
from .geometry import Medium, Scene, SceneConfigError, acspw, build_scene, load_config

__all__ = [
    "Excitation",
    "Medium",
    "Scene",
    "SceneConfigError",
    "acspw",
    "build_scene",
    "load_config",
]

__version__ = "0.1.0"
