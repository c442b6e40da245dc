"""Lyapunov exponents, hypoellipticity certificates, and control replays for
noisy non-dissipative systems on flat tori."""
from .backend import NAME as BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
