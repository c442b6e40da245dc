"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``DICHOTOMY_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _core_py

NAME = "python"
advance = _core_py.advance

if os.environ.get("DICHOTOMY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        advance = _core.advance
        NAME = "cython"


def get(name: str | None = None):
    """Return the ``advance`` function of a named backend ("cython" or "python")."""
    if name is None:
        return advance
    if name == "python":
        return _core_py.advance
    if name == "cython":
        from . import _core  # type: ignore[attr-defined]

        return _core.advance
    raise ValueError(f"unknown backend {name!r}")
