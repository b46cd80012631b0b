"""Process-wide numerical context.

Tolerances default to 1e-9 and can be overridden with ``MAXSURF_TOL``.
``MAXSURF_THREADS`` caps numba parallelism and ``MAXSURF_NUMBA=0`` forces the
pure-numpy kernels.
"""
from __future__ import annotations

import dataclasses
import os
from contextlib import contextmanager
from typing import Iterator, Optional


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        value = float(raw)
    except ValueError:
        return default
    return value if value > 0 else default


def use_numba() -> bool:
    flag = os.environ.get("MAXSURF_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


def thread_cap() -> Optional[int]:
    raw = os.environ.get("MAXSURF_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        return None
    return n if n > 0 else None


@dataclasses.dataclass
class Context:
    """Tolerances and calibration constants threaded through the library."""

    tol: float = 1e-9
    # metric normalization of the symmetric space; filled by the curvature probe
    kappa_g: Optional[float] = None
    # Toledo calibration; filled by calibrate_toledo
    kappa_tau: Optional[float] = None


_CONTEXT = Context(tol=_env_float("MAXSURF_TOL", 1e-9))


def get_context() -> Context:
    return _CONTEXT


def default_tol() -> float:
    return _CONTEXT.tol


@contextmanager
def context(**overrides) -> Iterator[Context]:
    """Temporarily override context fields."""
    global _CONTEXT
    saved = _CONTEXT
    _CONTEXT = dataclasses.replace(saved, **overrides)
    try:
        yield _CONTEXT
    finally:
        _CONTEXT = saved
