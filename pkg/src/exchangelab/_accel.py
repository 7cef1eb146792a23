"""Backend selection for the hot numerical kernels.

The compiled numba path is used when numba imports cleanly and the
environment variable ``EXCHANGELAB_DISABLE_JIT`` is unset or ``0``.
Every compiled kernel has a numpy twin with identical semantics, so the
flag only changes speed.
"""

from __future__ import annotations

import os

DISABLE_ENV = "EXCHANGELAB_DISABLE_JIT"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def jit_disabled_by_env() -> bool:
    return os.environ.get(DISABLE_ENV, "0").strip().lower() not in ("", "0", "false", "no")


def default_backend() -> str:
    """Return ``"numba"`` or ``"numpy"`` according to availability and the env flag."""
    if HAVE_NUMBA and not jit_disabled_by_env():
        return "numba"
    return "numpy"


def resolve_backend(backend: str | None) -> str:
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


def njit(func):
    """Compile ``func`` with numba when available; otherwise return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)
