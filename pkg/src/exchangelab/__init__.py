"""Simulation laboratory for two-particle exchange-phase measurements.

``fock`` holds the second-quantized two-particle algebra, ``ramsey`` the
neutral-atom interferometer sequences, ``zeeman`` the gradient-addressed
pulse simulation and ``rotor`` the trapped-ion adiabatic exchange.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.0.0"

from . import errors, fock, ramsey, rotor, zeeman  # noqa: E402

__all__ = ["errors", "fock", "ramsey", "rotor", "zeeman", "__version__"]
