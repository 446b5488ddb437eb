"""Kernel backend selection.

The compiled kernel is preferred when its extension module importable;
the pure-NumPy kernel is the always-available fallback and the reference
for bit-identical output.  All floating-point constants consumed by a
kernel are computed here, once, so both backends see identical values.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError

try:
    from . import _kernel_cy as _compiled
except (ImportError, ModuleNotFoundError):
    _compiled = None

from . import _kernel_np as _fallback

# Prefilter scale slightly below sqrt(1/2): a state passing the cheap
# componentwise test is guaranteed below the exact |alpha| threshold.
_PREFILTER_FACTOR = 0.70710678


def available_backends() -> tuple[str, ...]:
    if _compiled is not None:
        return ("cython", "numpy")
    return ("numpy",)


def default_backend() -> str:
    return "cython" if _compiled is not None else "numpy"


def get_kernel(name: str = "auto"):
    if name == "auto":
        return _compiled if _compiled is not None else _fallback
    if name == "cython":
        if _compiled is None:
            raise ConfigError("compiled kernel is not available in this installation")
        return _compiled
    if name == "numpy":
        return _fallback
    raise ConfigError(f"unknown backend {name!r}; expected 'auto', 'cython' or 'numpy'")


def kernel_constants(chi: float, gamma: float, epsilon: complex, j_tunnel: float,
                     dt: float, divergence_threshold: float) -> dict:
    """Shared floating-point constants for simulate_block."""
    thr = float(divergence_threshold)
    return dict(
        dt=float(dt),
        g=float(gamma),
        eps=complex(epsilon),
        epsc=complex(epsilon).conjugate(),
        ij=complex(0.0, float(j_tunnel)),
        c2=complex(0.0, 2.0 * chi),
        cm=complex(np.sqrt(np.complex128(complex(0.0, -2.0 * chi)))),
        cp=complex(np.sqrt(np.complex128(complex(0.0, 2.0 * chi)))),
        sdt=math.sqrt(float(dt)),
        pre=thr * _PREFILTER_FACTOR,
        thr2=thr * thr,
    )
