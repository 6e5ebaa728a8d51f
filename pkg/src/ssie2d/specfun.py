"""Cylinder functions of order 0 and 1 for complex arguments.

Every boundary-integral kernel in this package reduces to J0, J1, Y0, Y1
and the Hankel functions of the second kind H0^(2), H1^(2), evaluated at
k*rho where k may be complex (lossy media, Im k <= 0) and rho > 0.

Evaluation is delegated to scipy.special (AMOS), which covers the contract
domain (|z| <= 1e4, Re z > 0 for the singular kinds) with headroom over the
accuracy requirements here.  The guards below turn silent domain abuse into
errors instead of NaNs.

The e^{+j omega t} time convention is used throughout the package, so
H^(2) = J - jY is the outgoing cylindrical wave.
"""

from __future__ import annotations

import numpy as np
from scipy import special as _sp

__all__ = ["bessel_j", "bessel_y", "hankel2", "DomainError"]

#: largest |z| the package promises to evaluate accurately
MAX_ABS_ARG = 1.0e4


class DomainError(ValueError):
    """Argument outside the supported domain of a cylinder function."""


def _check_order(order: int) -> None:
    if order not in (0, 1):
        raise DomainError(f"order must be 0 or 1, got {order!r}")


def _as_complex(z) -> np.ndarray:
    arr = np.asarray(z, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite argument")
    return arr


def _check_result(w: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(w)):
        raise DomainError(f"{name} produced non-finite values inside the contract domain")
    return w


def bessel_j(order: int, z):
    """Bessel function J_order(z) of the first kind, complex argument.

    Accepts scalars or arrays.  Contract domain: order in {0, 1} and
    |z| <= 1e4.
    """
    _check_order(order)
    arr = _as_complex(z)
    if np.any(np.abs(arr) > MAX_ABS_ARG):
        raise DomainError(f"|z| exceeds {MAX_ABS_ARG:g}")
    out = _check_result(_sp.jv(order, arr), "bessel_j")
    return out if isinstance(z, np.ndarray) else complex(out)


def bessel_y(order: int, z):
    """Bessel function Y_order(z) of the second kind, complex argument.

    Requires Re(z) > 0 (principal branch of the logarithm, no branch-cut
    crossing) and 0 < |z| <= 1e4.
    """
    _check_order(order)
    arr = _as_complex(z)
    a = np.abs(arr)
    if np.any(a == 0.0):
        raise DomainError("Y_n is singular at z = 0")
    if np.any(arr.real <= 0.0):
        raise DomainError("bessel_y requires Re(z) > 0")
    if np.any(a > MAX_ABS_ARG):
        raise DomainError(f"|z| exceeds {MAX_ABS_ARG:g}")
    out = _check_result(_sp.yv(order, arr), "bessel_y")
    return out if isinstance(z, np.ndarray) else complex(out)


def hankel2(order: int, z):
    """Hankel function of the second kind, H_order^(2)(z) = J - jY.

    Outgoing cylindrical wave under the e^{+j omega t} convention.  Same
    domain restrictions as :func:`bessel_y`.
    """
    _check_order(order)
    arr = _as_complex(z)
    a = np.abs(arr)
    if np.any(a == 0.0):
        raise DomainError("H_n^(2) is singular at z = 0")
    if np.any(arr.real <= 0.0):
        raise DomainError("hankel2 requires Re(z) > 0")
    if np.any(a > MAX_ABS_ARG):
        raise DomainError(f"|z| exceeds {MAX_ABS_ARG:g}")
    out = _check_result(_sp.hankel2(order, arr), "hankel2")
    return out if isinstance(z, np.ndarray) else complex(out)
