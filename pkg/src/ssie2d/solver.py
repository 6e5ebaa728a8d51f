"""Dense complex linear algebra and the exterior scattering solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

__all__ = [
    "SingularMatrixError",
    "SolveOutput",
    "lu_solve",
    "cond2",
    "solve_scattering",
]


class SingularMatrixError(np.linalg.LinAlgError):
    """A factorization hit an exactly singular pivot."""

    def __init__(self, name: str, pivot: int, cond_estimate: float):
        self.pivot = pivot
        self.cond_estimate = cond_estimate
        super().__init__(
            f"{name}: exactly singular pivot at index {pivot} "
            f"(condition estimate {cond_estimate:.3e})")


def lu_solve(a: np.ndarray, b: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Solve a x = b by LU with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides.  An exactly zero
    pivot raises :class:`SingularMatrixError` with the pivot index and a
    1-norm condition estimate of the factorable part.
    """
    a = np.ascontiguousarray(a, dtype=np.complex128)
    lu, piv = sla.lu_factor(a, check_finite=True)
    diag = np.abs(np.diagonal(lu))
    zero = np.nonzero(diag == 0.0)[0]
    if zero.size:
        nz = diag[diag > 0]
        est = float(np.max(nz) / np.min(nz)) if nz.size else np.inf
        raise SingularMatrixError(name, int(zero[0]), est)
    return sla.lu_solve((lu, piv), b, check_finite=True)


def cond2(a: np.ndarray) -> float:
    """2-norm condition number sigma_max / sigma_min by full SVD.

    Returns inf when the smallest singular value is exactly zero.
    """
    a = np.asarray(a)
    if a.size == 0:
        raise ValueError("cond2 of an empty matrix")
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] == 0.0:
        return float(np.inf)
    return float(s[0] / s[-1])


@dataclass(frozen=True)
class SolveOutput:
    """Boundary solution of the exterior scattering problem."""

    e_outer: np.ndarray      # total E on outer segments, V/m
    j_outer: np.ndarray      # equivalent electric current density, A/m
    cond_final: float        # cond2 of the solved system matrix
    scene_digest: str = ""
    frequency_hz: float = 0.0


def solve_scattering(ys: np.ndarray, phat: np.ndarray, e_inc: np.ndarray,
                     scene_digest: str = "", frequency_hz: float = 0.0
                     ) -> SolveOutput:
    """Solve (I - Phat Ys) E = E_inc, then J = Ys E.

    ``ys`` may be a plain matrix or a SurfaceOperator-like object with a
    ``matrix`` attribute; ``phat`` is the exterior radiation operator of
    :func:`ssie2d.assembly.exterior_single_layer`.
    """
    ys_mat = getattr(ys, "matrix", ys)
    e_inc = np.asarray(e_inc, dtype=np.complex128)
    n = ys_mat.shape[0]
    if phat.shape != (n, n) or e_inc.shape != (n,):
        raise ValueError("dimension mismatch between Ys, Phat and E_inc")
    system = np.eye(n, dtype=np.complex128) - phat @ ys_mat
    e = lu_solve(system, e_inc, name="exterior system I - Phat Ys")
    j = ys_mat @ e
    return SolveOutput(e_outer=e, j_outer=j, cond_final=cond2(system),
                       scene_digest=scene_digest, frequency_hz=frequency_hz)
