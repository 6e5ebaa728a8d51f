"""Ground-truth references: analytic cylinder series and a PMCHWT solver.

The cylindrical-harmonic series gives the exact TM echo width of a single
homogeneous circular cylinder in a lossless background; it is the external
oracle for the whole pipeline.

The PMCHWT-style reference solver keeps both the boundary electric field E
and the tangential magnetic field H (equivalently electric and magnetic
current densities) as unknowns on every piece, outer and shared.  For each
object the interior tested identity (L + U) E = P H is written on all its
pieces; for the exterior background region the total-field identity

    L E + U0 E + P0 H = 2 L E_inc

is written on the outer pieces (object-outward normals).  Field continuity
is built in because E and H are single valued per piece, which yields a
square system with 2 x (total segments) unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from . import assembly
from .assembly import Excitation
from .geometry import Medium, Scene, SegmentSet
from .solver import cond2, lu_solve
from .specfun import hankel2

__all__ = [
    "PmchwtSolution",
    "mie_cylinder_rcs",
    "pmchwt_solve",
    "pmchwt_rcs",
    "pmchwt_near_field",
]


class SeriesConvergenceError(RuntimeError):
    """Cylindrical-harmonic series failed to converge."""


def mie_cylinder_rcs(radius: float, medium: Medium, background: Medium,
                     frequency_hz: float, angles) -> np.ndarray:
    """Bistatic echo width of a homogeneous circular cylinder, TM plane wave
    incident along +x.

    sigma(phi) = (4 / k0) |a_0 + 2 sum_n a_n cos(n phi)|^2 with the usual
    scattering coefficients of the penetrable cylinder.  The background must
    be lossless; the cylinder may be lossy.
    """
    if radius <= 0.0:
        raise ValueError("radius must be > 0")
    if not background.is_lossless:
        raise ValueError("echo width requires a lossless background")
    omega = 2.0 * np.pi * frequency_hz
    k0 = background.wavenumber(omega).real
    k1 = medium.wavenumber(omega)
    x0 = k0 * radius
    x1 = k1 * radius
    alpha = (k1 * background.mu) / (k0 * medium.mu)

    n_terms = int(np.ceil(k0 * radius)) + 20
    coeffs: list[complex] = []
    n = 0
    while True:
        q = alpha * _sp.jvp(n, x1) / _sp.jv(n, x1)
        a_n = (q * _sp.jv(n, x0) - _sp.jvp(n, x0)) \
            / (_sp.h2vp(n, x0) - q * _sp.hankel2(n, x0))
        coeffs.append(complex(a_n))
        scale = max(abs(c) for c in coeffs)
        if n >= n_terms and (scale == 0.0 or abs(a_n) < 1e-12 * scale):
            break
        n += 1
        if n > 10 * n_terms:
            raise SeriesConvergenceError(
                f"series did not converge within {10 * n_terms} terms")

    ang = np.atleast_1d(np.asarray(angles, dtype=float))
    total = np.full(ang.shape, coeffs[0], dtype=np.complex128)
    for m in range(1, len(coeffs)):
        total += 2.0 * coeffs[m] * np.cos(m * ang)
    return (4.0 / k0) * np.abs(total) ** 2


# ---------------------------------------------------------------------------
# PMCHWT reference solver
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PmchwtSolution:
    """Currents on all pieces: J = tangential H (A/m), M = boundary E (V/m),
    both in the piece reference orientation and scene piece order."""

    j_all: np.ndarray
    m_all: np.ndarray
    n_unknowns: int
    cond_system: float
    piece_order: tuple[str, ...]
    amplitude: complex


def _piece_offsets(scene: Scene) -> dict[str, slice]:
    offs: dict[str, slice] = {}
    off = 0
    for pid in scene.piece_order:
        n = len(scene.pieces[pid])
        offs[pid] = slice(off, off + n)
        off += n
    return offs


def pmchwt_solve(scene: Scene, exc: Excitation) -> PmchwtSolution:
    """Solve the two-source reference formulation on all pieces."""
    omega = scene.omega
    offs = _piece_offsets(scene)
    n = scene.n_total_segments
    mat = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    rhs = np.zeros(2 * n, dtype=np.complex128)

    row = 0
    # interior identities, one row block per (object, observation piece)
    for obj in scene.objects:
        segs = {pid: scene.piece_segments(pid, oriented_for=obj.name)
                for pid in obj.piece_ids}
        for p in obj.piece_ids:
            rp = slice(row, row + len(segs[p]))
            row += len(segs[p])
            for q in obj.piece_ids:
                cq = offs[q]
                ae = assembly.double_layer(segs[p], segs[q], obj.medium, omega)
                if p == q:
                    ae = ae + assembly.segment_length_matrix(segs[p])
                t = obj.normal_sign(q) * scene.reference_sign(q)
                ah = t * assembly.single_layer(segs[p], segs[q], obj.medium, omega)
                mat[rp, cq] += ae
                mat[rp, cq.start + n:cq.stop + n] -= ah

    # exterior identity on the outer pieces: (L - U0) E + P0 H = 2 L E_inc
    # (the double layer enters with the opposite sign here because the
    # object-outward normal points into the exterior domain)
    bg = scene.background
    outer = scene.outer_piece_ids
    osegs = {pid: scene.piece_segments(pid) for pid in outer}
    for p in outer:
        rp = slice(row, row + len(osegs[p]))
        row += len(osegs[p])
        lp = assembly.segment_length_matrix(osegs[p])
        for q in outer:
            cq = offs[q]
            ae = -assembly.double_layer(osegs[p], osegs[q], bg, omega)
            if p == q:
                ae = ae + lp
            ah = assembly.single_layer(osegs[p], osegs[q], bg, omega)
            mat[rp, cq] += ae
            mat[rp, cq.start + n:cq.stop + n] += ah
        e_inc = assembly.plane_wave(osegs[p].midpoint, bg, omega, exc)
        rhs[rp] = 2.0 * osegs[p].length * e_inc

    if row != 2 * n:
        raise AssertionError("row bookkeeping mismatch in pmchwt_solve")

    x = lu_solve(mat, rhs, name="PMCHWT system")
    return PmchwtSolution(
        j_all=x[n:], m_all=x[:n], n_unknowns=2 * n,
        cond_system=cond2(mat), piece_order=scene.piece_order,
        amplitude=exc.amplitude)


def _outer_fields(sol: PmchwtSolution, scene: Scene):
    offs = _piece_offsets(scene)
    idx = np.concatenate([np.arange(offs[p].start, offs[p].stop)
                          for p in scene.outer_piece_ids])
    return sol.m_all[idx], sol.j_all[idx]


def pmchwt_rcs(sol: PmchwtSolution, scene: Scene, angles) -> np.ndarray:
    """Bistatic echo width from the exterior-facing currents.

    Far-field amplitude per outer segment combines the electric-current
    (tangential H) and magnetic-current (boundary E) contributions:

        F(phi) = sum_j l_j e^{j k0 r_hat . m_j}
                 [ -(omega mu0 / 4) H_j + (k0 / 4)(r_hat . n_j) E_j ]

    and sigma = (4 / k0) |F|^2 / |E_inc|^2.
    """
    bg = scene.background
    if not bg.is_lossless:
        raise ValueError("echo width requires a lossless background")
    omega = scene.omega
    k0 = bg.wavenumber(omega).real
    seg = scene.outer_segments()
    e_b, h_b = _outer_fields(sol, scene)

    ang = np.atleast_1d(np.asarray(angles, dtype=float))
    rhat = np.column_stack([np.cos(ang), np.sin(ang)])
    phase = np.exp(1j * k0 * (rhat @ seg.midpoint.T))       # (na, ns)
    rn = rhat @ seg.normal.T                                 # (na, ns)
    amp = phase * (-(omega * bg.mu / 4.0) * h_b[None, :]
                   + (k0 / 4.0) * rn * e_b[None, :]) * seg.length[None, :]
    f = np.sum(amp, axis=1)
    return (4.0 / k0) * np.abs(f) ** 2 / abs(sol.amplitude) ** 2


def pmchwt_near_field(sol: PmchwtSolution, scene: Scene, points,
                      exc: Excitation) -> np.ndarray:
    """Total E at exterior points from the exterior-region representation."""
    bg = scene.background
    omega = scene.omega
    k0 = bg.wavenumber(omega)
    seg = scene.outer_segments()
    e_b, h_b = _outer_fields(sol, scene)
    pts = np.atleast_2d(np.asarray(points, dtype=float))

    # E_s(r) = sum_j l_j [ -(omega mu0/4) H0(k rho) H_j
    #                      + (j k0/4) ((r'-r).n'/rho) H1(k rho) E_j ]
    d = seg.midpoint[None, :, :] - pts[:, None, :]
    rho = np.linalg.norm(d, axis=2)
    proj = np.sum(d * seg.normal[None, :, :], axis=2)
    h0 = hankel2(0, k0 * rho)
    h1 = hankel2(1, k0 * rho)
    e_sc = np.sum(
        (-(omega * bg.mu / 4.0) * h0 * h_b[None, :]
         + (0.25j * k0) * (proj / rho) * h1 * e_b[None, :])
        * seg.length[None, :], axis=1)
    return assembly.plane_wave(pts, bg, omega, exc) + e_sc
