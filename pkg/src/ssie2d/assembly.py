"""Tested boundary-operator blocks for the 2D TM contour-integral method.

All fields carry the e^{+j omega t} convention with outgoing Green function
G = -j H0^(2)(k rho) / 4.  Pulse basis functions on straight segments are
used for both expansion and testing; off-diagonal pair integrals use a 4x4
product Gauss-Legendre rule (the midpoint rule is accurate beyond a few
segment lengths but loses digits once k h grows past ~0.5, which the sweep
band reaches inside dense dielectrics), and the singular self terms are
integrated by analytic log extraction.

With source normals pointing out of the region of interest, the tested
interior identity for a field E and its Poincare-Steklov partner
H = (1/(j omega mu)) dE/dn reads

    (L + U) E = P H

where L = diag(segment lengths), P is the single-layer block
(omega mu / 2) Iint Iint H0^(2)(k rho) dr' dr and U is the double-layer
block (j k / 2) Iint Iint ((r'-r).n' / rho) H1^(2)(k rho) dr' dr.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Medium, SegmentSet
from .specfun import hankel2

__all__ = [
    "Excitation",
    "segment_length_matrix",
    "single_layer",
    "double_layer",
    "exterior_single_layer",
    "plane_wave",
]

_GAUSS_PAIR = np.polynomial.legendre.leggauss(4)
_GAUSS_SELF = np.polynomial.legendre.leggauss(16)
_EULER_GAMMA = 0.5772156649015329


class MeshError(ValueError):
    """Invalid discretization detected during assembly."""


@dataclass(frozen=True)
class Excitation:
    """Unit-amplitude-by-default plane wave, direction of propagation."""

    direction: tuple[float, float] = (1.0, 0.0)
    amplitude: complex = 1.0 + 0.0j

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if abs(np.hypot(d[0], d[1]) - 1.0) > 1e-12:
            raise ValueError("excitation direction must be a unit vector")


def segment_length_matrix(seg: SegmentSet) -> np.ndarray:
    """Diagonal testing matrix L = diag(l_i)."""
    return np.diag(seg.length).astype(np.complex128)


def _check_coincident(obs: SegmentSet, src: SegmentSet, is_self: bool) -> None:
    diff = src.midpoint[None, :, :] - obs.midpoint[:, None, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    if is_self:
        np.fill_diagonal(dist, np.inf)
    if np.any(dist < 1e-12):
        i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
        raise MeshError(
            f"distinct segments {i} and {j} have coincident midpoints")


def _gauss_nodes(seg: SegmentSet):
    """Product-rule nodes (n, q, 2) and weights (n, q) on every segment."""
    x, w = _GAUSS_PAIR
    tang = (seg.end - seg.start) / seg.length[:, None]
    half = 0.5 * seg.length
    pts = seg.midpoint[:, None, :] + x[None, :, None] * half[:, None, None] \
        * tang[:, None, :]                       # (n, q, 2)
    wts = w[None, :] * half[:, None]             # (n, q)
    return pts, wts


def _pair_quadrature(obs: SegmentSet, src: SegmentSet, kernel,
                     skip_diagonal: bool) -> np.ndarray:
    """Product-Gauss double integral of ``kernel`` over all segment pairs.

    ``kernel(d, rho, js)`` receives displacements d = r' - r of shape
    (m, ns, qo, qs, 2), their norms, and the source indices js.  Evaluation
    is chunked over observation segments to bound peak memory; with
    ``skip_diagonal`` the (singular) i = j pairs are left at zero for the
    caller to fill.
    """
    po, wo = _gauss_nodes(obs)
    ps, ws = _gauss_nodes(src)
    n_obs, n_src = len(obs), len(src)
    out = np.zeros((n_obs, n_src), dtype=np.complex128)
    js = np.arange(n_src)
    chunk = max(1, int(4.0e6 // (16 * max(n_src, 1))))
    for lo in range(0, n_obs, chunk):
        hi = min(lo + chunk, n_obs)
        d = ps[None, :, :, None, :] - po[lo:hi, None, None, :, :]
        d = np.swapaxes(d, 2, 3)                 # (m, ns, qo, qs, 2)
        rho = np.sqrt(np.sum(d * d, axis=-1))
        if skip_diagonal:
            for i in range(lo, hi):
                rho[i - lo, i] = 1.0             # dummy, entry overwritten
        vals = np.einsum("mjab,ma,jb->mj", kernel(d, rho, js),
                         wo[lo:hi], ws)
        if skip_diagonal:
            for i in range(lo, hi):
                vals[i - lo, i] = 0.0
        out[lo:hi] = vals
    return out


def single_layer(obs: SegmentSet, src: SegmentSet, medium: Medium,
                 omega: float) -> np.ndarray:
    """Tested single-layer block P, entry (omega mu / 2) Iint Iint H0^(2)(k rho).

    Pass the same object for ``obs`` and ``src`` to get the diagonal
    (log-singular) self entries, which are integrated analytically.
    """
    k = medium.wavenumber(omega)
    pref = 0.5 * omega * medium.mu
    is_self = obs is src
    _check_coincident(obs, src, is_self)

    block = pref * _pair_quadrature(
        obs, src, lambda d, rho, js: hankel2(0, k * rho), skip_diagonal=is_self)
    if is_self:
        block[np.diag_indices(len(obs))] = pref * _self_single_layer(obs.length, k)
    return block


def _self_single_layer(lengths: np.ndarray, k: complex) -> np.ndarray:
    """Iint_0^l Iint_0^l H0^(2)(k|t-t'|) dt dt' for each segment length.

    Reduces to 2 Iint_0^l (l-u) H0^(2)(k u) du; the log singularity
    -j (2/pi) ln(u) is integrated exactly, the smooth remainder by
    16-point Gauss.
    """
    x, w = _GAUSS_SELF
    l = np.asarray(lengths, dtype=float)
    u = 0.5 * l[:, None] * (x[None, :] + 1.0)        # (n, q)
    wt = 0.5 * l[:, None] * w[None, :]
    smooth = hankel2(0, k * u) + 2j / math.pi * np.log(u)
    part = 2.0 * np.sum(wt * (l[:, None] - u) * smooth, axis=1)
    log_part = -2j / math.pi * (l * l * np.log(l) - 1.5 * l * l)
    return part + log_part


def double_layer(obs: SegmentSet, src: SegmentSet, medium: Medium,
                 omega: float) -> np.ndarray:
    """Tested double-layer block U, entry
    (j k / 2) Iint Iint ((r'-r).n'(r') / rho) H1^(2)(k rho) dr' dr.

    ``src.normal`` must point out of the region the identity is written
    for; self entries vanish on flat segments (principal value).
    """
    k = medium.wavenumber(omega)
    pref = 0.5j * k
    is_self = obs is src
    _check_coincident(obs, src, is_self)

    def kernel(d, rho, js):
        proj = np.sum(d * src.normal[js][None, :, None, None, :], axis=-1)
        return (proj / rho) * hankel2(1, k * rho)

    block = pref * _pair_quadrature(obs, src, kernel, skip_diagonal=is_self)
    # flat-segment principal value: the jump is carried by the identity term
    return block


def exterior_single_layer(outer: SegmentSet, background: Medium,
                          omega: float) -> np.ndarray:
    """Radiation operator of the exterior solve.

    Testing E(r) = E_inc(r) - j omega mu_0 Iint J G_0 dr' on the outer
    segments and normalizing by the testing lengths yields the system
    (I - Phat Ys) E = E_inc with

        Phat = -(1/2) L^{-1} P_0,

    P_0 being the background single-layer block of :func:`single_layer`
    (the single-layer potential is continuous across the boundary, so no
    jump term appears here).
    """
    p0 = single_layer(outer, outer, background, omega)
    return -0.5 * p0 / outer.length[:, None]


def plane_wave(points: np.ndarray, background: Medium, omega: float,
               exc: Excitation) -> np.ndarray:
    """Incident plane-wave samples amplitude * exp(-j k0 d.r)."""
    k0 = background.wavenumber(omega)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    phase = pts @ np.asarray(exc.direction, dtype=float)
    return exc.amplitude * np.exp(-1j * k0 * phase)
