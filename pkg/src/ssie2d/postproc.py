"""Physical outputs: echo width curves, near fields and error metrics."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import assembly, operators, reference, solver
from .assembly import Excitation
from .geometry import Medium, Scene, SegmentSet, build_scene
from .specfun import hankel2

__all__ = [
    "RcsCurve",
    "bistatic_rcs",
    "monostatic_sweep",
    "near_field",
    "relative_error_rcs",
    "near_field_relative_error",
    "solve_scene",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RcsCurve:
    """Echo width samples over angles (bistatic) or frequencies (monostatic)."""

    angles: np.ndarray          # rad; backscatter angle repeated for sweeps
    sigma: np.ndarray           # echo width, m
    kind: str                   # "bistatic" | "monostatic"
    frequency_hz: np.ndarray    # scalar array (bistatic) or per-point (sweep)

    @property
    def sigma_db(self) -> np.ndarray:
        """10 log10(sigma / 1 m); -inf where sigma = 0."""
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.sigma)


def bistatic_rcs(j_outer: np.ndarray, outer: SegmentSet, background: Medium,
                 omega: float, angles, e_inc_amp: complex = 1.0 + 0.0j) -> RcsCurve:
    """Bistatic echo width radiated by the equivalent current J.

    The far-field amplitude per segment is -(omega mu0 / 4) J l
    e^{j k0 (x cos phi + y sin phi)}; normalizing by the incident amplitude,

        sigma(phi) = (4 / k0) |sum_n F_n(phi)|^2 / |E_inc|^2.
    """
    if not background.is_lossless:
        raise ValueError("echo width requires a lossless background")
    omega = float(omega)
    k0 = background.wavenumber(omega).real
    ang = np.atleast_1d(np.asarray(angles, dtype=float))
    rhat = np.column_stack([np.cos(ang), np.sin(ang)])
    phase = np.exp(1j * k0 * (rhat @ outer.midpoint.T))
    f = -(omega * background.mu / 4.0) * np.sum(
        phase * (np.asarray(j_outer) * outer.length)[None, :], axis=1)
    sigma = (4.0 / k0) * np.abs(f) ** 2 / abs(e_inc_amp) ** 2
    freq = np.asarray(omega / (2.0 * np.pi))
    return RcsCurve(angles=ang, sigma=sigma, kind="bistatic", frequency_hz=freq)


def solve_scene(scene: Scene, exc: Excitation):
    """Full pipeline on one scene: admittance operators, exterior solve.

    Returns (SolveOutput, Ys operator, Phat matrix).
    """
    y = operators.build_Y(scene)
    yhat = operators.build_Yhat(scene)
    ys = operators.build_Ys(y, yhat)
    outer = scene.outer_segments()
    phat = assembly.exterior_single_layer(outer, scene.background, scene.omega)
    e_inc = assembly.plane_wave(outer.midpoint, scene.background, scene.omega, exc)
    out = solver.solve_scattering(ys, phat, e_inc, scene_digest=scene.digest,
                                  frequency_hz=scene.frequency_hz)
    return out, ys, phat


def _backscatter_angle(exc: Excitation) -> float:
    d = exc.direction
    return float(np.arctan2(d[1], d[0]) + np.pi)


def monostatic_sweep(config: dict, f_start: float, f_end: float,
                     n_points: int, exc: Excitation,
                     compare_pmchwt: bool = False):
    """Backscatter echo width over a frequency band, fixed h_target mesh.

    Returns (RcsCurve, reference sigma array or None, failures) where
    failures is a list of (frequency, message); failed frequencies carry
    NaN in the curve and do not abort the sweep.

    The environment variable SSIE2D_THREADS caps the number of concurrent
    per-frequency solves (default 1).
    """
    if n_points < 2:
        raise ValueError("sweep needs n_points >= 2")
    freqs = np.linspace(float(f_start), float(f_end), int(n_points))
    base = build_scene(config)
    angle = _backscatter_angle(exc)
    sigma = np.full(len(freqs), np.nan)
    sigma_ref = np.full(len(freqs), np.nan) if compare_pmchwt else None
    failures: list[tuple[float, str]] = []

    def one(i: int):
        f = freqs[i]
        scene = base.at_frequency(f)
        out, _, _ = solve_scene(scene, exc)
        curve = bistatic_rcs(out.j_outer, scene.outer_segments(),
                             scene.background, scene.omega, [angle],
                             e_inc_amp=exc.amplitude)
        val_ref = None
        if compare_pmchwt:
            sol = reference.pmchwt_solve(scene, exc)
            val_ref = reference.pmchwt_rcs(sol, scene, [angle])[0]
        return float(curve.sigma[0]), val_ref

    workers = max(1, int(os.environ.get("SSIE2D_THREADS", "1")))
    if workers == 1:
        results = map(lambda i: (i, _try(one, i, freqs, failures)), range(len(freqs)))
        results = list(results)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda i: (i, _try(one, i, freqs, failures)), range(len(freqs))))
    for i, res in results:
        if res is None:
            continue
        sigma[i] = res[0]
        if compare_pmchwt and res[1] is not None:
            sigma_ref[i] = res[1]

    curve = RcsCurve(angles=np.full(len(freqs), angle), sigma=sigma,
                     kind="monostatic", frequency_hz=freqs)
    return curve, sigma_ref, failures


def _try(fn, i, freqs, failures):
    try:
        return fn(i)
    except Exception as exc:  # per-frequency failures are recorded, not fatal
        logger.warning("sweep point %g Hz failed: %s", freqs[i], exc)
        failures.append((float(freqs[i]), str(exc)))
        return None


def near_field(j_outer: np.ndarray, outer: SegmentSet, background: Medium,
               omega: float, exc: Excitation, points,
               scene: Scene | None = None) -> np.ndarray:
    """Total E at exterior points:
    E(r) = E_inc(r) - (omega mu0 / 4) sum_n J_n Iint_n H0^(2)(k0 rho) dr'.

    Midpoint source rule beyond 3 segment lengths, 4-point Gauss closer in.
    Points inside an object or closer than one segment length to the
    boundary are rejected (ValueError listing the offending indices); pass
    ``scene`` to enable the inside-object check.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    k0 = background.wavenumber(omega)
    j = np.asarray(j_outer, dtype=np.complex128)

    d = outer.midpoint[None, :, :] - pts[:, None, :]
    rho = np.linalg.norm(d, axis=2)
    min_dist = np.min(rho, axis=1)
    bad = min_dist <= np.max(outer.length)
    if scene is not None:
        bad |= scene.points_inside(pts)
        bad |= scene.distance_to_boundary(pts) <= np.max(outer.length)
    if np.any(bad):
        raise ValueError(
            f"points too near or inside an object: indices {np.nonzero(bad)[0].tolist()}")

    contrib = outer.length[None, :] * hankel2(0, k0 * rho)

    near = rho <= 3.0 * outer.length[None, :]
    if np.any(near):
        ip, js = np.nonzero(near)
        x, w = np.polynomial.legendre.leggauss(4)
        tang = (outer.end - outer.start) / outer.length[:, None]
        half = 0.5 * outer.length[js]
        qp = outer.midpoint[js][:, None, :] \
            + x[None, :, None] * half[:, None, None] * tang[js][:, None, :]
        qw = w[None, :] * half[:, None]
        rr = np.linalg.norm(qp - pts[ip][:, None, :], axis=2)
        contrib[ip, js] = np.sum(qw * hankel2(0, k0 * rr), axis=1)

    e_sc = -(omega * background.mu / 4.0) * contrib @ j
    return assembly.plane_wave(pts, background, omega, exc) + e_sc


def relative_error_rcs(calc: RcsCurve, ref: RcsCurve) -> float:
    """Squared-magnitude relative error on linear echo width:
    sum |sigma_calc - sigma_ref|^2 / sum |sigma_ref|^2."""
    if calc.kind != ref.kind:
        raise ValueError("curves of different kind")
    if calc.angles.shape != ref.angles.shape or \
            not np.allclose(calc.angles, ref.angles, atol=1e-12):
        raise ValueError("angle grids differ")
    if calc.frequency_hz.shape != ref.frequency_hz.shape or \
            not np.allclose(calc.frequency_hz, ref.frequency_hz):
        raise ValueError("frequency grids differ")
    denom = float(np.sum(np.abs(ref.sigma) ** 2))
    if denom == 0.0:
        raise ValueError("all-zero reference curve")
    return float(np.sum(np.abs(calc.sigma - ref.sigma) ** 2) / denom)


def near_field_relative_error(calc: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Element-wise |E_calc - E_ref| / |E_ref|; NaN where the reference
    vanishes (excluded from summaries via nan-aware reductions)."""
    calc = np.asarray(calc)
    ref = np.asarray(ref)
    if calc.shape != ref.shape:
        raise ValueError("point grids differ")
    mag = np.abs(ref)
    out = np.full(calc.shape, np.nan)
    ok = mag > 0.0
    out[ok] = np.abs(calc[ok] - ref[ok]) / mag[ok]
    return out
