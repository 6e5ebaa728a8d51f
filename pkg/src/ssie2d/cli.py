"""Batch front end: solve / sweep / converge / cond commands.

Outputs are CSV files with a header row plus a machine-readable
``summary.json``; floats are printed in scientific notation with 12
significant digits so identical runs produce byte-identical CSV bodies.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import assembly, operators, reference
from .assembly import Excitation
from .geometry import Scene, SceneConfigError, acspw, build_scene, load_config
from .postproc import (RcsCurve, bistatic_rcs, monostatic_sweep, near_field,
                       relative_error_rcs, solve_scene)

logger = logging.getLogger(__name__)

#: summary.json structure (validated by the test suite with jsonschema)
SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scene_digest", "command", "n_unknowns_ssie",
                 "acspw", "wall_time_s", "outputs"],
    "properties": {
        "schema_version": {"const": 1},
        "scene_digest": {"type": "string"},
        "command": {"type": "string"},
        "frequency_hz": {"type": ["number", "null"]},
        "n_unknowns_ssie": {"type": "integer"},
        "n_unknowns_pmchwt": {"type": ["integer", "null"]},
        "cond_final": {"type": ["number", "null"]},
        "cond_pmchwt": {"type": ["number", "null"]},
        "acspw": {"type": "number"},
        "wall_time_s": {"type": "number"},
        "re_vs_reference": {"type": ["number", "null"]},
        "failures": {"type": "array"},
        "outputs": {"type": "array", "items": {"type": "string"}},
    },
    "additionalProperties": False,
}


def _fmt(x: float) -> str:
    return f"{x:.11e}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_range(spec: str, name: str) -> np.ndarray:
    try:
        start, end, count = spec.split(":")
        start, end, count = float(start), float(end), int(count)
    except ValueError as exc:
        raise SystemExit(f"error: {name} must be START:END:N, got {spec!r}") from exc
    if count < 1:
        raise SystemExit(f"error: {name} needs N >= 1")
    return np.linspace(start, end, count)


def _angles(args) -> np.ndarray:
    return np.radians(_parse_range(args.angles, "--angles"))


def _summary(out_dir: Path, **fields) -> None:
    payload = {
        "schema_version": 1,
        "frequency_hz": None,
        "n_unknowns_pmchwt": None,
        "cond_final": None,
        "cond_pmchwt": None,
        "re_vs_reference": None,
        "failures": [],
    }
    payload.update(fields)
    (out_dir / "summary.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_scene(args) -> tuple[dict, Scene]:
    cfg = load_config(args.config)
    return cfg, build_scene(cfg)


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    cfg, scene = _load_scene(args)
    exc = Excitation()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    result, ys, phat = solve_scene(scene, exc)
    ang = _angles(args)
    curve = bistatic_rcs(result.j_outer, scene.outer_segments(),
                         scene.background, scene.omega, ang,
                         e_inc_amp=exc.amplitude)
    _write_csv(out_dir / "rcs_bistatic.csv",
               ["angle_deg", "sigma_m", "sigma_db"],
               zip(np.degrees(ang).tolist(), curve.sigma.tolist(),
                   curve.sigma_db.tolist()))
    outputs = ["rcs_bistatic.csv"]

    n_pm = None
    cond_pm = None
    if args.compare == "pmchwt":
        sol = reference.pmchwt_solve(scene, exc)
        n_pm = sol.n_unknowns
        cond_pm = sol.cond_system
        sig = reference.pmchwt_rcs(sol, scene, ang)
        _write_csv(out_dir / "rcs_bistatic_pmchwt.csv",
                   ["angle_deg", "sigma_m", "sigma_db"],
                   zip(np.degrees(ang).tolist(), sig.tolist(),
                       (10 * np.log10(np.maximum(sig, 1e-300))).tolist()))
        outputs.append("rcs_bistatic_pmchwt.csv")

    if args.nearfield_grid:
        pts = _nearfield_points(args.nearfield_grid, scene)
        e = near_field(result.j_outer, scene.outer_segments(), scene.background,
                       scene.omega, exc, pts, scene=scene)
        _write_csv(out_dir / "nearfield.csv",
                   ["x", "y", "re_E", "im_E", "abs_E"],
                   zip(pts[:, 0].tolist(), pts[:, 1].tolist(),
                       e.real.tolist(), e.imag.tolist(),
                       np.abs(e).tolist()))
        outputs.append("nearfield.csv")

    _summary(out_dir, scene_digest=scene.digest, command="solve",
             frequency_hz=scene.frequency_hz,
             n_unknowns_ssie=scene.n_outer_segments,
             n_unknowns_pmchwt=n_pm, cond_final=result.cond_final,
             cond_pmchwt=cond_pm, acspw=acspw(scene),
             wall_time_s=time.perf_counter() - t0, outputs=outputs)
    return 0


def _nearfield_points(spec: str, scene: Scene) -> np.ndarray:
    try:
        x0, x1, nx, y0, y1, ny = spec.split(":")
        xs = np.linspace(float(x0), float(x1), int(nx))
        ys = np.linspace(float(y0), float(y1), int(ny))
    except ValueError as exc:
        raise SystemExit(
            f"error: --nearfield-grid must be X0:X1:NX:Y0:Y1:NY, got {spec!r}"
        ) from exc
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    margin = 1.5 * np.max(scene.outer_segments().length)
    keep = (~scene.points_inside(pts)) & (scene.distance_to_boundary(pts) > margin)
    return pts[keep]


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    cfg, scene = _load_scene(args)
    exc = Excitation()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    compare = args.compare == "pmchwt"
    curve, sig_ref, failures = monostatic_sweep(
        cfg, args.fstart, args.fend, args.npoints, exc, compare_pmchwt=compare)

    header = ["freq_hz", "sigma_m", "sigma_db"]
    cols = [curve.frequency_hz.tolist(), curve.sigma.tolist(),
            curve.sigma_db.tolist()]
    if compare:
        header.append("sigma_pmchwt_m")
        cols.append(sig_ref.tolist())
    _write_csv(out_dir / "rcs_monostatic.csv", header, zip(*cols))

    re = None
    if compare:
        ok = ~(np.isnan(curve.sigma) | np.isnan(sig_ref))
        if np.any(ok) and np.sum(np.abs(sig_ref[ok]) ** 2) > 0:
            re = float(np.sum(np.abs(curve.sigma[ok] - sig_ref[ok]) ** 2)
                       / np.sum(np.abs(sig_ref[ok]) ** 2))
    _summary(out_dir, scene_digest=scene.digest, command="sweep",
             n_unknowns_ssie=scene.n_outer_segments,
             acspw=acspw(scene), wall_time_s=time.perf_counter() - t0,
             re_vs_reference=re,
             failures=[{"frequency_hz": f, "message": m} for f, m in failures],
             outputs=["rcs_monostatic.csv"])
    return 0


def cmd_converge(args) -> int:
    t0 = time.perf_counter()
    cfg, scene0 = _load_scene(args)
    exc = Excitation()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        targets = sorted(float(v) for v in args.acspw_list.split(","))
    except ValueError as exc_:
        raise SystemExit(f"error: --acspw-list must be comma separated numbers") from exc_
    if len(targets) < 2:
        raise SystemExit("error: --acspw-list needs at least two values")

    ang = _angles(args)
    lam0 = scene0.wavelength0

    if args.reference == "series":
        med, radius = _homogeneous_cylinder(cfg)
        sig_ref = reference.mie_cylinder_rcs(radius, med, scene0.background,
                                             scene0.frequency_hz, ang)
    else:
        finest = dict(cfg)
        finest["h_target_m"] = lam0 / max(targets)
        scene_ref = build_scene(finest)
        sol = reference.pmchwt_solve(scene_ref, exc)
        sig_ref = reference.pmchwt_rcs(sol, scene_ref, ang)
    ref_curve = RcsCurve(angles=ang, sigma=sig_ref, kind="bistatic",
                         frequency_hz=np.asarray(scene0.frequency_hz))

    rows = []
    for target in targets:
        c = dict(cfg)
        c["h_target_m"] = lam0 / target
        scene = build_scene(c)
        result, _, _ = solve_scene(scene, exc)
        curve = bistatic_rcs(result.j_outer, scene.outer_segments(),
                             scene.background, scene.omega, ang,
                             e_inc_amp=exc.amplitude)
        rows.append((acspw(scene), relative_error_rcs(curve, ref_curve)))

    _write_csv(out_dir / "convergence.csv", ["acspw", "re"], rows)
    _summary(out_dir, scene_digest=scene0.digest, command="converge",
             n_unknowns_ssie=scene0.n_outer_segments, acspw=acspw(scene0),
             wall_time_s=time.perf_counter() - t0, outputs=["convergence.csv"])
    return 0


def _homogeneous_cylinder(cfg: dict):
    """The series reference only covers a single full-circle object."""
    objs = cfg.get("objects", [])
    if len(objs) != 1 or cfg.get("shared"):
        raise SystemExit(
            "error: --reference series requires a single homogeneous object")
    contour = objs[0].get("contour", [])
    if len(contour) != 1 or contour[0].get("type") != "arc" \
            or abs(contour[0]["angle_end_deg"] - contour[0]["angle_start_deg"]
                   - 360.0) > 1e-9:
        raise SystemExit(
            "error: --reference series requires a single full-circle contour")
    med = objs[0]["medium"]
    from .geometry import Medium

    return Medium(eps_rel=float(med["eps_rel"]),
                  sigma=float(med.get("sigma", 0.0)),
                  mu_rel=float(med.get("mu_rel", 1.0))), float(contour[0]["radius"])


def cmd_cond(args) -> int:
    t0 = time.perf_counter()
    cfg, scene = _load_scene(args)
    exc = Excitation()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    result, ys, phat = solve_scene(scene, exc)
    sol = reference.pmchwt_solve(scene, exc)

    rows = []
    for name, val in ys.conds.items():
        if name.startswith(("A", "B", "Q1")) and not name.startswith("Q1hat"):
            rows.append((name, float(val)))
    rows.append(("final", result.cond_final))
    rows.append(("pmchwt", sol.cond_system))
    _write_csv(out_dir / "cond_report.csv", ["matrix", "cond2"], rows)

    _summary(out_dir, scene_digest=scene.digest, command="cond",
             frequency_hz=scene.frequency_hz,
             n_unknowns_ssie=scene.n_outer_segments,
             n_unknowns_pmchwt=sol.n_unknowns,
             cond_final=result.cond_final, cond_pmchwt=sol.cond_system,
             acspw=acspw(scene), wall_time_s=time.perf_counter() - t0,
             outputs=["cond_report.csv"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssie2d",
        description="2D TM scattering by composite penetrable objects")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scene config JSON")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("solve", help="bistatic RCS at the config frequency")
    common(p)
    p.add_argument("--compare", choices=["pmchwt"], default=None)
    p.add_argument("--angles", default="0:360:361", help="START:END:N in degrees")
    p.add_argument("--nearfield-grid", default=None,
                   help="X0:X1:NX:Y0:Y1:NY exterior sampling grid")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="monostatic RCS over a frequency band")
    common(p)
    p.add_argument("--fstart", type=float, required=True)
    p.add_argument("--fend", type=float, required=True)
    p.add_argument("--npoints", type=int, required=True)
    p.add_argument("--compare", choices=["pmchwt"], default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("converge", help="RCS relative error versus mesh density")
    common(p)
    p.add_argument("--acspw-list", required=True, help="comma separated, >= 2 values")
    p.add_argument("--reference", choices=["pmchwt", "series"], default="pmchwt")
    p.add_argument("--angles", default="0:360:181", help="START:END:N in degrees")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("cond", help="condition numbers of all inverted blocks")
    common(p)
    p.set_defaults(func=cmd_cond)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SceneConfigError as exc:
        print(f"error: invalid scene config: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
