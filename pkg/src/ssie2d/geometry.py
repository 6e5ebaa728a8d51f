"""Scene description and boundary discretization.

A scene is a set of penetrable 2D objects embedded in a homogeneous
background.  Each object boundary is split into *pieces*: outer pieces touch
the background, shared pieces are the contact interfaces between exactly two
objects.  Pieces are discretized once, into straight segments, so the two
objects adjacent to a shared piece always see the same (conforming) mesh with
opposite normals.

Conventions
-----------
* Each piece stores its segments in a canonical direction; the canonical
  normal is the right-of-travel unit vector (t_y, -t_x).
* Every object traverses its boundary counterclockwise, so the object-outward
  normal on a piece is +canonical if the object travels the piece forward and
  -canonical if backward.
* The interface graph (objects as nodes, shared pieces as edges) must be
  acyclic; the sequential interface elimination relies on this.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.constants import c as C0
from scipy.constants import epsilon_0 as EPS0
from scipy.constants import mu_0 as MU0

__all__ = [
    "Medium",
    "SegmentSet",
    "Piece",
    "SceneObject",
    "Scene",
    "SceneConfigError",
    "discretize_polyline",
    "discretize_arc",
    "build_scene",
    "load_config",
    "acspw",
]

_MATCH_TOL = 1.0e-9


class SceneConfigError(ValueError):
    """Invalid scene configuration; the message names the offending key."""


# ---------------------------------------------------------------------------
# Media
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Medium:
    """Linear isotropic medium: relative permittivity, conductivity (S/m),
    relative permeability."""

    eps_rel: float
    sigma: float = 0.0
    mu_rel: float = 1.0

    def __post_init__(self):
        if self.eps_rel < 0.0:
            raise SceneConfigError(f"eps_rel must be >= 0, got {self.eps_rel}")
        if self.sigma < 0.0:
            raise SceneConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.mu_rel <= 0.0:
            raise SceneConfigError(f"mu_rel must be > 0, got {self.mu_rel}")

    @property
    def mu(self) -> float:
        """Absolute permeability mu_0 * mu_rel."""
        return MU0 * self.mu_rel

    def eps_complex(self, omega: float) -> complex:
        """Complex permittivity eps_0 * (eps_rel - j sigma / (omega eps_0))."""
        return EPS0 * (self.eps_rel - 1j * self.sigma / (omega * EPS0))

    def wavenumber(self, omega: float) -> complex:
        """Complex wavenumber with Re(k) > 0 and Im(k) <= 0 (passive medium,
        e^{+j omega t} convention)."""
        k = omega * np.sqrt(self.mu * self.eps_complex(omega))
        # principal sqrt of a lower-half-plane argument already satisfies the
        # sign convention; guard against roundoff at sigma = 0
        if k.real < 0:
            k = -k
        return complex(k.real, min(k.imag, 0.0))

    @property
    def is_lossless(self) -> bool:
        return self.sigma == 0.0


# ---------------------------------------------------------------------------
# Segments
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SegmentSet:
    """Straight segments: endpoints, midpoints, lengths and unit normals.

    ``normal`` holds the canonical (right-of-travel) normals unless a view
    with flipped normals was requested.
    """

    start: np.ndarray    # (n, 2)
    end: np.ndarray      # (n, 2)
    midpoint: np.ndarray  # (n, 2)
    length: np.ndarray   # (n,)
    normal: np.ndarray   # (n, 2)

    @classmethod
    def from_endpoints(cls, start: np.ndarray, end: np.ndarray) -> "SegmentSet":
        start = np.asarray(start, dtype=float)
        end = np.asarray(end, dtype=float)
        d = end - start
        length = np.hypot(d[:, 0], d[:, 1])
        if np.any(length <= 0.0):
            raise SceneConfigError("degenerate zero-length segment")
        t = d / length[:, None]
        normal = np.column_stack([t[:, 1], -t[:, 0]])
        return cls(start=start, end=end, midpoint=0.5 * (start + end),
                   length=length, normal=normal)

    def __len__(self) -> int:
        return self.length.shape[0]

    def with_normal_sign(self, sign: int) -> "SegmentSet":
        if sign == 1:
            return self
        return replace(self, normal=-self.normal)

    @staticmethod
    def concatenate(sets: Sequence["SegmentSet"]) -> "SegmentSet":
        return SegmentSet(
            start=np.vstack([s.start for s in sets]),
            end=np.vstack([s.end for s in sets]),
            midpoint=np.vstack([s.midpoint for s in sets]),
            length=np.concatenate([s.length for s in sets]),
            normal=np.vstack([s.normal for s in sets]),
        )


def discretize_polyline(vertices, h_target: float) -> SegmentSet:
    """Split every polyline edge into ceil(edge_length / h_target) equal
    segments.  The polyline vertices are preserved exactly.
    """
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[0] < 2 or verts.shape[1] != 2:
        raise SceneConfigError("polyline needs at least two 2D vertices")
    if h_target <= 0.0:
        raise SceneConfigError(f"h_target must be > 0, got {h_target}")
    starts, ends = [], []
    for a, b in zip(verts[:-1], verts[1:]):
        edge_len = float(np.hypot(*(b - a)))
        if edge_len <= 0.0:
            raise SceneConfigError("degenerate (zero-length) polyline edge")
        n = max(1, math.ceil(edge_len / h_target - 1e-12))
        ts = np.linspace(0.0, 1.0, n + 1)
        pts = a[None, :] + ts[:, None] * (b - a)[None, :]
        pts[0] = a
        pts[-1] = b
        starts.append(pts[:-1])
        ends.append(pts[1:])
    return SegmentSet.from_endpoints(np.vstack(starts), np.vstack(ends))


def discretize_arc(center, radius: float, angle_start: float,
                   angle_end: float, h_target: float) -> SegmentSet:
    """Chord segments along a circular arc, ceil(arc_length / h_target) of
    them, endpoints on the arc.  Angles in radians.
    """
    if radius <= 0.0:
        raise SceneConfigError(f"arc radius must be > 0, got {radius}")
    if angle_end <= angle_start:
        raise SceneConfigError("arc requires angle_end > angle_start")
    if h_target <= 0.0:
        raise SceneConfigError(f"h_target must be > 0, got {h_target}")
    arc_len = radius * (angle_end - angle_start)
    n = max(1, math.ceil(arc_len / h_target - 1e-12))
    theta = np.linspace(angle_start, angle_end, n + 1)
    cx, cy = float(center[0]), float(center[1])
    pts = np.column_stack([cx + radius * np.cos(theta), cy + radius * np.sin(theta)])
    return SegmentSet.from_endpoints(pts[:-1], pts[1:])


# ---------------------------------------------------------------------------
# Pieces, objects, scene
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Piece:
    """A connected run of segments, either on the outer boundary of one
    object or shared between exactly two objects."""

    piece_id: str
    kind: str                 # "outer" | "shared"
    segments: SegmentSet
    owner: str | None = None          # outer pieces
    owners: tuple[str, str] | None = None  # shared pieces (object_a, object_b)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        return self.segments.start[0], self.segments.end[-1]


@dataclass(frozen=True)
class SceneObject:
    name: str
    medium: Medium
    # boundary traversal: (piece_id, forward) in counterclockwise order
    piece_refs: tuple[tuple[str, bool], ...]
    vertices: np.ndarray = field(repr=False, default=None)  # closed CCW loop

    def normal_sign(self, piece_id: str) -> int:
        """+1 if this object's outward normal on the piece equals the
        canonical normal, -1 otherwise."""
        for pid, forward in self.piece_refs:
            if pid == piece_id:
                return 1 if forward else -1
        raise KeyError(f"{self.name} does not touch piece {piece_id}")

    @property
    def piece_ids(self) -> tuple[str, ...]:
        return tuple(pid for pid, _ in self.piece_refs)


@dataclass(frozen=True)
class Scene:
    """Immutable discretized scene.  Construct with :func:`build_scene`."""

    background: Medium
    objects: tuple[SceneObject, ...]
    pieces: dict[str, Piece]
    piece_order: tuple[str, ...]     # outer pieces first, then shared
    frequency_hz: float
    h_target_m: float
    digest: str = ""

    # -- frequency ---------------------------------------------------------
    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency_hz

    @property
    def wavelength0(self) -> float:
        return C0 / self.frequency_hz

    def at_frequency(self, frequency_hz: float) -> "Scene":
        """Same discretized geometry at a different frequency."""
        if frequency_hz <= 0.0:
            raise SceneConfigError("frequency_hz must be > 0")
        return replace(self, frequency_hz=float(frequency_hz))

    # -- piece bookkeeping ---------------------------------------------------
    @property
    def outer_piece_ids(self) -> tuple[str, ...]:
        return tuple(p for p in self.piece_order if self.pieces[p].kind == "outer")

    @property
    def shared_piece_ids(self) -> tuple[str, ...]:
        return tuple(p for p in self.piece_order if self.pieces[p].kind == "shared")

    @property
    def n_outer_segments(self) -> int:
        return sum(len(self.pieces[p]) for p in self.outer_piece_ids)

    @property
    def n_total_segments(self) -> int:
        return sum(len(self.pieces[p]) for p in self.piece_order)

    def object_by_name(self, name: str) -> SceneObject:
        for obj in self.objects:
            if obj.name == name:
                return obj
        raise KeyError(name)

    def reference_sign(self, piece_id: str) -> int:
        """Orientation of the piece's reference normal: the owner's side for
        outer pieces, object_a's side for shared pieces."""
        piece = self.pieces[piece_id]
        owner = piece.owner if piece.kind == "outer" else piece.owners[0]
        return self.object_by_name(owner).normal_sign(piece_id)

    def piece_segments(self, piece_id: str, oriented_for: str | None = None) -> SegmentSet:
        """Segments of a piece with reference-side normals, or with the named
        object's outward normals."""
        piece = self.pieces[piece_id]
        if oriented_for is None:
            sign = self.reference_sign(piece_id)
        else:
            sign = self.object_by_name(oriented_for).normal_sign(piece_id)
        return piece.segments.with_normal_sign(sign)

    def outer_segments(self) -> SegmentSet:
        """All outer segments in global order, owner-outward normals."""
        return SegmentSet.concatenate(
            [self.piece_segments(p) for p in self.outer_piece_ids])

    # -- interface graph -----------------------------------------------------
    def components(self) -> list[list[str]]:
        """Connected components of the interface graph, as object names in
        scene order."""
        parent = {o.name: o.name for o in self.objects}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for pid in self.shared_piece_ids:
            a, b = self.pieces[pid].owners
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        groups: dict[str, list[str]] = {}
        for obj in self.objects:
            groups.setdefault(find(obj.name), []).append(obj.name)
        roots_in_order = []
        for obj in self.objects:
            r = find(obj.name)
            if r not in roots_in_order:
                roots_in_order.append(r)
        return [groups[r] for r in roots_in_order]

    # -- point queries -------------------------------------------------------
    def points_inside(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask: point lies inside any object (even-odd rule)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.zeros(len(pts), dtype=bool)
        for obj in self.objects:
            inside |= _points_in_polygon(pts, obj.vertices)
        return inside

    def distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the nearest boundary segment."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        best = np.full(len(pts), np.inf)
        for pid in self.piece_order:
            seg = self.pieces[pid].segments
            best = np.minimum(best, _point_segment_distance(pts, seg))
        return best


def acspw(scene: Scene) -> float:
    """Average count of segments per free-space wavelength:
    lambda_0 / mean(segment length) over all pieces."""
    lengths = np.concatenate(
        [scene.pieces[p].segments.length for p in scene.piece_order])
    return scene.wavelength0 / float(np.mean(lengths))


# ---------------------------------------------------------------------------
# Point / polygon helpers
# ---------------------------------------------------------------------------
def _points_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    x, y = points[:, 0][:, None], points[:, 1][:, None]
    x0, y0 = vertices[:-1, 0][None, :], vertices[:-1, 1][None, :]
    x1, y1 = vertices[1:, 0][None, :], vertices[1:, 1][None, :]
    crosses = ((y0 <= y) & (y < y1)) | ((y1 <= y) & (y < y0))
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = x0 + (y - y0) * (x1 - x0) / np.where(y1 == y0, np.inf, y1 - y0)
    hits = crosses & (xi > x)
    return (np.sum(hits, axis=1) % 2) == 1


def _point_segment_distance(points: np.ndarray, seg: SegmentSet) -> np.ndarray:
    a, b = seg.start, seg.end
    ab = b - a                                     # (n, 2)
    ap = points[:, None, :] - a[None, :, :]        # (m, n, 2)
    denom = np.sum(ab * ab, axis=1)[None, :]
    t = np.clip(np.sum(ap * ab[None, :, :], axis=2) / denom, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.linalg.norm(points[:, None, :] - closest, axis=2)
    return np.min(d, axis=1)


# ---------------------------------------------------------------------------
# Scene construction from a config mapping
# ---------------------------------------------------------------------------
def load_config(path) -> dict:
    """Read a JSON scene configuration file."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise SceneConfigError(f"invalid JSON in {path}: {exc}") from exc


def _require(cfg: dict, key: str, context: str):
    if key not in cfg:
        raise SceneConfigError(f"missing key {context}{key}")
    return cfg[key]


def _parse_medium(raw, context: str) -> Medium:
    if not isinstance(raw, dict):
        raise SceneConfigError(f"{context} must be a mapping")
    try:
        return Medium(
            eps_rel=float(_require(raw, "eps_rel", context + ".")),
            sigma=float(raw.get("sigma", 0.0)),
            mu_rel=float(raw.get("mu_rel", 1.0)),
        )
    except SceneConfigError as exc:
        raise SceneConfigError(f"{context}: {exc}") from exc


def _discretize_primitive(raw: dict, h: float, context: str) -> SegmentSet:
    kind = _require(raw, "type", context + ".")
    if kind == "polyline":
        return discretize_polyline(_require(raw, "points", context + "."), h)
    if kind == "arc":
        a0 = math.radians(float(_require(raw, "angle_start_deg", context + ".")))
        a1 = math.radians(float(_require(raw, "angle_end_deg", context + ".")))
        return discretize_arc(
            _require(raw, "center", context + "."),
            float(_require(raw, "radius", context + ".")), a0, a1, h)
    raise SceneConfigError(f"{context}.type: unknown primitive type {kind!r}")


def _chain_pieces(obj_name: str, refs: list[tuple[str, Piece]]
                  ) -> tuple[list[tuple[str, bool]], np.ndarray]:
    """Order pieces into a closed counterclockwise loop.

    Returns the ordered (piece_id, forward) list and the loop vertices.
    """
    remaining = list(refs)
    pid0, piece0 = remaining.pop(0)
    chain: list[tuple[str, Piece, bool]] = [(pid0, piece0, True)]
    loop_start = piece0.endpoints[0]
    cur = piece0.endpoints[1]
    while remaining:
        hit = None
        for idx, (pid, piece) in enumerate(remaining):
            s, e = piece.endpoints
            if np.allclose(s, cur, atol=_MATCH_TOL):
                hit = (idx, True)
                break
            if np.allclose(e, cur, atol=_MATCH_TOL):
                hit = (idx, False)
                break
        if hit is None:
            raise SceneConfigError(
                f"objects[{obj_name}]: contour is not closed or not connected "
                f"(no piece continues from {cur})")
        idx, forward = hit
        pid, piece = remaining.pop(idx)
        chain.append((pid, piece, forward))
        cur = piece.endpoints[1] if forward else piece.endpoints[0]
    if not np.allclose(cur, loop_start, atol=_MATCH_TOL):
        raise SceneConfigError(f"objects[{obj_name}]: contour does not close")

    verts = [None]
    pts = []
    for _, piece, forward in chain:
        p = piece.segments.start if forward else piece.segments.end[::-1]
        pts.append(p)
    verts = np.vstack(pts + [pts[0][:1]])
    area = 0.5 * float(np.sum(verts[:-1, 0] * verts[1:, 1]
                              - verts[1:, 0] * verts[:-1, 1]))
    if area < 0.0:
        chain = [(pid, piece, not fwd) for pid, piece, fwd in chain[::-1]]
        verts = verts[::-1].copy()
    return [(pid, fwd) for pid, _, fwd in chain], verts


def build_scene(config: dict) -> Scene:
    """Validate a configuration mapping and build the discretized scene.

    See the package README for the configuration schema.
    """
    if not isinstance(config, dict):
        raise SceneConfigError("config must be a mapping")
    freq = float(_require(config, "frequency_hz", ""))
    if freq <= 0.0:
        raise SceneConfigError("frequency_hz must be > 0")
    h = float(_require(config, "h_target_m", ""))
    if h <= 0.0:
        raise SceneConfigError("h_target_m must be > 0")
    background = _parse_medium(_require(config, "background", ""), "background")

    raw_objects = _require(config, "objects", "")
    if not isinstance(raw_objects, list) or not raw_objects:
        raise SceneConfigError("objects must be a non-empty list")

    pieces: dict[str, Piece] = {}
    outer_ids: list[str] = []
    shared_ids: list[str] = []
    obj_media: dict[str, Medium] = {}
    obj_outer: dict[str, list[str]] = {}

    names = []
    for i, raw in enumerate(raw_objects):
        ctx = f"objects[{i}]"
        name = str(_require(raw, "name", ctx + "."))
        if name in obj_media:
            raise SceneConfigError(f"{ctx}.name: duplicate object name {name!r}")
        names.append(name)
        obj_media[name] = _parse_medium(_require(raw, "medium", ctx + "."),
                                        ctx + ".medium")
        contour = _require(raw, "contour", ctx + ".")
        if not isinstance(contour, list) or not contour:
            raise SceneConfigError(f"{ctx}.contour must be a non-empty list")
        obj_outer[name] = []
        for j, prim in enumerate(contour):
            pid = f"{name}.outer{j}"
            segs = _discretize_primitive(prim, h, f"{ctx}.contour[{j}]")
            pieces[pid] = Piece(piece_id=pid, kind="outer", segments=segs,
                                owner=name)
            outer_ids.append(pid)
            obj_outer[name].append(pid)

    obj_shared: dict[str, list[str]] = {n: [] for n in names}
    parent = {n: n for n in names}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, raw in enumerate(config.get("shared", []) or []):
        ctx = f"shared[{i}]"
        a = str(_require(raw, "object_a", ctx + "."))
        b = str(_require(raw, "object_b", ctx + "."))
        for side, nm in (("object_a", a), ("object_b", b)):
            if nm not in obj_media:
                raise SceneConfigError(f"{ctx}.{side}: unknown object {nm!r}")
        if a == b:
            raise SceneConfigError(f"{ctx}: object_a and object_b must differ")
        ra, rb = find(a), find(b)
        if ra == rb:
            raise SceneConfigError(
                f"{ctx}: cyclic interface graph ({a!r} and {b!r} are already "
                "connected through shared pieces)")
        parent[ra] = rb
        pid = f"shared{i}"
        segs = _discretize_primitive(_require(raw, "primitive", ctx + "."),
                                     h, f"{ctx}.primitive")
        pieces[pid] = Piece(piece_id=pid, kind="shared", segments=segs,
                            owners=(a, b))
        shared_ids.append(pid)
        obj_shared[a].append(pid)
        obj_shared[b].append(pid)

    objects = []
    for name in names:
        refs = [(pid, pieces[pid]) for pid in obj_outer[name] + obj_shared[name]]
        chain, verts = _chain_pieces(name, refs)
        objects.append(SceneObject(name=name, medium=obj_media[name],
                                   piece_refs=tuple(chain), vertices=verts))

    scene = Scene(
        background=background,
        objects=tuple(objects),
        pieces=pieces,
        piece_order=tuple(outer_ids + shared_ids),
        frequency_hz=freq,
        h_target_m=h,
        digest=_digest(config),
    )
    _validate_scene(scene)
    return scene


def _digest(config: dict) -> str:
    def strip(node):
        if isinstance(node, dict):
            return {k: strip(v) for k, v in sorted(node.items())
                    if not k.startswith("_") and k != "notes"}
        if isinstance(node, list):
            return [strip(v) for v in node]
        return node

    blob = json.dumps(strip(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _validate_scene(scene: Scene) -> None:
    for pid in scene.shared_piece_ids:
        a, b = scene.pieces[pid].owners
        sa = scene.object_by_name(a).normal_sign(pid)
        sb = scene.object_by_name(b).normal_sign(pid)
        if sa != -sb:
            raise SceneConfigError(
                f"shared piece {pid}: the two owners must see opposite normals")
    for obj in scene.objects:
        vecs = np.vstack([
            (1.0 if fwd else -1.0)
            * (scene.pieces[pid].segments.end - scene.pieces[pid].segments.start)
            for pid, fwd in obj.piece_refs])
        perimeter = float(np.sum(np.hypot(vecs[:, 0], vecs[:, 1])))
        closure = np.abs(np.sum(vecs, axis=0)).max()
        if closure > 1e-9 * max(1.0, perimeter):
            raise SceneConfigError(
                f"objects[{obj.name}]: contour closure defect {closure:g}")
