"""Surface admittance operators on the outermost boundaries.

Per object, the tested contour-integral identity couples the boundary
electric field coefficients E and the tangential magnetic field
coefficients H of all its pieces:

    (L + U) E = P H        (blocks from :mod:`ssie2d.assembly`)

Shared-interface unknowns are eliminated pairwise.  Writing the two adjacent
relations' rows on the shared piece s and using field continuity (E single
valued, H odd under the normal flip), one small solve per side expresses
E_s and H_s in terms of the remaining unknowns; substitution merges the two
relations into one.  Repeating over every shared piece (the interface graph
is a tree, so each merge joins two current relation groups) leaves a single
relation per connected component holding only outer pieces, and

    Y = A_H^{-1} A_E

maps outer E to outer H: the surface admittance operator.  The same
construction with every medium replaced by the background, on the union
contour without shared pieces, gives the equivalent-model operator Yhat,
and Ys = Y - Yhat maps boundary E to the single equivalent electric current
density J.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import assembly
from .geometry import Medium, Scene, SegmentSet
from .solver import SingularMatrixError, cond2, lu_solve

__all__ = [
    "FieldRelation",
    "SurfaceOperator",
    "EliminationRecord",
    "object_relation",
    "eliminate_shared_pair",
    "build_Y",
    "build_Yhat",
    "build_Ys",
]


@dataclass
class FieldRelation:
    """Block relation a_h @ H = a_e @ E over the listed pieces.

    H coefficients are stored in each piece's reference orientation (the
    owner side for outer pieces, the first-listed owner for shared ones), so
    relations from different objects can be merged without extra bookkeeping.
    """

    label: str
    piece_order: tuple[str, ...]
    sizes: tuple[int, ...]
    a_e: np.ndarray
    a_h: np.ndarray

    def block_slice(self, piece_id: str) -> slice:
        i = self.piece_order.index(piece_id)
        off = sum(self.sizes[:i])
        return slice(off, off + self.sizes[i])

    @property
    def n(self) -> int:
        return int(sum(self.sizes))


@dataclass(frozen=True)
class SurfaceOperator:
    """Dense map H = Y E (or J = Ys E) on the concatenated outer segments."""

    kind: str                      # "Y" | "Yhat" | "Ys"
    matrix: np.ndarray
    outer_order: tuple[str, ...]
    conds: dict[str, float] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class EliminationRecord:
    """Maps recovering the eliminated shared-piece unknowns.

    H_s = sum_q  c_h[q] @ H_q + c_e[q] @ E_q
    E_s = sum_q  d_h[q] @ H_q + d_e[q] @ E_q
    over the remaining pieces q of the two merged relations.
    """

    shared_id: str
    piece_order: tuple[str, ...]
    c_h: dict[str, np.ndarray]
    c_e: dict[str, np.ndarray]
    d_h: dict[str, np.ndarray]
    d_e: dict[str, np.ndarray]
    cond_a1: float
    cond_a2: float
    cond_b: float


def object_relation(scene: Scene, name: str) -> FieldRelation:
    """Tested field relation of one object over its boundary pieces.

    Row blocks follow the object's piece order; every U block uses the
    object's outward normals and every H column is converted to the piece's
    reference orientation.
    """
    obj = scene.object_by_name(name)
    omega = scene.omega
    pids = obj.piece_ids
    segs = {pid: scene.piece_segments(pid, oriented_for=name) for pid in pids}
    sizes = tuple(len(segs[pid]) for pid in pids)
    n = sum(sizes)
    a_e = np.zeros((n, n), dtype=np.complex128)
    a_h = np.zeros((n, n), dtype=np.complex128)

    offs = np.concatenate([[0], np.cumsum(sizes)])
    for i, p in enumerate(pids):
        ri = slice(offs[i], offs[i + 1])
        for j, q in enumerate(pids):
            cj = slice(offs[j], offs[j + 1])
            obs, src = segs[p], segs[q]
            a_e[ri, cj] = assembly.double_layer(obs, src, obj.medium, omega)
            # reference orientation factor for the H coefficients
            t = obj.normal_sign(q) * scene.reference_sign(q)
            a_h[ri, cj] = t * assembly.single_layer(obs, src, obj.medium, omega)
        a_e[ri, ri] += assembly.segment_length_matrix(segs[p])
    return FieldRelation(label=name, piece_order=pids, sizes=sizes,
                         a_e=a_e, a_h=a_h)


def eliminate_shared_pair(rel_a: FieldRelation, rel_b: FieldRelation,
                          shared_id: str) -> tuple[FieldRelation, EliminationRecord]:
    """Eliminate one shared piece common to two relations.

    Returns the merged relation over the remaining pieces plus the record
    of the recovery maps and the condition numbers of the inverted blocks.
    """
    if shared_id not in rel_a.piece_order or shared_id not in rel_b.piece_order:
        raise KeyError(f"piece {shared_id} is not shared by both relations")

    sa = rel_a.block_slice(shared_id)
    sb = rel_b.block_slice(shared_id)
    rest_a = [p for p in rel_a.piece_order if p != shared_id]
    rest_b = [p for p in rel_b.piece_order if p != shared_id]

    aea_ss = rel_a.a_e[sa, sa]
    aeb_ss = rel_b.a_e[sb, sb]
    aha_ss = rel_a.a_h[sa, sa]
    ahb_ss = rel_b.a_h[sb, sb]

    cond_a1 = cond2(aea_ss)
    cond_a2 = cond2(aeb_ss)

    # multiply by the two small inverses once, then form the coupling solve
    def a1(x):
        return lu_solve(aea_ss, x, name=f"L+U self block of {rel_a.label} on {shared_id}")

    def a2(x):
        return lu_solve(aeb_ss, x, name=f"L+U self block of {rel_b.label} on {shared_id}")

    b_mat = a1(aha_ss) - a2(ahb_ss)
    cond_b = cond2(b_mat)

    rhs_h: dict[str, np.ndarray] = {}
    rhs_e: dict[str, np.ndarray] = {}
    for q in rest_a:
        cq = rel_a.block_slice(q)
        rhs_h[q] = -a1(rel_a.a_h[sa, cq])
        rhs_e[q] = a1(rel_a.a_e[sa, cq])
    for q in rest_b:
        cq = rel_b.block_slice(q)
        rhs_h[q] = a2(rel_b.a_h[sb, cq])
        rhs_e[q] = -a2(rel_b.a_e[sb, cq])

    c_h = {q: lu_solve(b_mat, rhs_h[q], name=f"coupling block on {shared_id}")
           for q in rhs_h}
    c_e = {q: lu_solve(b_mat, rhs_e[q], name=f"coupling block on {shared_id}")
           for q in rhs_e}

    a1_aha_ss = a1(aha_ss)
    d_h: dict[str, np.ndarray] = {}
    d_e: dict[str, np.ndarray] = {}
    for q in rest_a:
        cq = rel_a.block_slice(q)
        d_h[q] = a1(rel_a.a_h[sa, cq]) + a1_aha_ss @ c_h[q]
        d_e[q] = -a1(rel_a.a_e[sa, cq]) + a1_aha_ss @ c_e[q]
    for q in rest_b:
        d_h[q] = a1_aha_ss @ c_h[q]
        d_e[q] = a1_aha_ss @ c_e[q]

    merged_order = tuple(rest_a + rest_b)
    sizes = tuple(
        (rel_a if q in rest_a else rel_b).sizes[
            (rel_a if q in rest_a else rel_b).piece_order.index(q)]
        for q in merged_order)
    offs = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offs[-1])
    a_e = np.zeros((n, n), dtype=np.complex128)
    a_h = np.zeros((n, n), dtype=np.complex128)

    for rel, rest in ((rel_a, rest_a), (rel_b, rest_b)):
        ss = rel.block_slice(shared_id)
        for p in rest:
            rp = rel.block_slice(p)
            gi = merged_order.index(p)
            gr = slice(offs[gi], offs[gi + 1])
            ae_ps = rel.a_e[rp, ss]
            ah_ps = rel.a_h[rp, ss]
            for q in merged_order:
                gj = merged_order.index(q)
                gc = slice(offs[gj], offs[gj + 1])
                ae_own = rel.a_e[rp, rel.block_slice(q)] if q in rel.piece_order else 0.0
                ah_own = rel.a_h[rp, rel.block_slice(q)] if q in rel.piece_order else 0.0
                a_e[gr, gc] += ae_own + ae_ps @ d_e[q] - ah_ps @ c_e[q]
                a_h[gr, gc] += ah_own - ae_ps @ d_h[q] + ah_ps @ c_h[q]

    merged = FieldRelation(label=f"{rel_a.label}+{rel_b.label}",
                           piece_order=merged_order, sizes=sizes,
                           a_e=a_e, a_h=a_h)
    record = EliminationRecord(
        shared_id=shared_id, piece_order=merged_order,
        c_h=c_h, c_e=c_e, d_h=d_h, d_e=d_e,
        cond_a1=cond_a1, cond_a2=cond_a2, cond_b=cond_b)
    return merged, record


def _component_reduce(scene: Scene, names: list[str], shared_order=None
                      ) -> tuple[FieldRelation, list[EliminationRecord], float]:
    """Merge all objects of one connected component down to outer pieces."""
    relations: dict[str, FieldRelation] = {
        name: object_relation(scene, name) for name in names}
    group_of = {name: name for name in names}
    records: list[EliminationRecord] = []

    shared = [pid for pid in (shared_order or scene.shared_piece_ids)
              if scene.pieces[pid].kind == "shared"
              and scene.pieces[pid].owners[0] in names]
    for pid in shared:
        a, b = scene.pieces[pid].owners
        ga, gb = group_of[a], group_of[b]
        merged, rec = eliminate_shared_pair(relations[ga], relations[gb], pid)
        records.append(rec)
        key = merged.label
        relations[key] = merged
        for name, g in list(group_of.items()):
            if g in (ga, gb):
                group_of[name] = key
        if ga != key:
            relations.pop(ga, None)
        if gb != key:
            relations.pop(gb, None)

    final = relations[group_of[names[0]]]
    leftover = [p for p in final.piece_order if scene.pieces[p].kind != "outer"]
    if leftover:
        raise ValueError(f"shared pieces left after elimination: {leftover}")
    cond_q1 = cond2(final.a_h)
    return final, records, cond_q1


def _scatter_component(global_mat: np.ndarray, comp_mat: np.ndarray,
                       comp_order: tuple[str, ...], scene: Scene) -> None:
    outer = scene.outer_piece_ids
    offs = {}
    off = 0
    for pid in outer:
        offs[pid] = off
        off += len(scene.pieces[pid])
    comp_offs = np.concatenate(
        [[0], np.cumsum([len(scene.pieces[p]) for p in comp_order])])
    for i, p in enumerate(comp_order):
        gi = slice(offs[p], offs[p] + len(scene.pieces[p]))
        ci = slice(comp_offs[i], comp_offs[i + 1])
        for j, q in enumerate(comp_order):
            gj = slice(offs[q], offs[q] + len(scene.pieces[q]))
            cj = slice(comp_offs[j], comp_offs[j + 1])
            global_mat[gi, gj] = comp_mat[ci, cj]


def build_Y(scene: Scene, shared_order=None) -> SurfaceOperator:
    """Surface admittance operator of the original composite scene.

    All shared-piece unknowns are eliminated; the result maps the outer
    boundary E coefficients to the outer H coefficients (owner-outward
    orientation), ordered by the scene's outer pieces.
    """
    n_out = scene.n_outer_segments
    mat = np.zeros((n_out, n_out), dtype=np.complex128)
    conds: dict[str, float] = {}
    n_merge = 0
    for ci, names in enumerate(scene.components()):
        final, records, cond_q1 = _component_reduce(scene, names, shared_order)
        # outer pieces of a component keep their global relative order
        order = tuple(p for p in scene.outer_piece_ids if p in final.piece_order)
        perm = _permute_relation(final, order)
        y_comp = lu_solve(perm.a_h, perm.a_e, name="outer coupling of the merged relation")
        _scatter_component(mat, y_comp, order, scene)
        for rec in records:
            n_merge += 1
            conds[f"A{2 * n_merge - 1}"] = rec.cond_a1
            conds[f"A{2 * n_merge}"] = rec.cond_a2
            conds[f"B{n_merge}"] = rec.cond_b
        conds["Q1" if ci == 0 else f"Q1.c{ci + 1}"] = cond_q1
    return SurfaceOperator(kind="Y", matrix=mat,
                           outer_order=scene.outer_piece_ids, conds=conds)


def _permute_relation(rel: FieldRelation, order: tuple[str, ...]) -> FieldRelation:
    if order == rel.piece_order:
        return rel
    idx = []
    sizes = []
    for p in order:
        s = rel.block_slice(p)
        idx.extend(range(s.start, s.stop))
        sizes.append(s.stop - s.start)
    idx = np.asarray(idx)
    return FieldRelation(label=rel.label, piece_order=order, sizes=tuple(sizes),
                         a_e=rel.a_e[np.ix_(idx, idx)],
                         a_h=rel.a_h[np.ix_(idx, idx)])


def build_Yhat(scene: Scene) -> SurfaceOperator:
    """Admittance operator of the equivalent model: every object replaced by
    the background medium, shared pieces removed, one homogeneous region per
    connected component bounded by its outer pieces."""
    omega = scene.omega
    bg = scene.background
    n_out = scene.n_outer_segments
    mat = np.zeros((n_out, n_out), dtype=np.complex128)
    conds: dict[str, float] = {}
    for ci, names in enumerate(scene.components()):
        order = tuple(p for p in scene.outer_piece_ids
                      if scene.pieces[p].owner in names)
        segs = {p: scene.piece_segments(p) for p in order}
        sizes = [len(segs[p]) for p in order]
        offs = np.concatenate([[0], np.cumsum(sizes)])
        n = int(offs[-1])
        a_e = np.zeros((n, n), dtype=np.complex128)
        a_h = np.zeros((n, n), dtype=np.complex128)
        for i, p in enumerate(order):
            ri = slice(offs[i], offs[i + 1])
            for j, q in enumerate(order):
                cj = slice(offs[j], offs[j + 1])
                a_e[ri, cj] = assembly.double_layer(segs[p], segs[q], bg, omega)
                a_h[ri, cj] = assembly.single_layer(segs[p], segs[q], bg, omega)
            a_e[ri, ri] += assembly.segment_length_matrix(segs[p])
        y_comp = lu_solve(a_h, a_e, name="equivalent-model outer coupling")
        _scatter_component(mat, y_comp, order, scene)
        conds["Q1hat" if ci == 0 else f"Q1hat.c{ci + 1}"] = cond2(a_h)
    return SurfaceOperator(kind="Yhat", matrix=mat,
                           outer_order=scene.outer_piece_ids, conds=conds)


def build_Ys(y: SurfaceOperator, yhat: SurfaceOperator) -> SurfaceOperator:
    """Differential surface admittance operator Ys = Y - Yhat; J = Ys E."""
    if y.outer_order != yhat.outer_order or y.matrix.shape != yhat.matrix.shape:
        raise ValueError("Y and Yhat must share dimensions and outer order")
    conds = dict(y.conds)
    conds.update(yhat.conds)
    return SurfaceOperator(kind="Ys", matrix=y.matrix - yhat.matrix,
                           outer_order=y.outer_order, conds=conds)
