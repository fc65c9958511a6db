"""Stable and unstable manifolds grown as adaptively refined polylines.

A curve is carried as a list of pieces (arrays of vertices). Each generation
maps every piece, subdivides preimage segments until the image is resolved
(spacing and turning angle), then clips the result to the analysis window.
"""
import logging
import math

import numpy as np
from scipy.spatial import cKDTree

from errors import RefinementBudgetError
from fixed_points import local_manifold_seed
from models import CrossingReport, PolyCurve, RefinementConfig

logger = logging.getLogger(__name__)

R_HAT = (-2.0, 2.0, -4.0, 2.0)
MAX_GENERATIONS = 60
CSV_HEADER = "t,x,y,tx,ty,kappa"


def inside(points, window):
    xmin, xmax, ymin, ymax = window
    x, y = points[..., 0], points[..., 1]
    with np.errstate(invalid="ignore"):
        return np.isfinite(x) & np.isfinite(y) & (x > xmin) & (x < xmax) & (y > ymin) & (y < ymax)


def _relevant(p0, p1, window, margin):
    xmin, xmax, ymin, ymax = window
    lo = np.minimum(p0, p1)
    hi = np.maximum(p0, p1)
    with np.errstate(invalid="ignore"):
        ok = np.isfinite(lo).all(axis=1) & np.isfinite(hi).all(axis=1)
        ok &= (hi[:, 0] >= xmin - margin) & (lo[:, 0] <= xmax + margin)
        ok &= (hi[:, 1] >= ymin - margin) & (lo[:, 1] <= ymax + margin)
    return ok


def _runs(mask):
    """(start, stop) index pairs of the maximal True runs of a boolean array."""
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    d = np.diff(padded)
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def turn_angles(points):
    d = np.diff(points, axis=0)
    cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
    dot = np.einsum("ij,ij->i", d[:-1], d[1:])
    return np.abs(np.arctan2(cross, dot))


def refine(step, pre, img, window, tol):
    """Insert preimage midpoints until consecutive image vertices are close and turn gently.

    Segments whose image chord misses the window are left alone unless the
    image of their midpoint strays from the chord: a folded image can cross
    the window with both ends far outside it.
    """
    margin = 10.0 * tol.max_spacing
    with np.errstate(all="ignore"):
        for _ in range(tol.max_passes):
            if len(img) < 2:
                break
            d = np.diff(img, axis=0)
            chord = np.hypot(d[:, 0], d[:, 1])
            bad = ~(chord <= tol.max_spacing)
            if len(d) >= 2:
                sharp = turn_angles(img) > tol.max_turn
                bad[:-1] |= sharp
                bad[1:] |= sharp
            bad &= np.hypot(*np.diff(pre, axis=0).T) > tol.min_gap
            idx = np.flatnonzero(bad)
            if not len(idx):
                break
            mid = 0.5 * (pre[idx] + pre[idx + 1])
            mid_img = step(mid)
            bow = np.hypot(*(mid_img - 0.5 * (img[idx] + img[idx + 1])).T)
            keep = _relevant(img[idx], img[idx + 1], window, margin) | ~(bow <= 0.25 * chord[idx])
            keep &= np.isfinite(mid_img).all(axis=1) & np.isfinite(chord[idx])
            if not keep.any():
                break
            idx, mid, mid_img = idx[keep], mid[keep], mid_img[keep]
            pre = np.insert(pre, idx + 1, mid, axis=0)
            img = np.insert(img, idx + 1, mid_img, axis=0)
            if len(img) > tol.max_vertices:
                raise RefinementBudgetError("refinement budget exceeded", vertices=len(img))
    return pre, img


def _piece_lengths(pieces):
    return [np.concatenate(([0.0], np.cumsum(np.hypot(*np.diff(p, axis=0).T)))) for p in pieces]


def _truncate(pieces, anchor_point, max_arclength):
    """Keep an arclength budget centred on the vertex nearest the anchor point."""
    lengths = _piece_lengths(pieces)
    offsets = np.cumsum([0.0] + [s[-1] for s in lengths[:-1]])
    coords = [s + o for s, o in zip(lengths, offsets)]
    total = coords[-1][-1] if coords else 0.0
    s_anchor = 0.0
    if anchor_point is not None:
        best = math.inf
        for piece, s in zip(pieces, coords):
            d = np.hypot(*(piece - anchor_point).T)
            j = int(d.argmin())
            if d[j] < best:
                best, s_anchor = d[j], s[j]
    left = min(max_arclength / 2.0, s_anchor)
    right = min(max_arclength - left, total - s_anchor)
    left = min(max_arclength - right, s_anchor)
    lo, hi = s_anchor - left, s_anchor + right
    kept = []
    for piece, s in zip(pieces, coords):
        mask = (s >= lo) & (s <= hi)
        for a, b in _runs(mask):
            if b - a >= 2:
                kept.append(piece[a:b])
    return kept


def _total_length(pieces):
    return float(sum(np.hypot(*np.diff(p, axis=0).T).sum() for p in pieces))


def _grow(seed, step, max_arclength, window, tol, generations, final_window, tag):
    anchor_point = seed.vertices[seed.meta.get("anchor", len(seed) // 2)].copy()
    pieces = [seed.vertices.copy()]
    prev_length = seed.length
    if max_arclength <= prev_length or generations == 0:
        return _finish(pieces, tag, anchor_point, seed.meta, 0)
    gen = 0
    while True:
        gen += 1
        active = window if (final_window is None or generations is None or gen < generations) else final_window
        new_pieces = []
        vertex_count = 0
        for piece in pieces:
            with np.errstate(all="ignore"):
                img = step(piece)
            _, img = refine(step, piece, img, active, tol)
            vertex_count += len(img)
            if vertex_count > tol.max_vertices:
                raise RefinementBudgetError("refinement budget exceeded", vertices=vertex_count)
            for a, b in _runs(inside(img, active)):
                if b - a >= 2:
                    new_pieces.append(img[a:b])
        pieces = new_pieces
        length = _total_length(pieces)
        logger.debug("%s generation %d: %d pieces, length %.4f", tag, gen, len(pieces), length)
        if length >= max_arclength:
            pieces = _truncate(pieces, anchor_point, max_arclength)
            break
        if generations is not None and gen >= generations:
            break
        if abs(length - prev_length) <= 1e-12 or gen >= MAX_GENERATIONS or not pieces:
            break
        prev_length = length
    return _finish(pieces, tag, anchor_point, seed.meta, gen)


def _finish(pieces, tag, anchor_point, seed_meta, generations):
    meta = {"kind": seed_meta.get("kind"), "eigenvalue": seed_meta.get("eigenvalue"),
            "generations": generations}
    curve = PolyCurve.from_pieces(pieces, tag, meta)
    if len(curve):
        curve.meta["anchor"] = int(np.hypot(*(curve.vertices - anchor_point).T).argmin())
    return curve


def grow_unstable(fmap, fp, max_arclength=8.0, window=R_HAT, tol=None, seed_half_length=0.05,
                  generations=None, final_window=None):
    """Forward growth of the unstable manifold of fp, both branches."""
    tol = tol or RefinementConfig()
    seed = local_manifold_seed(fp, "unstable", seed_half_length)
    return _grow(seed, fmap.apply, max_arclength, window, tol, generations, final_window,
                 f"Wu({fp.label})")


def grow_stable(fmap, fp, max_arclength=math.inf, window=R_HAT, tol=None, seed_half_length=0.05,
                generations=3, final_window=None):
    """Backward growth of the stable manifold of fp for a number of generations."""
    tol = tol or RefinementConfig()
    fmap.apply_inverse(fp.location)
    seed = local_manifold_seed(fp, "stable", seed_half_length)
    return _grow(seed, fmap.apply_inverse, max_arclength, window, tol, generations, final_window,
                 f"Ws({fp.label})")


def monotone_x_arc(curve, anchor):
    """Vertices of the x-monotone arc of ``curve`` through vertex ``anchor``, left to right."""
    v = curve.vertices
    piece = next(s for s in curve.piece_slices() if s.start <= anchor < s.stop)
    dx = np.sign(np.diff(v[piece, 0]))
    local = anchor - piece.start
    direction = dx[min(local, len(dx) - 1)]
    lo = local
    while lo > 0 and dx[lo - 1] == direction:
        lo -= 1
    hi = local
    while hi < len(dx) and dx[hi] == direction:
        hi += 1
    arc = v[piece][lo:hi + 1]
    return arc if arc[0, 0] <= arc[-1, 0] else arc[::-1]


def local_unstable_fold(fmap, fp, max_arclength=6.0, window=R_HAT, tol=None):
    """W^u_loc(fp): the image of the x-monotone arc of W^u(fp) through fp.

    The arc runs between the two nearest folds, so its image holds fp, one
    fold and the two sheets on either side of it and nothing further out.
    """
    tol = tol or RefinementConfig()
    wu = grow_unstable(fmap, fp, max_arclength, window, tol)
    arc = monotone_x_arc(wu, wu.meta["anchor"])
    with np.errstate(all="ignore"):
        img = fmap.apply(arc)
    _, img = refine(fmap.apply, arc, img, window, tol)
    pieces = [img[a:b] for a, b in _runs(inside(img, window)) if b - a >= 2]
    return PolyCurve.from_pieces(pieces, f"Wu_loc({fp.label})", {"kind": "unstable", "fold": True})


def clip_curve(curve, window, tag=None):
    pieces = []
    for piece in curve.pieces():
        for a, b in _runs(inside(piece, window)):
            if b - a >= 2:
                pieces.append(piece[a:b])
    return PolyCurve.from_pieces(pieces, tag or curve.tag, dict(curve.meta))


def select_pieces(curve, keep, tag=None):
    pieces = [p for i, p in enumerate(curve.pieces()) if keep(i, p)]
    return PolyCurve.from_pieces(pieces, tag or curve.tag, dict(curve.meta))


def _orient(p, q, r):
    return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])


def _candidate_pairs(a0, a1, b0, b1):
    half_a = 0.5 * np.hypot(*(a1 - a0).T)
    half_b = 0.5 * np.hypot(*(b1 - b0).T)
    swap = half_b.max() > half_a.max()
    if swap:
        a0, a1, b0, b1, half_a, half_b = b0, b1, a0, a1, half_b, half_a
    tree = cKDTree(0.5 * (b0 + b1))
    hits = tree.query_ball_point(0.5 * (a0 + a1), half_a + half_b.max() + 1e-15)
    counts = np.fromiter((len(h) for h in hits), dtype=np.intp, count=len(hits))
    i = np.repeat(np.arange(len(hits)), counts)
    j = np.fromiter((k for h in hits for k in h), dtype=np.intp, count=int(counts.sum()))
    return (j, i) if swap else (i, j)


def intersect_segments(A, B):
    a0, a1, ia = A.segments()
    b0, b1, ib = B.segments()
    if len(a0) == 0 or len(b0) == 0:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp), np.empty(0)
    i, j = _candidate_pairs(a0, a1, b0, b1)
    oa0 = _orient(b0[j], b1[j], a0[i])
    oa1 = _orient(b0[j], b1[j], a1[i])
    ob0 = _orient(a0[i], a1[i], b0[j])
    ob1 = _orient(a0[i], a1[i], b1[j])
    # Half-open rule: an endpoint exactly on the other line counts as the negative side.
    hit = ((oa0 > 0) != (oa1 > 0)) & ((ob0 > 0) != (ob1 > 0))
    i, j = i[hit], j[hit]
    t = oa0[hit] / (oa0[hit] - oa1[hit])
    return ia[i], ib[j], t


def _lobe_depth(curve, other, seg_positions):
    """Deepest excursion of `curve` into `other` between consecutive crossings."""
    if len(seg_positions) < 2:
        return 0.0, None
    order = np.argsort(seg_positions)
    pos = np.asarray(seg_positions)[order]
    starts = [s.start for s in curve.piece_slices()]
    piece_of = np.searchsorted(starts, np.floor(pos).astype(int), side="right")
    depth, where = 0.0, None
    for k in range(len(pos) - 1):
        if piece_of[k] != piece_of[k + 1]:
            continue
        lo, hi = int(np.floor(pos[k])) + 1, int(np.floor(pos[k + 1]))
        if hi < lo:
            continue
        d, c = other.closest_to(curve.vertices[lo:hi + 1])
        m = int(d.argmax())
        if d[m] > depth:
            depth, where = float(d[m]), (curve.vertices[lo + m].copy(), c[m].copy())
    return depth, where


def crossings(A, B):
    """Transversal intersections of two polylines and their signed clearance."""
    ia, ib, t = intersect_segments(A, B)
    points = []
    if len(t):
        p0 = A.vertices[ia]
        p1 = A.vertices[ia + 1]
        da = p1 - p0
        db = B.vertices[ib + 1] - B.vertices[ib]
        where = p0 + t[:, None] * da
        cosang = np.abs(np.einsum("ij,ij->i", da, db)) / (np.hypot(*da.T) * np.hypot(*db.T))
        angles = np.arccos(np.clip(cosang, 0.0, 1.0))
        order = np.lexsort((t, ia))
        points = [(where[k], float(angles[k])) for k in order]
    if points:
        pos_a = ia + t
        q0 = B.vertices[ib]
        tb = np.einsum("ij,ij->i", where - q0, db) / np.einsum("ij,ij->i", db, db)
        pos_b = ib + np.clip(tb, 0.0, 1.0 - 1e-12)
        depth_a, wit_a = _lobe_depth(A, B, pos_a)
        depth_b, wit_b = _lobe_depth(B, A, pos_b)
        depth = max(depth_a, depth_b, np.finfo(float).tiny)
        witness = wit_a if depth_a >= depth_b else (wit_b[::-1] if wit_b is not None else None)
        if witness is None:
            witness = (points[0][0], points[0][0])
        return CrossingReport(points, len(points), -depth, tuple(np.asarray(w) for w in witness))
    clearance, witness = _clearance(A, B)
    return CrossingReport([], 0, clearance, witness)


def _clearance(A, B):
    if len(A) == 0 or len(B) == 0:
        return math.inf, None
    d_ab, c_ab = B.closest_to(A.vertices)
    d_ba, c_ba = A.closest_to(B.vertices)
    i, j = int(d_ab.argmin()), int(d_ba.argmin())
    if d_ab[i] <= d_ba[j]:
        return float(d_ab[i]), (A.vertices[i].copy(), c_ab[i].copy())
    return float(d_ba[j]), (c_ba[j].copy(), B.vertices[j].copy())


def hausdorff(A, B):
    return A.hausdorff(B)


def write_curve_csv(curve, fh):
    """Write the curve in the `t,x,y,tx,ty,kappa` schema with 17 significant digits."""
    data = np.column_stack((curve.param, curve.vertices, curve.tangents, curve.curvatures))
    np.savetxt(fh, data, delimiter=",", header=CSV_HEADER, comments="", fmt="%.17g")
