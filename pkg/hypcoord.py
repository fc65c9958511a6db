"""Order-k hyperbolic coordinates and finite-order stable foliation leaves.

Df^k is accumulated with a rescale after every step and the logs of the
scales are tracked separately, so E_k ~ b^k never underflows.
"""
import logging
import math

import numpy as np

from errors import DegenerateFrameError, OrbitEscapedError, PreconditionError
from manifolds import R_HAT, inside
from map_core import HenonLikeMap
from models import FoliationLeaf, HyperbolicFrame, PolyCurve, piece_geometry
from regions import in_foliation_domain

logger = logging.getLogger(__name__)

DEGENERATE = 1e-12
CONTDIR_MAX_ORDER = 6
CONTDIR_TOL = 1e-8


def _upper(v):
    """Flip unit vectors into the closed upper half-circle (ties go to x > 0)."""
    flip = (v[..., 1] < 0) | ((v[..., 1] == 0) & (v[..., 0] < 0))
    return np.where(flip[..., None], -v, v)


def accumulate(fmap, z, k):
    """Scaled Df^k_z for a point or a batch: returns (matrix, log scale, log |det|, escaped)."""
    z = np.asarray(z, dtype=float)
    M = np.broadcast_to(np.eye(2), z.shape[:-1] + (2, 2)).copy()
    log_scale = np.zeros(z.shape[:-1])
    log_det = np.zeros(z.shape[:-1])
    escaped = np.zeros(z.shape[:-1], dtype=bool)
    blowup = getattr(fmap, "blowup", 1e6)
    with np.errstate(all="ignore"):
        for _ in range(k):
            J = fmap.jacobian(z)
            log_det += np.log(np.abs(np.linalg.det(J)))
            M = J @ M
            s = np.linalg.norm(M, axis=(-2, -1))
            s = np.where(s > 0, s, 1.0)
            M = M / s[..., None, None]
            log_scale += np.log(s)
            z = fmap.apply(z)
            escaped |= ~np.all(np.isfinite(z), axis=-1) | (np.abs(z).max(axis=-1) > blowup)
    return M, log_scale, log_det, escaped


def frames(fmap, points, k):
    """Vectorised frame data for a batch: (e_k, f_k, logE, logF); degenerate rows give NaN."""
    M, log_scale, log_det, escaped = accumulate(fmap, np.asarray(points, dtype=float).reshape(-1, 2), k)
    _, S, Vt = np.linalg.svd(M)
    with np.errstate(divide="ignore"):
        log_f = log_scale + np.log(S[:, 0])
    log_e = log_det - log_f
    e = _upper(Vt[:, 1, :])
    f = _upper(Vt[:, 0, :])
    bad = escaped | (np.abs(log_e - log_f) < DEGENERATE) | ~np.isfinite(log_e)
    e[bad] = np.nan
    f[bad] = np.nan
    return e, f, log_e, log_f


def contdir_angle(M):
    """Most expanded direction of M from tan 2theta = 2 B / (A - C) on the columns of M."""
    col0, col1 = M[:, 0], M[:, 1]
    A, B, C = col0 @ col0, col0 @ col1, col1 @ col1
    return 0.5 * math.atan2(2.0 * B, A - C)


def frame(fmap, z, k):
    """Most contracted and most expanded directions of Df^k at z."""
    if k < 1:
        raise ValueError("order k must be at least 1")
    z = np.asarray(z, dtype=float)
    M, log_scale, log_det, escaped = accumulate(fmap, z, k)
    if escaped:
        raise OrbitEscapedError("orbit escaped before order k", z=z.tolist(), k=k)
    _, S, Vt = np.linalg.svd(M)
    log_f = float(log_scale + math.log(S[0]))
    log_e = float(log_det - log_f)
    if abs(log_e - log_f) < DEGENERATE:
        raise DegenerateFrameError("degenerate", z=z.tolist(), k=k)
    e_k = _upper(Vt[1])
    f_k = _upper(Vt[0])
    mismatch = None
    if k <= CONTDIR_MAX_ORDER:
        theta = contdir_angle(M)
        direct = _upper(np.array([math.cos(theta), math.sin(theta)]))
        mismatch = float(abs(direct[0] * f_k[1] - direct[1] * f_k[0]))
        if mismatch > CONTDIR_TOL:
            logger.warning("contdir angle disagrees with SVD frame by %.3g at z=%s k=%d",
                           mismatch, z.tolist(), k)
    return HyperbolicFrame(order=k, e_k=e_k, f_k=f_k, log_e=log_e, log_f=log_f, contdir_mismatch=mismatch)


def _field(fmap, z, k, ref):
    e = frame(fmap, z, k).e_k
    return e if e @ ref >= 0 else -e


def _integrate_branch(fmap, seed, k, direction, length, step, window):
    points, tangents = [], []
    z, d = seed.copy(), direction.copy()
    travelled = 0.0
    while travelled < length - 1e-15:
        h = min(step, length - travelled)
        try:
            k1 = _field(fmap, z, k, d)
            k2 = _field(fmap, z + 0.5 * h * k1, k, k1)
            k3 = _field(fmap, z + 0.5 * h * k2, k, k2)
            k4 = _field(fmap, z + h * k3, k, k3)
            nxt = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not inside(nxt, window):
                break
            d = _field(fmap, nxt, k, k4)
        except (DegenerateFrameError, OrbitEscapedError) as exc:
            logger.info("leaf integration stopped at %s: %s", z.tolist(), exc.message)
            break
        z = nxt
        travelled += h
        points.append(z.copy())
        tangents.append(d.copy())
    return points, tangents


def _require_domain(fmap, seed, k):
    if isinstance(fmap, HenonLikeMap) and not in_foliation_domain(fmap, seed, k):
        raise PreconditionError("seed outside V+ and V-_k", seed=seed.tolist(), k=k)


def integrate_stable_leaf(fmap, seed, k, arclength=0.2, step=1e-3, window=R_HAT, check_domain=True):
    """RK4 integration of the unit field e_k through seed, half the arclength each way.

    The seed must lie in V+ or V-_k of a Henon-like map; reference maps skip the check.
    """
    seed = np.asarray(seed, dtype=float)
    if check_domain:
        _require_domain(fmap, seed, k)
    e0 = frame(fmap, seed, k).e_k
    if arclength <= 0:
        curve = PolyCurve(seed[None, :], e0[None, :], np.zeros(1), np.zeros(1), f"leaf_k={k}")
        return FoliationLeaf(curve=curve, order=k, seed=seed)
    fwd, fwd_t = _integrate_branch(fmap, seed, k, e0, arclength / 2.0, step, window)
    bwd, bwd_t = _integrate_branch(fmap, seed, k, -e0, arclength / 2.0, step, window)
    vertices = np.array(bwd[::-1] + [seed] + fwd).reshape(-1, 2)
    tangents = np.array([-t for t in bwd_t[::-1]] + [e0] + fwd_t).reshape(-1, 2)
    _, kappa, s = piece_geometry(vertices)
    curve = PolyCurve(vertices, tangents, kappa, s, f"leaf_k={k}", (), {"seed": seed.tolist()})
    return FoliationLeaf(curve=curve, order=k, seed=seed)


def angle_between(u, v):
    """Unsigned angle between two lines in [0, pi/2]."""
    c = abs(float(np.dot(u, v))) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(min(1.0, c))


def leaf_convergence(fmap, seed, k_max, arclength=0.1, step=2e-3):
    """Angle between e_k and e_{k+1} at seed and the C0 gap of the order-k and k+1 leaves.

    The geometric decay ratio is fitted on angles above 1e-13; with fewer than
    two usable entries no ratio is reported.
    """
    seed = np.asarray(seed, dtype=float)
    _require_domain(fmap, seed, k_max)
    entries = []
    prev_frame = frame(fmap, seed, 1)
    prev_leaf = integrate_stable_leaf(fmap, seed, 1, arclength, step, check_domain=False)
    for k in range(1, k_max + 1):
        nxt_frame = frame(fmap, seed, k + 1)
        nxt_leaf = integrate_stable_leaf(fmap, seed, k + 1, arclength, step, check_domain=False)
        entries.append({"k": k, "angle": angle_between(prev_frame.e_k, nxt_frame.e_k),
                        "gap": prev_leaf.curve.hausdorff(nxt_leaf.curve)})
        prev_frame, prev_leaf = nxt_frame, nxt_leaf
    usable = [(e["k"], e["angle"]) for e in entries if e["angle"] > 1e-13]
    ratio = None
    if len(usable) >= 2:
        ks, angles = np.array(usable).T
        slope = np.polyfit(ks, np.log(angles), 1)[0]
        ratio = float(math.exp(slope))
    logger.debug("leaf convergence at %s: ratio %s", seed.tolist(), ratio)
    return {"seed": seed.tolist(), "entries": entries, "ratio": ratio}
