"""Region decomposition of the plane and sampled escape and localisation checks.

Bounds that depend on b use |b| so both orientation cases share one set of regions.
"""
import logging
import math

import numpy as np
from scipy.optimize import brentq

from errors import EscapeFailure, LocalizationFailure, PreconditionError
from fixed_points import find_fixed_points
from manifolds import R_HAT, _runs, grow_stable, grow_unstable, intersect_segments, monotone_x_arc
from models import DRegion, EscapeReport, LocalizationReport, PolyCurve, RefinementConfig

logger = logging.getLogger(__name__)

DELTA = 0.1
ESCAPE_BOX = 10.0
FORWARD_ESCAPE = ("V1", "V2", "V3")
BACKWARD_ESCAPE = ("V4", "V5", "V6")

# Sampling boxes for the escape grids, clipped to [-10, 10]^2.
_ESCAPE_BOXES = {
    "V1": lambda b: (-10.0, -2.0, -10.0, 10.0),
    "V2": lambda b: (-10.0, 2.0, -10.0, -4.0),
    "V3": lambda b: (2.0, 10.0, -10.0, 2.0),
    "V4": lambda b: (-2.0, 10.0, 2.0, 10.0),
    "V5": lambda b: (-10.0, -2.0, 2.0, 10.0),
    "V6": lambda b: (-2.0, 2.0, 4.0 * abs(b), 10.0),
}


class RegionContext:
    """Per-map data needed by the dynamical regions (q, its stable direction, D)."""

    def __init__(self, fmap, delta=DELTA, d_region=None):
        self.fmap = fmap
        self.delta = delta
        self.P, self.Q = find_fixed_points(fmap)
        self.q = self.Q.location
        self.stable_dir = self.Q.eigenvectors[1]
        self.unstable_dir = self.Q.eigenvectors[0]
        # Orient the side test so that positive means the side of W^s(q) containing p.
        side_p = _cross(self.stable_dir, self.P.location - self.q)
        self.side_sign = 1.0 if side_p >= 0 else -1.0
        self.d_region = d_region

    def in_q(self, points):
        return np.hypot(*(np.asarray(points) - self.q).T) < self.delta

    def side(self, points):
        """+1 on the p side of the local stable line of q, -1 on the other."""
        return np.sign(_cross(self.stable_dir, np.asarray(points) - self.q) * self.side_sign)


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _box(points, xmin, xmax, ymin, ymax, closed=False):
    x, y = points[..., 0], points[..., 1]
    if closed:
        return (x >= xmin) & (x <= xmax) & (y >= ymin) & (y <= ymax)
    return (x > xmin) & (x < xmax) & (y > ymin) & (y < ymax)


def static_membership(points, kind, b, epsilon=None):
    """Half-plane and box regions that need only b (and epsilon)."""
    points = np.asarray(points, dtype=float)
    x, y = points[..., 0], points[..., 1]
    bb = abs(b)
    if kind == "V1":
        return (x <= -2) & (y <= np.abs(x))
    if kind == "V2":
        return (x <= 2) & (y <= -4)
    if kind == "V3":
        return (x >= 2) & (y <= 2)
    if kind == "V4":
        return (x >= -2) & (y >= 2)
    if kind == "V5":
        return (x <= -2) & (y >= np.abs(x))
    if kind == "V6":
        return (np.abs(x) <= 2) & (y >= 4 * bb)
    if kind == "R":
        return _box(points, -2, 2, -4, 4 * bb)
    if kind == "Rhat":
        return _box(points, *R_HAT)
    if kind == "DeltaEps":
        if epsilon is None:
            raise PreconditionError("DeltaEps needs epsilon")
        return _box(points, -epsilon, epsilon, -4 * bb, 4 * bb)
    raise ValueError(f"Region '{kind}' needs the map context")


def q_orders(ctx, points, k_cap):
    """Number of consecutive iterates f^i(z), i = 0, 1, ..., that stay in Q (capped at k_cap + 1)."""
    z = np.array(points, dtype=float).reshape(-1, 2)
    count = np.zeros(len(z), dtype=int)
    alive = np.ones(len(z), dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(k_cap + 1):
            hit = alive & ctx.in_q(z)
            count[hit] += 1
            alive = hit
            if not alive.any():
                break
            z = np.where(alive[:, None], ctx.fmap.apply(z), z)
    return count


def in_v(ctx, points):
    """V: points near (1, 0) whose image lies in Q."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    with np.errstate(all="ignore"):
        return (points[:, 0] > 0) & _box(points, *R_HAT) & ctx.in_q(ctx.fmap.apply(points))


def v_orders(ctx, points, k_cap):
    """Largest k with z in V_k = f^{-1}(Q_k) and V; -1 outside V; inf at the cap."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    inv = in_v(ctx, points)
    with np.errstate(all="ignore"):
        counts = q_orders(ctx, ctx.fmap.apply(points), k_cap)
    orders = np.where(inv, counts - 1, -1).astype(float)
    orders[inv & (counts - 1 >= k_cap)] = math.inf
    return orders


def vk_order(fmap_or_ctx, z, k_cap=20):
    """Largest k <= k_cap with f(z) in V_k, Infinity at the cap, 0 when f(z) is not in V."""
    ctx = fmap_or_ctx if isinstance(fmap_or_ctx, RegionContext) else RegionContext(fmap_or_ctx)
    with np.errstate(all="ignore"):
        w = ctx.fmap.apply(np.asarray(z, dtype=float).reshape(-1, 2))
    orders = v_orders(ctx, w, k_cap)
    if orders[0] < 0:
        logger.debug("f(z) is not in V for z=%s", np.asarray(z).tolist())
        return 0
    return math.inf if math.isinf(orders[0]) else int(orders[0])


def membership(fmap_or_ctx, z, region):
    """Membership of one point (bool) or a batch (bool array) in a region."""
    points = np.asarray(z, dtype=float)
    single = points.ndim == 1
    points = points.reshape(-1, 2)
    if isinstance(region, DRegion):
        result = region.contains(points)
        return bool(result[0]) if single else result
    kind = region.kind
    if kind in ("V1", "V2", "V3", "V4", "V5", "V6", "R", "Rhat", "DeltaEps"):
        b = fmap_or_ctx.b if not isinstance(fmap_or_ctx, RegionContext) else fmap_or_ctx.fmap.b
        result = static_membership(points, kind, b, region.epsilon)
        return bool(result[0]) if single else result
    ctx = fmap_or_ctx if isinstance(fmap_or_ctx, RegionContext) else RegionContext(fmap_or_ctx, region.delta)
    n = region.n or 0
    if kind == "Q":
        result = ctx.in_q(points)
    elif kind == "Qn":
        result = q_orders(ctx, points, n) >= n + 1
    elif kind in ("Vn", "VnPlus", "VnMinus"):
        result = v_orders(ctx, points, n) >= n
        if kind != "Vn":
            with np.errstate(all="ignore"):
                side = ctx.side(ctx.fmap.apply(points))
            result &= (side > 0) if kind == "VnMinus" else (side <= 0)
    elif kind in ("D", "Delta"):
        if ctx.d_region is None:
            raise PreconditionError(f"Region '{kind}' needs a DRegion")
        if kind == "D":
            result = ctx.d_region.contains(points)
        else:
            with np.errstate(all="ignore"):
                images = ctx.fmap.apply(points)
            result = static_membership(points, "DeltaEps", ctx.fmap.b, region.epsilon) & ~ctx.d_region.contains(images)
    else:
        raise ValueError(f"Unknown region kind '{kind}'")
    return bool(result[0]) if single else result


def in_foliation_domain(fmap_or_ctx, z, k):
    """z in V^+ or in V^-_k, where the order-k stable foliation is defined."""
    ctx = fmap_or_ctx if isinstance(fmap_or_ctx, RegionContext) else RegionContext(fmap_or_ctx)
    points = np.asarray(z, dtype=float)
    single = points.ndim == 1
    points = points.reshape(-1, 2)
    orders = v_orders(ctx, points, k)
    with np.errstate(all="ignore"):
        side = ctx.side(ctx.fmap.apply(points))
    result = (orders >= 0) & ((side <= 0) | (orders >= k))
    return bool(result[0]) if single else result


def escape_grid(kind, b, grid):
    xmin, xmax, ymin, ymax = _ESCAPE_BOXES[kind](b)
    xs, ys = np.meshgrid(np.linspace(xmin, xmax, grid), np.linspace(ymin, ymax, grid))
    pts = np.column_stack((xs.ravel(), ys.ravel()))
    return pts[static_membership(pts, kind, b)]


def verify_escape(fmap, kind, grid=100, max_steps=40, raise_on_failure=False):
    """Iterate a grid of the region in its escape direction until it leaves [-10, 10]^2."""
    if kind not in FORWARD_ESCAPE + BACKWARD_ESCAPE:
        raise ValueError(f"Escape regions are V1..V6, got '{kind}'")
    if abs(fmap.a - 2.0) > 0.5 or abs(fmap.b) > 0.3:
        logger.warning("verify_escape outside its regime: a=%s b=%s", fmap.a, fmap.b)
    forward = kind in FORWARD_ESCAPE
    step = fmap.apply if forward else fmap.apply_inverse
    start = escape_grid(kind, fmap.b, grid)
    z = start.copy()
    steps = np.zeros(len(z), dtype=int)
    alive = np.ones(len(z), dtype=bool)
    doubling_violations = 0
    with np.errstate(all="ignore"):
        for n in range(1, max_steps + 1):
            if not alive.any():
                break
            nxt = step(z[alive])
            if kind == "V1":
                was_v1 = static_membership(z[alive], "V1", fmap.b)
                shrink = np.abs(nxt[:, 0]) < 2.0 * np.abs(z[alive][:, 0])
                doubling_violations += int(np.count_nonzero(was_v1 & shrink))
            z[alive] = nxt
            gone = ~(np.abs(nxt) <= ESCAPE_BOX).all(axis=1)
            idx = np.flatnonzero(alive)
            steps[idx[gone]] = n
            alive[idx[gone]] = False
    failures = [{"x": float(x), "y": float(y), "reason": f"still inside after {max_steps} steps"}
                for x, y in start[alive]]
    report = EscapeReport(region=kind, grid=grid, samples=len(start),
                          max_steps=int(steps.max()) if len(steps) else 0,
                          failures=failures, doubling_violations=doubling_violations,
                          direction="forward" if forward else "backward")
    if raise_on_failure and not report.passed:
        raise EscapeFailure("escape failure", failures=failures[:20],
                            doubling_violations=doubling_violations)
    return report


def locate_stable_leaf_point(ctx, y0, x_lo, x_hi, max_steps=80):
    """Point on f^{-1}(W^s(q)) along the horizontal line y = y0, by bisection on the exit side."""

    def exit_side(x):
        w = ctx.fmap.apply(np.array([x, y0]))
        for _ in range(max_steps):
            if not ctx.in_q(w):
                return ctx.side(w)
            w = ctx.fmap.apply(w)
        return 0.0

    s_lo, s_hi = exit_side(x_lo), exit_side(x_hi)
    if s_lo == 0:
        return np.array([x_lo, y0])
    if s_hi == 0:
        return np.array([x_hi, y0])
    if s_lo == s_hi:
        raise PreconditionError("no sign change", x_lo=x_lo, x_hi=x_hi, side=float(s_lo))
    lo, hi = x_lo, x_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        s_mid = exit_side(mid)
        if s_mid == 0:
            return np.array([mid, y0])
        if s_mid == s_lo:
            lo = mid
        else:
            hi = mid
    return np.array([0.5 * (lo + hi), y0])


def v_boundary(fmap, delta=DELTA, n_rays=180, r_max=0.5):
    """Polygon approximating the boundary of V = f^{-1}(Q) near (1, 0), traced along rays."""
    ctx = RegionContext(fmap, delta)
    q = ctx.q
    # centre: preimage of the point of the stable line of q whose preimage has x = 1
    s = (fmap.b - q[1]) / ctx.stable_dir[1] if ctx.stable_dir[1] != 0 else 0.0
    centre = fmap.apply_inverse(q + s * ctx.stable_dir)
    if np.hypot(*(fmap.apply(centre) - q)) >= delta:
        raise PreconditionError("V is empty near (1, 0) at this delta", b=fmap.b)

    def g(r, u):
        return np.hypot(*(fmap.apply(centre + r * u) - q)) - delta

    boundary = []
    for theta in np.linspace(0.0, 2.0 * np.pi, n_rays, endpoint=False):
        u = np.array([np.cos(theta), np.sin(theta)])
        if g(r_max, u) < 0:
            boundary.append(centre + r_max * u)
            continue
        boundary.append(centre + brentq(g, 0.0, r_max, args=(u,), xtol=1e-14) * u)
    return np.array(boundary)


def delta_containment_order(fmap, epsilon, k_cap=20, h=1e-3, ny=21, delta=DELTA):
    """Largest k with f(Delta_eps) inside V_k on a nested sampling grid (0 if some image misses V)."""
    ctx = RegionContext(fmap, delta)
    n = int(math.ceil(epsilon / h))
    xs = h * np.arange(-n + 1, n)
    xs = xs[np.abs(xs) < epsilon]
    bb = 4.0 * abs(fmap.b)
    ys = np.linspace(-bb, bb, ny + 2)[1:-1]
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack((X.ravel(), Y.ravel()))
    with np.errstate(all="ignore"):
        orders = v_orders(ctx, fmap.apply(pts), k_cap)
    worst = orders.min()
    if worst < 0:
        return 0
    return math.inf if math.isinf(worst) else int(worst)


def stable_leaf(ctx, tol=None):
    """f^{-1}(W^s_delta(q)) on the x > 0 side as a polyline.

    Two backward generations are grown so the local stable manifold covers the
    whole delta ball before the last pull-back; only vertices mapped into Q are kept.
    """
    ws = grow_stable(ctx.fmap, ctx.Q, generations=2, tol=tol)
    pieces = []
    for piece in ws.pieces():
        with np.errstate(all="ignore"):
            keep = ctx.in_q(ctx.fmap.apply(piece)) & (piece[:, 0] > 0)
        for lo, hi in _runs(keep):
            if hi - lo >= 2:
                pieces.append(piece[lo:hi])
    if not pieces:
        raise PreconditionError("f^-1(W^s_delta(q)) has no piece with x > 0", b=ctx.fmap.b)
    return PolyCurve.from_pieces(pieces, "leaf(Q)", {"delta": ctx.delta})


def verify_leaf_distance(fmap, k_max=8, samples=2000, seed=0, delta=DELTA, y_range=(-1.0, -0.5),
                         leaf=None):
    """Check d(z, f^{-1}(W^s_delta(q))) >= delta / 5^(k+2) on sampled z in V_k minus V_{k+1}.

    For such z the iterates z_1 .. z_{k+1} stay in Q and z_{k+2} is the first one
    outside, so the distance is pulled back through k + 2 steps of |Df| <= 5.
    Samples sit at log-uniform horizontal offsets from the leaf.
    """
    ctx = RegionContext(fmap, delta)
    rng = np.random.default_rng(seed)
    leaf = leaf if leaf is not None else stable_leaf(ctx)
    verts = leaf.vertices[np.argsort(leaf.vertices[:, 1])]
    y = rng.uniform(*y_range, size=samples)
    offsets = rng.choice((-1.0, 1.0), size=samples) * 10.0 ** rng.uniform(-9.0, -1.0, size=samples)
    pts = np.column_stack((np.interp(y, verts[:, 1], verts[:, 0]) + offsets, y))
    orders = v_orders(ctx, pts, k_max + 1)
    dist = leaf.distance_to(pts)
    per_k, min_distance, failures = {}, {}, []
    for k in range(k_max + 1):
        sel = orders == k
        per_k[k] = int(np.count_nonzero(sel))
        min_distance[k] = float(dist[sel].min()) if sel.any() else None
        bound = leaf_distance_bound(k, delta)
        for z, d in zip(pts[sel], dist[sel]):
            if d < bound:
                failures.append({"k": k, "x": float(z[0]), "y": float(z[1]), "distance": float(d),
                                 "bound": bound})
    if failures:
        logger.warning("leaf distance bound fails at %d samples", len(failures))
    return {"per_k": per_k, "min_distance": min_distance, "failures": failures, "passed": not failures}


def leaf_distance_bound(k, delta=DELTA):
    return delta / 5.0 ** (k + 2)


def build_d_region(fmap, tol=None, unstable_arclength=4.0):
    """Disc bounded above by the x-monotone arc of W^u(p) through p and below by f^{-1}(W^s_loc(q)).

    For b < 0 the same construction is used with the primed pieces of the
    orientation-preserving case.
    """
    tol = tol or RefinementConfig()
    P, Q = find_fixed_points(fmap)
    wu = grow_unstable(fmap, P, unstable_arclength, R_HAT, tol)
    top = monotone_x_arc(wu, wu.meta["anchor"])
    ws = grow_stable(fmap, Q, generations=1, tol=tol)
    top_curve = PolyCurve.from_pieces([top], "top")
    ia, ib, t = intersect_segments(top_curve, ws)
    if len(ia) < 2:
        raise PreconditionError("D boundary arcs do not close", crossings=len(ia))
    hits = top_curve.vertices[ia] + t[:, None] * (top_curve.vertices[ia + 1] - top_curve.vertices[ia])
    left, right = int(hits[:, 0].argmin()), int(hits[:, 0].argmax())
    arc = top_curve.vertices
    upper = np.vstack((hits[left], arc[ia[left] + 1:ia[right] + 1], hits[right]))
    j_l, j_r = ib[left], ib[right]
    if any(min(j_l, j_r) <= k < max(j_l, j_r) for k in ws.breaks):
        raise PreconditionError("D lower arc is split by the window", crossings=len(ia))
    if j_l < j_r:
        lower = ws.vertices[j_l + 1:j_r + 1][::-1]
    else:
        lower = ws.vertices[j_r + 1:j_l + 1]
    boundary = np.vstack((upper, lower))
    region = DRegion(boundary, "D", {"x_range": [float(hits[left, 0]), float(hits[right, 0])]})
    xmin, xmax, ymin, ymax = region.bbox
    if not (xmin > R_HAT[0] and xmax < R_HAT[1] and ymin > R_HAT[2] and ymax < R_HAT[3]):
        logger.warning("D region bbox %s leaves Rhat", region.bbox)
    return region


def verify_localization(fmap, d_region=None, wu_curve=None, samples=100_000, n_iter=50,
                        tol_loc=1e-2, area_samples=100_000, area_steps=5, seed=0, raise_on_failure=False):
    """Bounded orbits from D end in the strip near W^u(p); area of f^n(D) contracts like |b|^n.

    The area ratio is estimated over area_steps iterates, independent of n_iter.
    """
    if area_steps < 1:
        raise ValueError("area_steps must be at least 1")
    rng = np.random.default_rng(seed)
    if d_region is None:
        d_region = build_d_region(fmap)
    if wu_curve is None:
        P, _ = find_fixed_points(fmap)
        wu_curve = grow_unstable(fmap, P, 40.0, R_HAT)
    z = d_region.sample(samples, rng)
    alive = np.ones(len(z), dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(n_iter):
            z[alive] = fmap.apply(z[alive])
            alive &= (np.abs(z) <= ESCAPE_BOX).all(axis=1)
    ends = z[alive]
    bb = 4.0 * abs(fmap.b)
    in_strip = (np.abs(ends[:, 0]) <= 2.0) & (np.abs(ends[:, 1]) < bb)
    dist = wu_curve.distance_to(ends) if len(ends) else np.empty(0)
    bad = ~in_strip | (dist > tol_loc)
    violations = [{"x": float(x), "y": float(y), "distance": float(d)}
                  for (x, y), d in zip(ends[bad][:50], dist[bad][:50])]
    area_ratio = _area_ratio(fmap, d_region, area_steps, area_samples, rng)
    eta = 0.0 if fmap.phi.is_zero else fmap.params.eta_bound
    area_bound = (abs(fmap.b) + 12.0 * eta) ** area_steps * 1.1
    report = LocalizationReport(samples=samples, n_iter=n_iter, bounded=int(alive.sum()),
                                violations=violations, area_ratio=area_ratio,
                                area_bound=area_bound, tol_loc=tol_loc, area_steps=area_steps)
    if raise_on_failure and not report.passed:
        raise LocalizationFailure("localization failure", witnesses=violations[:10])
    return report


def _area_ratio(fmap, d_region, n, samples, rng):
    """Monte-Carlo estimate of area(f^n(D)) / area(D) as the mean of |det Df^n| over D."""
    z = d_region.sample(samples, rng)
    log_det = np.zeros(len(z))
    with np.errstate(all="ignore"):
        for _ in range(n):
            log_det += np.log(np.abs(np.linalg.det(fmap.jacobian(z))))
            z = fmap.apply(z)
    return float(np.exp(log_det).mean())
