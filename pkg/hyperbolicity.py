"""Uniform hyperbolicity diagnostics above the first tangency.

Covers the cone certificate outside Delta_eps, recovery times and N_a, the
constant C_a, the E^u / E^s splitting on an approximation of the non-wandering
set, Lyapunov exponents and periodic orbits.
"""
import itertools
import logging
import math

import numpy as np
from scipy.spatial import cKDTree

from curves_critical import extrapolate_critical_point
from errors import AnalysisError, OrbitEscapedError, PreconditionError
from extensions import parallel_map
from fixed_points import find_fixed_points
from hypcoord import accumulate, frames
from manifolds import R_HAT, grow_unstable, inside
from models import (ConeCertificate, HypConstants, LyapunovReport, OmegaSample, SegmentStat,
                    SplittingField)
from regions import RegionContext, build_d_region, static_membership, vk_order

logger = logging.getLogger(__name__)

MAX_PERIOD = 14
ESCAPE_BOX = 10.0


def _slope(v):
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.abs(v[..., 1] / v[..., 0])
    return np.where(np.isfinite(s), s, np.inf)


def sample_outside_delta(fmap, epsilon, n, rng, d_region=None, max_rounds=50):
    """Samples of D in the strip [-2, 2] x (-4|b|, 4|b|) minus Delta_eps; the strip alone without D."""
    bb = 4.0 * abs(fmap.b)
    chunks, total = [], 0
    for _ in range(max_rounds):
        pts = np.column_stack((rng.uniform(-2.0, 2.0, 4 * n), rng.uniform(-bb, bb, 4 * n)))
        keep = ~static_membership(pts, "DeltaEps", fmap.b, epsilon)
        if d_region is not None:
            keep &= d_region.contains(pts)
        chunks.append(pts[keep])
        total += int(keep.sum())
        if total >= n:
            break
    return np.vstack(chunks)[:n]


def cone_violations(fmap, points, alpha):
    """Points where Df maps a slope-<alpha vector (cone edges and horizontal) out of the cone."""
    J = fmap.jacobian(points)
    bad = np.zeros(len(points), dtype=bool)
    for v in ((1.0, alpha), (1.0, -alpha), (1.0, 0.0)):
        image = np.einsum("...ij,j->...i", J, np.array(v))
        bad |= _slope(image) >= alpha
    return [{"x": float(x), "y": float(y)} for x, y in points[bad]]


def _segment(fmap, z, epsilon, lambda_hat, log_target, max_len):
    """Orbit segment from z while outside Delta_eps; UE1 on every prefix, UE2 on a return."""
    v = np.array([1.0, 0.0])
    log_norm = 0.0
    worst = math.inf
    returns = False
    point = z
    length = 0
    with np.errstate(all="ignore"):
        for k in range(1, max_len + 1):
            point, v, gain = fmap.push_vector(point, v, 1)
            log_norm += float(gain)
            length = k
            if not np.all(np.isfinite(point)) or np.abs(point).max() > ESCAPE_BOX:
                break
            worst = min(worst, log_norm - lambda_hat * k)
            if static_membership(point, "DeltaEps", fmap.b, epsilon):
                returns = True
                break
    ue1 = worst >= log_target if math.isfinite(worst) else True
    ue2 = (log_norm >= lambda_hat * length) if returns else None
    stat = SegmentStat(start=(float(z[0]), float(z[1])), length=length, log_expansion=log_norm,
                       ue1_passed=bool(ue1), returns_to_delta=returns, ue2_passed=ue2)
    return stat, worst


def certify_outside(fmap, epsilon=0.15, alpha=0.5, lambda_hat=0.55, samples=10_000, segments=200,
                    max_len=60, C_eps_target=0.1, seed=0, d_region=None, a_star=None, wu=None):
    """Cone invariance and segment expansion outside Delta_eps.

    Cone samples cover D minus Delta_eps inside the strip |y| < 4|b| that holds
    Omega. Violations are recorded on the certificate, never raised.
    """
    below = a_star is not None and fmap.a < a_star
    if below:
        logger.warning("certify_outside at a=%s below a*=%s", fmap.a, a_star)
    rng = np.random.default_rng(seed)
    if d_region is None:
        try:
            d_region = build_d_region(fmap)
        except AnalysisError as exc:
            logger.info("sampling the strip instead of D: %s", exc.message)
    pts = sample_outside_delta(fmap, epsilon, samples, rng, d_region)
    slope_violations = cone_violations(fmap, pts, alpha)
    if wu is None:
        P, _ = find_fixed_points(fmap)
        wu = grow_unstable(fmap, P, 20.0, R_HAT)
    starts = wu.vertices[~static_membership(wu.vertices, "DeltaEps", fmap.b, epsilon)]
    if len(starts) > segments:
        starts = starts[np.linspace(0, len(starts) - 1, segments).astype(int)]
    log_target = math.log(C_eps_target)
    results = parallel_map(lambda z: _segment(fmap, z, epsilon, lambda_hat, log_target, max_len), starts)
    stats = [r[0] for r in results]
    worst = min((r[1] for r in results if math.isfinite(r[1])), default=0.0)
    cert = ConeCertificate(epsilon=epsilon, alpha=alpha, lambda_hat=lambda_hat, samples=len(pts),
                           slope_violations=slope_violations, segment_stats=stats,
                           measured_C_eps=float(math.exp(min(worst, 0.0))),
                           C_eps_target=C_eps_target, below_a_star=below)
    logger.info("cone certificate at a=%s: %d slope violations, measured C_eps %.4g",
                fmap.a, len(slope_violations), cert.measured_C_eps)
    return cert


def _nearest_tangents(curve, points):
    tree = cKDTree(curve.vertices)
    _, idx = tree.query(points)
    return curve.tangents[idx]


def omega_approximation(fmap, n_steps=100_000, keep=0.8, stay=100, d_region=None, wu=None,
                        survivor_steps=12, max_points=5000):
    """Orbit of a point of W^u_loc(p) filtered to D; survivors of W^u(p) in Rhat when it escapes."""
    P, _ = find_fixed_points(fmap)
    wu = wu if wu is not None else grow_unstable(fmap, P, 40.0, R_HAT)
    z0 = P.location + 1e-3 * P.eigenvectors[0]
    orbit = fmap.iterate(z0, n_steps + stay)
    if not orbit.escaped:
        if d_region is None:
            try:
                d_region = build_d_region(fmap)
            except AnalysisError as exc:
                logger.info("omega approximation without the D filter: %s", exc.message)
        pts = orbit.points
        if d_region is not None:
            in_d = d_region.contains(pts)
            stays = np.lib.stride_tricks.sliding_window_view(in_d, stay + 1).all(axis=1)
        else:
            stays = np.ones(len(pts) - stay, dtype=bool)
        start = int(len(stays) * (1.0 - keep))
        chosen = pts[start:len(stays)][stays[start:]]
        if len(chosen):
            chosen = chosen[np.linspace(0, len(chosen) - 1, min(max_points, len(chosen))).astype(int)]
            return OmegaSample(chosen, _nearest_tangents(wu, chosen), "orbit", wu)
    logger.debug("orbit from W^u_loc(p) escaped; using survivors of W^u(p)")
    z = wu.vertices
    alive = np.ones(len(z), dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(survivor_steps):
            z = fmap.apply(z)
            alive &= inside(z, R_HAT)
    base = wu.vertices[alive]
    if len(base) == 0:
        raise PreconditionError("empty omega approximation", a=fmap.a, b=fmap.b)
    base_t = wu.tangents[alive]
    if len(base) > max_points:
        pick = np.linspace(0, len(base) - 1, max_points).astype(int)
        base, base_t = base[pick], base_t[pick]
    pts, tans, _ = fmap.push_vector(base, base_t, survivor_steps // 2)
    return OmegaSample(pts, tans, "survivor", wu)


def solve_na(d_c_omega, lam, crit_gap_fn=None, cap=60):
    """Smallest N <= cap with 3^N d/2 >= e^{lam N} and d(C^(N), C) <= d/2."""
    if d_c_omega <= 0:
        raise PreconditionError("no valid N", d_c_omega=d_c_omega, reason="critical set meets omega")
    for n in range(1, cap + 1):
        if n * math.log(3.0) + math.log(d_c_omega / 2.0) < lam * n:
            continue
        if crit_gap_fn is not None and crit_gap_fn(n) > d_c_omega / 2.0:
            continue
        return n
    raise PreconditionError("no valid N", d_c_omega=d_c_omega, cap=cap)


def recovery_and_Na(fmap, lam, critical, omega, epsilon=0.15, cap=60):
    """Recovery times n(z) = min(vk_order, N_a) at returns of omega to Delta_eps.

    ``critical`` lists CriticalPoint records over increasing order; the limit
    critical point and its error bound come from geometric extrapolation.
    """
    limit, err = extrapolate_critical_point([c.c_k for c in critical])
    gaps = {c.order: float(np.linalg.norm(c.c_k - limit)) for c in critical}
    d_c_omega = float(np.hypot(*(omega.points - limit).T).min())

    def crit_gap(n):
        return gaps.get(n, err)

    N_a = solve_na(d_c_omega, lam, crit_gap, cap)
    ctx = RegionContext(fmap)
    returns = omega.points[static_membership(omega.points, "DeltaEps", fmap.b, epsilon)]
    per_point = []
    for z in returns:
        order = vk_order(ctx, z)
        n = int(min(order, N_a))
        if n == 0:
            per_point.append({"x": float(z[0]), "y": float(z[1]), "n": 0, "ok": True})
            continue
        image, v, log_norm = fmap.push_vector(z, np.array([1.0, 0.0]), n)
        per_point.append({"x": float(z[0]), "y": float(z[1]), "n": n, "log_norm": float(log_norm),
                          "image_slope": float(_slope(v)), "ok": bool(log_norm >= lam * n)})
    return {"N_a": N_a, "d_c_omega": d_c_omega, "critical_limit": limit.tolist(),
            "critical_error": err, "returns": per_point,
            "passed": all(p["ok"] for p in per_point)}


def _grid_on(d_region, fmap, n):
    if d_region is not None:
        xmin, xmax, ymin, ymax = d_region.bbox
    else:
        xmin, xmax, ymin, ymax = -2.0, 2.0, -4.0 * abs(fmap.b), 4.0 * abs(fmap.b)
    xs, ys = np.meshgrid(np.linspace(xmin, xmax, n), np.linspace(ymin, ymax, n))
    pts = np.column_stack((xs.ravel(), ys.ravel()))
    return pts[d_region.contains(pts)] if d_region is not None else pts


def assemble_Ca(fmap, N_a, lam, measured_C_eps, d_region=None, grid=200, omega=None, spot_samples=100,
                spot_max_n=50, seed=0, lambda_hat=0.55, epsilon=0.15, k0=3):
    """C_a = min(C_eps / C_N^+, C_N^- e^{-lam N_a} / C_N^+) with a spot check along W^u(p)."""
    C_plus, C_minus = 1.0, 1.0
    if N_a > 0:
        pts = _grid_on(d_region, fmap, grid)
        log_max, log_min = -math.inf, math.inf
        for j in range(1, N_a + 1):
            M, log_scale, log_det, escaped = accumulate(fmap, pts, j)
            S = np.linalg.svd(M, compute_uv=False)
            log_big = log_scale + np.log(S[:, 0])
            log_small = log_det - log_big
            ok = ~escaped & np.isfinite(log_small)
            if ok.any():
                log_max = max(log_max, float(log_big[ok].max()))
                log_min = min(log_min, float(log_small[ok].min()))
        C_plus, C_minus = math.exp(log_max), math.exp(log_min)
    C_a = min(measured_C_eps / C_plus, C_minus * math.exp(-lam * N_a) / C_plus)
    failures = []
    if omega is not None and len(omega):
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(omega), size=min(spot_samples, len(omega)), replace=False)
        ns = rng.integers(1, spot_max_n + 1, size=len(idx))
        for i, n in zip(idx, ns):
            z, v = omega.points[i], omega.tangents[i]
            with np.errstate(all="ignore"):
                image, _, log_norm = fmap.push_vector(z, v, int(n))
            if not np.all(np.isfinite(image)) or np.abs(image).max() > ESCAPE_BOX:
                continue
            if log_norm < math.log(C_a) + lam * n:
                failures.append({"x": float(z[0]), "y": float(z[1]), "n": int(n), "log_norm": float(log_norm)})
    return HypConstants(lam=lam, lambda_hat=lambda_hat, epsilon=epsilon, k0=k0, N_a=N_a,
                        C_N_plus=C_plus, C_N_minus=C_minus, C_eps=measured_C_eps, C_a=C_a,
                        spot_check_failures=failures)


def _line_angle(u, v):
    c = np.abs(np.einsum("...i,...i->...", u, v))
    c /= np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1)
    return np.arccos(np.clip(c, 0.0, 1.0))


def backward_push(fmap, z, v, n):
    """Df^{-n} applied to v along the backward orbit of z; returns (f^{-n}(z), unit vector, log gain)."""
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    log_gain = np.zeros(z.shape[:-1])
    for _ in range(n):
        z = fmap.apply_inverse(z)
        v = np.linalg.solve(fmap.jacobian(z), v[..., None])[..., 0]
        norm = np.linalg.norm(v, axis=-1)
        log_gain = log_gain + np.log(norm)
        v = v / np.expand_dims(norm, -1)
    return z, v, log_gain


def splitting_diagnostics(fmap, omega=None, k_split=8, samples=2000, seed=0, steps=None):
    """Angles between E^u (W^u tangents) and E^s (order-k_split contracted direction)."""
    omega = omega if omega is not None else omega_approximation(fmap)
    pts, e_u = omega.points, omega.tangents
    if len(pts) > samples:
        pick = np.sort(np.random.default_rng(seed).choice(len(pts), samples, replace=False))
        pts, e_u = pts[pick], e_u[pick]
    e_u = e_u / np.linalg.norm(e_u, axis=1)[:, None]
    e_s, _, _, _ = frames(fmap, pts, k_split)
    ok = np.all(np.isfinite(e_s), axis=1)
    pts, e_u, e_s = pts[ok], e_u[ok], e_s[ok]
    angles = _line_angle(e_u, e_s)
    steps = steps or k_split
    with np.errstate(all="ignore"):
        _, _, forward_logs = fmap.push_vector(pts, e_u, steps)
        _, _, backward_logs = backward_push(fmap, pts, e_u, steps)
    modulus = {}
    tree = cKDTree(pts) if len(pts) else None
    for h in (1e-2, 1e-3):
        pairs = tree.query_pairs(h, output_type="ndarray") if tree is not None else np.empty((0, 2), int)
        modulus[h] = float(np.abs(angles[pairs[:, 0]] - angles[pairs[:, 1]]).max()) if len(pairs) else 0.0
    defect = 0.0
    if omega.curve is not None and len(pts):
        images = fmap.apply(pts)
        dist = omega.curve.distance_to(images)
        matched = dist < 1e-4
        if matched.any():
            pushed = np.einsum("...ij,...j->...i", fmap.jacobian(pts[matched]), e_u[matched])
            defect = float(_line_angle(pushed, _nearest_tangents(omega.curve, images[matched])).max())
    return SplittingField(points=pts, e_u=e_u, e_s=e_s, angles=angles, forward_logs=forward_logs,
                          backward_logs=backward_logs, modulus=modulus, invariance_defect=defect,
                          k_split=k_split)


def backward_contraction_check(fmap, omega, C, lam, n=10):
    """||Df^{-n} v_u|| <= C^{-1} e^{-lam n} at omega samples."""
    with np.errstate(all="ignore"):
        _, _, logs = backward_push(fmap, omega.points, omega.tangents, n)
    bound = -math.log(C) - lam * n
    bad = ~(logs <= bound)
    failures = [{"x": float(z[0]), "y": float(z[1]), "log_norm": float(g)}
                for z, g in zip(omega.points[bad], logs[bad])]
    return {"n": n, "log_bound": bound, "max_log_norm": float(np.nanmax(logs)) if len(logs) else None,
            "failures": failures, "passed": not failures}


def lyapunov_orbit(fmap, z, n, transient=0, label="orbit", truncate=True):
    """Lyapunov exponents along the orbit of z by QR re-orthogonalisation of the tangent frame."""
    if n < 1:
        raise PreconditionError("n must be positive for Lyapunov exponents", n=n)
    z = np.asarray(z, dtype=float)
    Q = np.eye(2)
    sums = np.zeros(2)
    log_det = 0.0
    steps = 0
    blowup = getattr(fmap, "blowup", 1e6)
    points = [z]
    with np.errstate(all="ignore"):
        for i in range(transient + n):
            J = fmap.jacobian(z)
            Q, R = np.linalg.qr(J @ Q)
            z = fmap.apply(z)
            if not np.all(np.isfinite(z)) or np.abs(z).max() > blowup:
                if not truncate or steps == 0:
                    raise OrbitEscapedError("orbit escaped", step=i, label=label)
                logger.info("orbit %s escaped after %d counted steps", label, steps)
                break
            if i >= transient:
                sums += np.log(np.abs(np.diag(R)))
                log_det += math.log(abs(np.linalg.det(J)))
                steps += 1
                points.append(z)
    escaped = steps < n
    lam = np.sort(sums / steps)[::-1]
    residual = abs(lam[0] + lam[1] - log_det / steps)
    return LyapunovReport(label=label, lambda_u=float(lam[0]), lambda_s=float(lam[1]), n=steps,
                          residual=float(residual), escaped=escaped, points=np.array(points))


def periodic_exponents(fmap, orbit, label=None):
    """Exponents of a periodic orbit from the eigenvalues of the cycle Jacobian."""
    orbit = np.asarray(orbit, dtype=float).reshape(-1, 2)
    p = len(orbit)
    M = np.eye(2)
    log_det = 0.0
    for z in orbit:
        J = fmap.jacobian(z)
        M = J @ M
        log_det += math.log(abs(np.linalg.det(J)))
    eig = np.sort(np.log(np.abs(np.linalg.eigvals(M))) / p)[::-1]
    residual = abs(eig[0] + eig[1] - log_det / p)
    return LyapunovReport(label=label or f"period-{p}", lambda_u=float(eig[0]), lambda_s=float(eig[1]),
                          n=p, residual=float(residual), period=p, points=orbit)


def _itinerary_seeds(a, b, p, sweeps=40):
    """Seeds from x_i = s_i sqrt((1 - x_{i+1} + b x_{i-1}) / a) over every sign itinerary."""
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=p)))
    x = 0.5 * signs
    for _ in range(sweeps):
        nxt = np.roll(x, -1, axis=1)
        prev = np.roll(x, 1, axis=1)
        x = signs * np.sqrt(np.clip((1.0 - nxt + b * prev) / a, 0.0, None))
    return np.column_stack((x[:, 0], b * x[:, -1]))


def _solve2(A, r):
    """Batched 2x2 solve; singular rows give NaN instead of raising."""
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    x0 = (A[:, 1, 1] * r[:, 0] - A[:, 0, 1] * r[:, 1]) / det
    x1 = (A[:, 0, 0] * r[:, 1] - A[:, 1, 0] * r[:, 0]) / det
    return np.column_stack((x0, x1))


def _newton_cycles(fmap, seeds, p, max_iter=50):
    z = seeds.copy()
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            w = z.copy()
            M = np.broadcast_to(np.eye(2), (len(z), 2, 2)).copy()
            for _ in range(p):
                M = fmap.jacobian(w) @ M
                w = fmap.apply(w)
            residual = w - z
            step = _solve2(M - np.eye(2), residual)
            z = z - step
            if np.all(~np.isfinite(z).all(axis=1) | (np.abs(step).max(axis=1) < 1e-14)):
                break
        w = z.copy()
        for _ in range(p):
            w = fmap.apply(w)
        err = np.abs(w - z).max(axis=1)
    return z, np.isfinite(err) & (err < 1e-10)


def periodic_orbits(fmap, max_period=6, window=R_HAT):
    """Periodic orbits of primitive period <= max_period inside the window with their exponents."""
    if max_period > MAX_PERIOD:
        raise PreconditionError("max_period above the seed budget", max_period=max_period, cap=MAX_PERIOD)
    found = []
    canon = []
    for p in range(1, max_period + 1):
        seeds = _itinerary_seeds(fmap.a, fmap.b, p)
        z, ok = _newton_cycles(fmap, seeds, p)
        for start in z[ok]:
            orbit = fmap.iterate(start, p - 1).points
            if not inside(orbit, window).all():
                continue
            primitive = next(d for d in range(1, p + 1)
                             if np.abs(fmap.iterate(start, d).points[-1] - start).max() < 1e-8)
            if primitive != p:
                continue
            key = orbit[np.lexsort((orbit[:, 1], orbit[:, 0]))[0]]
            if any(np.abs(key - c).max() < 1e-6 for c in canon):
                continue
            canon.append(key)
            found.append((orbit, periodic_exponents(fmap, orbit)))
    logger.info("found %d periodic orbits up to period %d", len(found), max_period)
    return found
