"""Admissible curves, exact curvature pushforward and critical points of order k."""
import logging
import math

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from errors import PreconditionError, RootFindingError
from extensions import parallel_map
from hypcoord import frames
from models import AdmissibleCurve, CriticalPoint, PolyCurve
from regions import vk_order

logger = logging.getLogger(__name__)

ALPHA = 0.5
SCAN_POINTS = 64
ROOT_TOL = 1e-10


class ParametrizedCurve:
    """C^2 curve given by callables for gamma, gamma' and gamma''."""

    def __init__(self, point, velocity, acceleration, t_range, tag="curve"):
        self._point = point
        self._velocity = velocity
        self._acceleration = acceleration
        self.t_range = (float(t_range[0]), float(t_range[1]))
        self.tag = tag

    def __repr__(self):
        return f'<ParametrizedCurve {self.tag} t={self.t_range}>'

    def point(self, t):
        return np.asarray(self._point(np.asarray(t, dtype=float)), dtype=float)

    def velocity(self, t):
        return np.asarray(self._velocity(np.asarray(t, dtype=float)), dtype=float)

    def acceleration(self, t):
        return np.asarray(self._acceleration(np.asarray(t, dtype=float)), dtype=float)

    @classmethod
    def segment(cls, start, direction, t_range, tag="segment"):
        start = np.asarray(start, dtype=float)
        direction = np.asarray(direction, dtype=float)

        def point(t):
            return start + np.multiply.outer(t, direction)

        def velocity(t):
            return np.broadcast_to(direction, np.shape(t) + (2,)).copy()

        def acceleration(t):
            return np.zeros(np.shape(t) + (2,))

        return cls(point, velocity, acceleration, t_range, tag)

    @classmethod
    def horizontal(cls, x0, y0, half_length, tag="horizontal"):
        return cls.segment((x0, y0), (1.0, 0.0), (-half_length, half_length), tag)

    @classmethod
    def circle(cls, center, radius, tag="circle"):
        cx, cy = center

        def point(t):
            return np.stack((cx + radius * np.cos(t), cy + radius * np.sin(t)), axis=-1)

        def velocity(t):
            return np.stack((-radius * np.sin(t), radius * np.cos(t)), axis=-1)

        def acceleration(t):
            return np.stack((-radius * np.cos(t), -radius * np.sin(t)), axis=-1)

        return cls(point, velocity, acceleration, (0.0, 2.0 * math.pi), tag)


class SplineCurve(ParametrizedCurve):
    """Cubic spline through one piece of a PolyCurve, parametrised by arclength."""

    def __init__(self, curve, piece=0):
        verts = curve.pieces()[piece] if isinstance(curve, PolyCurve) else np.asarray(curve, dtype=float)
        s = np.concatenate(([0.0], np.cumsum(np.hypot(*np.diff(verts, axis=0).T))))
        spline = CubicSpline(s, verts, axis=0)
        tag = curve.tag if isinstance(curve, PolyCurve) else "spline"
        super().__init__(spline, lambda t: spline(t, 1), lambda t: spline(t, 2), (s[0], s[-1]), tag)
        self.spline = spline


def as_parametrized(curve):
    if isinstance(curve, AdmissibleCurve):
        curve = curve.curve
    if isinstance(curve, PolyCurve):
        return SplineCurve(curve)
    return curve


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def signed_curvature(velocity, acceleration):
    speed = np.linalg.norm(velocity, axis=-1)
    if np.any(speed < 1e-12):
        raise PreconditionError("singular parametrization", min_speed=float(np.min(speed)))
    return _cross(velocity, acceleration) / speed ** 3


def curvature_at(curve, t):
    """kappa = |gamma' x gamma''| / |gamma'|^3 at parameter t."""
    if isinstance(curve, AdmissibleCurve):
        curve = curve.curve
    if isinstance(curve, PolyCurve):
        return float(abs(np.interp(t, curve.param, curve.curvatures)))
    return float(abs(signed_curvature(curve.velocity(t), curve.acceleration(t))))


def push_jet(fmap, z, v, acc):
    """One step of (gamma, gamma', gamma'') under f, using D^2 f for the second derivative."""
    J = fmap.jacobian(z)
    H = fmap.second_derivatives(z)
    v_new = np.einsum("...ij,...j->...i", J, v)
    acc_new = np.einsum("...ijk,...j,...k->...i", H, v, v) + np.einsum("...ij,...j->...i", J, acc)
    return fmap.apply(z), v_new, acc_new


def jets(curve, t):
    """Points, velocities and accelerations of a curve at parameters t."""
    if isinstance(curve, PolyCurve):
        t = np.asarray(t, dtype=float)
        pts = np.column_stack([np.interp(t, curve.param, curve.vertices[:, i]) for i in range(2)])
        tan = np.column_stack([np.interp(t, curve.param, curve.tangents[:, i]) for i in range(2)])
        tan /= np.linalg.norm(tan, axis=1)[:, None]
        kappa = np.interp(t, curve.param, curve.curvatures)
        normal = np.column_stack((-tan[:, 1], tan[:, 0]))
        return pts, tan, kappa[:, None] * normal
    return curve.point(t), curve.velocity(t), curve.acceleration(t)


def default_params(curve, n):
    if isinstance(curve, PolyCurve):
        return curve.param.copy()
    return np.linspace(*curve.t_range, n)


def image_curve(fmap, curve, samples=201):
    """f(curve) with tangents from Df and curvatures from the exact pushforward."""
    if isinstance(curve, AdmissibleCurve):
        curve = curve.curve
    t = default_params(curve, samples)
    z, v, acc = jets(curve, t)
    pts, v1, acc1 = push_jet(fmap, z, v, acc)
    speed = np.linalg.norm(v1, axis=1)
    tangents = v1 / np.where(speed > 0, speed, 1.0)[:, None]
    kappa = signed_curvature(v1, acc1)
    s = np.concatenate(([0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))))
    tag = getattr(curve, "tag", "curve")
    return PolyCurve(pts, tangents, kappa, s, f"f({tag})", (), {"source": tag, "samples": len(t)})


def certify_admissible(curve, alpha=ALPHA, epsilon=0.15, samples=201):
    """Slope and curvature bounds of the curve against alpha, plus the long-curve test on Delta_eps."""
    if isinstance(curve, PolyCurve):
        pts, tan, kappa = curve.vertices, curve.tangents, curve.curvatures
    else:
        t = np.linspace(*curve.t_range, samples)
        pts, vel, acc = jets(curve, t)
        tan = vel
        kappa = signed_curvature(vel, acc)
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.abs(tan[:, 1] / tan[:, 0])
    slopes = np.where(np.isfinite(slopes), slopes, np.inf)
    x_lo, x_hi = float(pts[:, 0].min()), float(pts[:, 0].max())
    return AdmissibleCurve(curve=curve, alpha=alpha,
                           max_slope=float(slopes.max()),
                           max_curvature=float(np.abs(kappa).max()),
                           is_long=bool(x_lo <= -epsilon and x_hi >= epsilon),
                           epsilon=epsilon)


def k0_constant(delta=0.1):
    """Smallest k with (sqrt(delta) / 2 sqrt 3) * sqrt(3 / sqrt 5)^(k - 1) > 1."""
    base = math.log(math.sqrt(delta) / (2.0 * math.sqrt(3.0)))
    step = 0.5 * math.log(3.0 / math.sqrt(5.0))
    k = 1
    while base + (k - 1) * step <= 0:
        k += 1
    return k


def lambda_constant(lambda_hat=0.55):
    return min(0.5 * math.log(3.0 / math.sqrt(5.0)), lambda_hat)


def hyperbolic_time_curvature_check(fmap, curve, n, lam=None, alpha=ALPHA, eta=0.0, samples=64,
                                    lambda_hat=0.55):
    """Curvature decrease at hyperbolic times n of an admissible curve.

    s is a hyperbolic time when |gamma_n'(s)| >= e^{lam j} |gamma_{n-j}'(s)| for
    every j = 1..n. There kappa_n < max(kappa_0, kappa_floor) and kappa_n < alpha
    must hold, with kappa_floor = 2a(|b| + 12 eta) covering straight curves.
    """
    curve = as_parametrized(curve)
    lam = lambda_constant(lambda_hat) if lam is None else lam
    if n < 1:
        return {"n": n, "flag": "n >= 1 required", "samples": 0, "hyperbolic_times": 0,
                "failures": [], "passed": False}
    t = np.linspace(*curve.t_range, samples)
    z, v, acc = jets(curve, t)
    kappa0 = np.abs(signed_curvature(v, acc))
    if np.any(kappa0 >= alpha):
        raise PreconditionError("initial curvature is not below alpha",
                                max_curvature=float(kappa0.max()), alpha=alpha)
    log_speed = [np.log(np.linalg.norm(v, axis=1))]
    with np.errstate(all="ignore"):
        for _ in range(n):
            z, v, acc = push_jet(fmap, z, v, acc)
            log_speed.append(np.log(np.linalg.norm(v, axis=1)))
        kappa_n = np.abs(_cross(v, acc) / np.linalg.norm(v, axis=1) ** 3)
    log_speed = np.array(log_speed)
    hyperbolic = np.ones(samples, dtype=bool)
    for j in range(1, n + 1):
        hyperbolic &= log_speed[n] >= lam * j + log_speed[n - j] - 1e-12
    if not hyperbolic.any():
        raise PreconditionError("no hyperbolic times found", n=n, samples=samples)
    floor = 2.0 * fmap.a * (abs(fmap.b) + 12.0 * eta)
    target = np.maximum(kappa0, floor)
    ok = (kappa_n < target) & (kappa_n < alpha)
    failures = [{"t": float(t[i]), "kappa_0": float(kappa0[i]), "kappa_n": float(kappa_n[i])}
                for i in np.flatnonzero(hyperbolic & ~ok)]
    margins = (target - kappa_n)[hyperbolic]
    return {"n": n, "lambda": lam, "kappa_floor": floor, "samples": samples,
            "hyperbolic_times": int(hyperbolic.sum()), "failures": failures,
            "worst_margin": float(margins.min()), "max_kappa_n": float(kappa_n[hyperbolic].max()),
            "passed": not failures}


def _tangency(fmap, curve, t, k):
    """Sine of the angle from Df(gamma') to e_k at f(gamma(t)), with e_k itself."""
    z, v, _ = jets(curve, np.atleast_1d(t))
    u = np.einsum("...ij,...j->...i", fmap.jacobian(z), v)
    u = u / np.linalg.norm(u, axis=-1)[..., None]
    e, _, _, _ = frames(fmap, fmap.apply(z), k)
    return _cross(u, e), e


def find_critical_point(fmap, curve, k, scan=SCAN_POINTS):
    """Unique parameter where f(gamma) is tangent to the order-k stable direction."""
    param = as_parametrized(curve)
    t = np.linspace(*param.t_range, scan)
    with np.errstate(all="ignore"):
        sine, e = _tangency(fmap, param, t, k)
    valid = np.isfinite(sine)
    tv, sv, ev = t[valid], sine[valid], e[valid]
    # e_k is a line; a flip of its representative is not a root
    same_side = np.einsum("ij,ij->i", ev[:-1], ev[1:]) > 0
    change = (np.sign(sv[:-1]) != np.sign(sv[1:])) & same_side
    idx = np.flatnonzero(change)
    if len(idx) == 0:
        raise RootFindingError("no sign change", order=k, valid_samples=int(valid.sum()))
    if len(idx) > 1:
        raise RootFindingError("multiple roots", order=k, brackets=[[float(tv[i]), float(tv[i + 1])] for i in idx])
    i = idx[0]

    def g(s):
        return float(_tangency(fmap, param, s, k)[0][0])

    t_star = brentq(g, tv[i], tv[i + 1], xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    residual = abs(g(t_star))
    if residual > ROOT_TOL:
        logger.warning("critical point of order %d: residual %.3g above %.0e", k, residual, ROOT_TOL)
    z, v, acc = jets(param, np.atleast_1d(t_star))
    c0, v1, acc1 = push_jet(fmap, z, v, acc)
    image_kappa = float(abs(signed_curvature(v1, acc1)[0]))
    if fmap.b != 0 and image_kappa <= fmap.a / abs(fmap.b):
        logger.warning("image curvature %.4g at order-%d critical point is not above a/|b| = %.4g",
                       image_kappa, k, fmap.a / abs(fmap.b))
    return CriticalPoint(order=k, t=float(t_star), c_k=z[0], c0_k=c0[0], residual=residual,
                         image_curvature=image_kappa, a=fmap.a, b=fmap.b)


def critical_points(fmap, curve, orders):
    return parallel_map(lambda k: find_critical_point(fmap, curve, k), list(orders))


def extrapolate_critical_point(points):
    """Geometric-series limit of c0_k and an error bound 2 gap_K r / (1 - r)."""
    seq = [np.asarray(p.c0_k if isinstance(p, CriticalPoint) else p, dtype=float) for p in points]
    if len(seq) < 3:
        raise PreconditionError("at least three orders are needed", available=len(seq))
    gaps = np.array([np.linalg.norm(q - p) for p, q in zip(seq[:-1], seq[1:])])
    if gaps[-1] == 0.0:
        return seq[-1], 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = gaps[1:] / gaps[:-1]
    for r_prev, r_next in zip(ratios[:-1], ratios[1:]):
        if not (np.isfinite(r_prev) and np.isfinite(r_next)) or abs(r_next - r_prev) > 0.5 * max(r_prev, r_next):
            raise PreconditionError("non-geometric decay", ratios=ratios.tolist())
    r = float(ratios[-1])
    if not 0.0 <= r < 1.0:
        raise PreconditionError("non-geometric decay", ratios=ratios.tolist())
    limit = seq[-1] + (seq[-1] - seq[-2]) * r / (1.0 - r)
    return limit, float(2.0 * gaps[-1] * r / (1.0 - r))


def binding_expansion_check(fmap, curve, t, k=None, critical=None, lam=None, lambda_hat=0.55):
    """Expansion of the curve tangent at z = gamma(t) while the orbit shadows the critical orbit."""
    param = as_parametrized(curve)
    lam = lambda_constant(lambda_hat) if lam is None else lam
    z, v, _ = jets(param, np.atleast_1d(t))
    z, w = z[0], v[0] / np.linalg.norm(v[0])
    if k is None:
        k = vk_order(fmap, z)
        if math.isinf(k):
            raise PreconditionError("f(z) never leaves V at the cap", z=z.tolist())
    critical = critical or find_critical_point(fmap, param, k)
    d = float(np.linalg.norm(z - critical.c_k))
    report = {"k": k, "z": z.tolist(), "distance": d, "lambda": lam, "degenerate": False}
    if d < 1e-14:
        report.update(degenerate=True, chain=[], final_ok=None, critdist_ok=None, passed=True)
        return report
    chain = []
    log_norm = 0.0
    point, vec = z, w
    for j in range(k + 1):
        point, vec, gain = fmap.push_vector(point, vec, 1)
        log_norm += float(gain)
        bound = math.log(0.5) + j * math.log(3.0) + math.log(d)
        chain.append({"j": j, "log_norm": log_norm, "log_bound": bound, "ok": log_norm >= bound})
    final_bound = lam * (k + 1)
    critdist = d >= 0.5 * math.sqrt(np.linalg.norm(fmap.apply(z) - critical.c0_k)) / 3.0
    report.update(chain=chain, final_log_norm=log_norm, final_log_bound=final_bound,
                  final_ok=log_norm >= final_bound, critdist_ok=bool(critdist))
    report["passed"] = all(c["ok"] for c in chain) and report["final_ok"] and report["critdist_ok"]
    return report
