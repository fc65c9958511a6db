"""First-tangency parameter a*, the four-crossing parameter a-hat, and parameter scans.

gap(a) > 0 means the case-appropriate compact pieces are separated; it turns
negative once they cross.
"""
from dataclasses import asdict, dataclass
import logging
import math

import numpy as np

from errors import AnalysisError, BracketError, OrderingError
from extensions import parallel_map
from fixed_points import find_fixed_points
import hyperbolicity
from manifolds import R_HAT, clip_curve, crossings, grow_stable, grow_unstable, local_unstable_fold, select_pieces
from map_core import HenonLikeMap
from models import RefinementConfig, TangencyReport

logger = logging.getLogger(__name__)

REVERSING = "ReversingPQ"
PRESERVING = "PreservingQQ"
OBSERVABLES = ("gap", "crossings", "min_splitting_angle", "lyapunov_min")


@dataclass(frozen=True)
class TangencySettings:
    """Versioned convention for the compact pieces compared by gap()."""

    radius: float = 0.5
    unstable_arclength: float = 8.0
    stable_generations_p: int = 5
    stable_generations_q: int = 3
    local_unstable_arclength: float = 6.0
    local_stable_generations: int = 1
    version: str = "1"

    def to_dict(self):
        return asdict(self)


def case_for(b):
    return REVERSING if b > 0 else PRESERVING


def _nearest_piece(curve, point):
    best, best_i = math.inf, None
    for i, piece in enumerate(curve.pieces()):
        d = float(np.hypot(*(piece - point).T).min())
        if d < best:
            best, best_i = d, i
    return best_i


def compact_pieces(fmap, settings=None, tol=None):
    """Returning folds of Gamma^u(q) and the stable leaf nearest q inside the tangency window."""
    settings = settings or TangencySettings()
    tol = tol or RefinementConfig()
    P, Q = find_fixed_points(fmap)
    qx, qy = Q.location
    r = settings.radius
    window = (qx - r, qx + r, qy - r, qy + r)
    wu = clip_curve(grow_unstable(fmap, Q, settings.unstable_arclength, R_HAT, tol), window, "Gamma_u(q)")
    through_q = _nearest_piece(wu, Q.location)
    folds = select_pieces(wu, lambda i, piece: i != through_q)
    if case_for(fmap.b) == REVERSING:
        ws = grow_stable(fmap, P, generations=settings.stable_generations_p, tol=tol)
        tag = "Gamma_s(p)"
    else:
        ws = grow_stable(fmap, Q, generations=settings.stable_generations_q, tol=tol)
        tag = "Gamma_s(q)"
    ws = clip_curve(ws, window, tag)
    inner = _nearest_piece(ws, Q.location)
    leaf = select_pieces(ws, lambda i, piece: i == inner)
    return folds, leaf


def gap_witness(params, a, settings=None, tol=None):
    """Signed clearance at a together with the crossing report and the pieces' tags."""
    settings = settings or TangencySettings()
    fmap = HenonLikeMap(params.with_a(a), check_eta=False)
    folds, leaf = compact_pieces(fmap, settings, tol)
    case = case_for(params.b)
    if len(folds) == 0 or len(leaf) == 0:
        logger.debug("no returning fold in the tangency window at a=%s", a)
        return {"a": a, "case": case, "gap": settings.radius, "report": None,
                "manifolds": [folds.tag, leaf.tag]}
    report = crossings(folds, leaf)
    return {"a": a, "case": case, "gap": float(report.min_clearance), "report": report,
            "manifolds": [folds.tag, leaf.tag]}


def gap(params, a, settings=None, tol=None):
    return gap_witness(params, a, settings, tol)["gap"]


def _scan_gaps(params, a_values, settings, tol):
    return parallel_map(lambda a: gap(params, a, settings, tol), a_values)


def _sign_changes(values):
    s = np.sign(values)
    return int(np.count_nonzero(s[:-1] != s[1:]))


def find_a_star(params, bracket=(1.8, 2.3), tol=1e-8, scan_points=64, settings=None, refinement=None):
    """Bisection for the first crossing of the compact pieces inside bracket."""
    settings = settings or TangencySettings()
    a_lo, a_hi = map(float, bracket)
    grid = np.linspace(a_lo, a_hi, max(scan_points, 2))
    values = np.array(_scan_gaps(params, grid, settings, refinement))
    samples = [{"a": float(a), "gap": float(g)} for a, g in zip(grid, values)]
    if not (values[0] > 0 > values[-1]):
        raise BracketError("bracket has no sign change", bracket=[a_lo, a_hi],
                           gaps=[float(values[0]), float(values[-1])])
    if _sign_changes(values) > 1:
        raise BracketError("multiple sign changes", scan=samples)
    # start from the scan cell holding the sign change
    j = int(np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))[0])
    lo, hi = float(grid[j]), float(grid[j + 1])
    history = [{"lo": lo, "hi": hi}]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g = gap(params, mid, settings, refinement)
        if g > 0:
            lo = mid
        else:
            hi = mid
        history.append({"lo": lo, "hi": hi, "gap": g})
    witness = gap_witness(params, hi, settings, refinement)
    report = witness["report"]
    logger.info("a* = %.10f (%s, b=%s)", 0.5 * (lo + hi), case_for(params.b), params.b)
    return TangencyReport(a_star=0.5 * (lo + hi), case=case_for(params.b), tol=tol,
                          bracket_history=history, gap_samples=samples,
                          witness=report.witness if report is not None else None,
                          manifolds=witness["manifolds"], settings=settings.to_dict())


def _touching_radius(curve, point):
    """Longest segment of ``curve`` meeting its vertex nearest ``point``."""
    v = curve.vertices
    i = int(np.hypot(*(v - point).T).argmin())
    ends = [v[j] for j in (i - 1, i + 1) if 0 <= j < len(v)]
    return max((float(np.hypot(*(e - v[i]))) for e in ends), default=0.0)


def local_crossing_count(fmap, settings=None, tol=None):
    """Crossings of W^u_loc and W^s_loc of p (b > 0) or q (b < 0); the fixed point counts once.

    Intersections on the segments that meet the fixed point are the fixed point
    itself, so the refinement spacing must stay below the O(b) sheet separation.
    """
    settings = settings or TangencySettings()
    tol = tol or RefinementConfig()
    P, Q = find_fixed_points(fmap)
    fp = P if fmap.b > 0 else Q
    wu = local_unstable_fold(fmap, fp, settings.local_unstable_arclength, R_HAT, tol)
    ws = grow_stable(fmap, fp, generations=settings.local_stable_generations, tol=tol)
    report = crossings(wu, ws)
    radius = max(_touching_radius(wu, fp.location), _touching_radius(ws, fp.location)) * (1.0 + 1e-9)
    away = [pt for pt, _ in report.points if np.hypot(*(pt - fp.location)) > radius]
    return len(away) + 1


def find_a_hat(params, bracket=(1.5, 2.3), tol=1e-8, settings=None, refinement=None, a_star=None):
    """Bisection on the boundary of the four-crossing predicate."""
    settings = settings or TangencySettings()

    def predicate(a):
        fmap = HenonLikeMap(params.with_a(a), check_eta=False)
        return local_crossing_count(fmap, settings, refinement) >= 4

    lo, hi = map(float, bracket)
    at_lo, at_hi = predicate(lo), predicate(hi)
    if at_lo and at_hi:
        raise BracketError("bracket: predicate true at both ends", bracket=[lo, hi])
    if not at_hi:
        raise BracketError("bracket has no sign change", bracket=[lo, hi])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    a_hat = 0.5 * (lo + hi)
    if a_star is not None and a_hat > a_star + tol:
        raise OrderingError("a-hat exceeds a*", a_hat=a_hat, a_star=float(a_star), tol=tol)
    logger.info("a-hat %.10f on bracket %s", a_hat, list(bracket))
    return a_hat


def _observe(params, a, observables, settings, tol):
    row = {"a": float(a), "error": None}
    try:
        fmap = HenonLikeMap(params.with_a(a), check_eta=False)
        for name in observables:
            if name == "gap":
                row["gap"] = gap(params, a, settings, tol)
            elif name == "crossings":
                P, Q = find_fixed_points(fmap)
                wu = grow_unstable(fmap, Q, settings.unstable_arclength, R_HAT, tol)
                ws = grow_stable(fmap, P, generations=settings.stable_generations_p, tol=tol)
                row["crossings"] = crossings(wu, ws).count
            elif name == "min_splitting_angle":
                row["min_splitting_angle"] = hyperbolicity.splitting_diagnostics(fmap, samples=200).min_angle
            elif name == "lyapunov_min":
                orbits = hyperbolicity.periodic_orbits(fmap, max_period=6)
                row["lyapunov_min"] = min((rep.lambda_u for _, rep in orbits), default=None)
    except AnalysisError as exc:
        row["error"] = exc.message
        logger.info("scan row a=%s failed: %s", a, exc.message)
    for name in observables:
        row.setdefault(name, None)
    return row


def scan(params, a_values, observables=("gap",), settings=None, tol=None):
    """Rows of the requested observables per a, in input order; failures fill the error column."""
    settings = settings or TangencySettings()
    unknown = set(observables) - set(OBSERVABLES)
    if unknown:
        raise ValueError(f"Unknown observables {sorted(unknown)}; known: {list(OBSERVABLES)}")
    return parallel_map(lambda a: _observe(params, a, observables, settings, tol), list(a_values))
