"""Command runners shared by the CLI and the report service.

Every runner takes a validated RunConfig and returns ``(result, passed, artifacts)``
where artifacts maps file names to CSV text.
"""
import io
import logging
import math

import numpy as np

import bifurcation
from curves_critical import ParametrizedCurve, critical_points, extrapolate_critical_point, lambda_constant
from errors import AnalysisError
from extensions import VERSION
from fixed_points import find_fixed_points
from hypcoord import integrate_stable_leaf, leaf_convergence
import hyperbolicity
from manifolds import R_HAT, grow_stable, grow_unstable, write_curve_csv
from map_core import HenonLikeMap
from models import RefinementConfig, to_jsonable
import onedim
from regions import RegionContext, locate_stable_leaf_point, verify_escape

logger = logging.getLogger(__name__)


def _map(cfg):
    return HenonLikeMap(cfg.family, blowup=cfg.constants.blowup)


def _refinement(cfg):
    return RefinementConfig(max_spacing=cfg.constants.max_spacing, max_turn=cfg.constants.max_turn)


def _curve_csv(curve):
    buf = io.StringIO()
    write_curve_csv(curve, buf)
    return buf.getvalue()


def _table_csv(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join("" if row.get(h) is None else
                           (format(row[h], ".17g") if isinstance(row[h], float) else str(row[h]))
                           for h in header) + "\n")
    return buf.getvalue()


def run_fixed_points(cfg):
    P, Q = find_fixed_points(_map(cfg))
    return {"P": P.to_dict(), "Q": Q.to_dict()}, P.is_saddle and Q.is_saddle, {}


def run_manifold(cfg):
    opts = cfg.options
    fmap = _map(cfg)
    P, Q = find_fixed_points(fmap)
    fp = P if opts["point"] == "p" else Q
    if opts["kind"] == "unstable":
        curve = grow_unstable(fmap, fp, opts["arclength"], R_HAT, _refinement(cfg))
    else:
        curve = grow_stable(fmap, fp, window=R_HAT, tol=_refinement(cfg), generations=opts["generations"])
    result = {"tag": curve.tag, "vertices": len(curve), "pieces": len(curve.pieces()),
              "length": curve.length, "meta": curve.meta}
    return result, True, {f"manifold_{opts['kind']}_{opts['point']}.csv": _curve_csv(curve)}


def run_astar(cfg):
    opts = cfg.options
    report = bifurcation.find_a_star(cfg.family, bracket=(opts["bracket_lo"], opts["bracket_hi"]),
                                     tol=opts["tol"], scan_points=opts["scan_points"],
                                     refinement=_refinement(cfg))
    return report, True, {"gap.csv": _table_csv(("a", "gap"), report.gap_samples)}


def run_escape_check(cfg):
    opts = cfg.options
    report = verify_escape(_map(cfg), opts["region"], grid=opts["grid"], max_steps=opts["max_steps"])
    return report, report.passed, {}


def run_certify_cones(cfg):
    opts, const = cfg.options, cfg.constants
    cert = hyperbolicity.certify_outside(_map(cfg), epsilon=const.epsilon, alpha=const.alpha,
                                         lambda_hat=const.lambda_hat, samples=opts["samples"],
                                         segments=opts["segments"], max_len=opts["max_len"],
                                         C_eps_target=opts["c_eps_target"], seed=cfg.seed)
    rows = [{"x": float(s.start[0]), "y": float(s.start[1]), "length": s.length,
             "log_expansion": s.log_expansion, "returns_to_delta": int(s.returns_to_delta)}
            for s in cert.segment_stats]
    return cert, cert.passed, {"segments.csv": _table_csv(("x", "y", "length", "log_expansion",
                                                           "returns_to_delta"), rows)}


def run_critical_points(cfg):
    opts = cfg.options
    fmap = _map(cfg)
    curve = ParametrizedCurve.horizontal(opts["curve_x0"], opts["curve_y0"], opts["half_length"])
    points = critical_points(fmap, curve, range(opts["k_min"], opts["k_max"] + 1))
    result = {"critical_points": points, "limit": None, "error_bound": None, "extrapolation_error": None}
    try:
        limit, bound = extrapolate_critical_point(points)
        result.update(limit=limit, error_bound=bound)
    except AnalysisError as exc:
        result["extrapolation_error"] = exc.message
    threshold = fmap.a / abs(fmap.b) if fmap.b else math.inf
    passed = all(c.image_curvature > threshold for c in points) if fmap.b else True
    rows = [{"k": c.order, "t": c.t, "x": float(c.c_k[0]), "y": float(c.c_k[1]),
             "x0": float(c.c0_k[0]), "y0": float(c.c0_k[1]), "image_curvature": c.image_curvature}
            for c in points]
    return result, passed, {"critical_points.csv": _table_csv(("k", "t", "x", "y", "x0", "y0",
                                                               "image_curvature"), rows)}


def run_foliation(cfg):
    opts = cfg.options
    fmap = _map(cfg)
    if opts["seed_x"] is None:
        # a point of f^{-1}(W^s(q)) lies in every V_k, so it is a valid seed for any order
        seed = locate_stable_leaf_point(RegionContext(fmap), opts["seed_y"], 0.7, 0.9)
    else:
        seed = (opts["seed_x"], opts["seed_y"])
    convergence = leaf_convergence(fmap, seed, opts["k_max"], arclength=opts["arclength"])
    leaf = integrate_stable_leaf(fmap, seed, opts["k_max"], arclength=opts["arclength"])
    passed = convergence["ratio"] is None or convergence["ratio"] < 1.0
    return convergence, passed, {f"leaf_k{opts['k_max']}.csv": _curve_csv(leaf.curve)}


def run_lyapunov(cfg):
    opts = cfg.options
    fmap = _map(cfg)
    if opts["x"] is None:
        P, Q = find_fixed_points(fmap)
        reports = [hyperbolicity.periodic_exponents(fmap, P.location, "P"),
                   hyperbolicity.periodic_exponents(fmap, Q.location, "Q")]
    else:
        reports = [hyperbolicity.lyapunov_orbit(fmap, (opts["x"], opts["y"]), opts["n"],
                                                transient=opts["transient"], label="orbit")]
    passed = True
    if fmap.phi.is_zero and fmap.b != 0:
        passed = all(abs(r.lambda_u + r.lambda_s - math.log(abs(fmap.b))) <= 1e-9 for r in reports)
    return {"reports": reports}, passed, {}


def run_periodic_orbits(cfg):
    fmap = _map(cfg)
    lam = lambda_constant(cfg.constants.lambda_hat)
    found = hyperbolicity.periodic_orbits(fmap, max_period=cfg.options["max_period"])
    rows = [{"period": rep.period, "x": float(orbit[0, 0]), "y": float(orbit[0, 1]),
             "lambda_u": rep.lambda_u, "lambda_s": rep.lambda_s} for orbit, rep in found]
    result = {"lambda": lam, "orbits": [rep for _, rep in found]}
    passed = all(rep.lambda_u >= lam for _, rep in found)
    return result, passed, {"periodic_orbits.csv": _table_csv(("period", "x", "y", "lambda_u", "lambda_s"), rows)}


def run_splitting(cfg):
    opts = cfg.options
    fmap = _map(cfg)
    omega = hyperbolicity.omega_approximation(fmap, n_steps=opts["n_steps"])
    field = hyperbolicity.splitting_diagnostics(fmap, omega, k_split=opts["k_split"],
                                                samples=opts["samples"], seed=cfg.seed)
    rows = [{"x": float(z[0]), "y": float(z[1]), "angle": float(t)} for z, t in zip(field.points, field.angles)]
    passed = len(field.angles) > 0 and field.min_angle > 0.0 and field.invariance_defect <= 1e-4
    return {"omega": omega, "splitting": field}, passed, {"splitting.csv": _table_csv(("x", "y", "angle"), rows)}


def run_scan(cfg):
    opts = cfg.options
    observables = [n.strip() for n in (opts["observables"] or "gap").split(",") if n.strip()]
    a_values = np.linspace(opts["a_min"], opts["a_max"], opts["points"])
    rows = bifurcation.scan(cfg.family, a_values, observables, tol=_refinement(cfg))
    passed = all(row["error"] is None for row in rows)
    return {"rows": rows}, passed, {"scan.csv": _table_csv(["a"] + observables + ["error"], rows)}


def run_onedim(cfg):
    opts, const = cfg.options, cfg.constants
    bump = onedim.OneDBump(opts["bump_scale"]) if opts["bump_scale"] else None
    g = onedim.OneDMap(cfg.family.a, bump)
    lam = lambda_constant(const.lambda_hat)
    result = {"a": g.a, "eta": g.eta, "lambda": lam, "a_star": None, "a_star_error": None}
    try:
        result["a_star"] = onedim.od_a_star(bump, (opts["bracket_lo"], opts["bracket_hi"]), opts["tol"])
    except AnalysisError as exc:
        result["a_star_error"] = exc.message
    result["fixed_points"] = list(onedim.od_fixed_points(g))
    orbits = onedim.od_periodic_orbits(g, max_period=opts["max_period"])
    for orbit in orbits:
        orbit["ok"] = abs(orbit["multiplier"]) >= math.exp(lam * orbit["period"])
    result["periodic_orbits"] = orbits
    result["expansion"] = onedim.od_expansion_check(g, const.epsilon, const.lambda_hat)
    rows = [{"period": o["period"], "x": o["points"][0], "multiplier": o["multiplier"]} for o in orbits]
    return result, all(o["ok"] for o in orbits), {"onedim_orbits.csv": _table_csv(("period", "x", "multiplier"), rows)}


COMMANDS = {
    "fixed-points": run_fixed_points,
    "manifold": run_manifold,
    "astar": run_astar,
    "escape-check": run_escape_check,
    "certify-cones": run_certify_cones,
    "critical-points": run_critical_points,
    "foliation": run_foliation,
    "lyapunov": run_lyapunov,
    "periodic-orbits": run_periodic_orbits,
    "splitting": run_splitting,
    "scan": run_scan,
    "onedim": run_onedim,
}


def run_command(cfg):
    """Run the configured command; the report embeds the resolved config and version."""
    logger.info("running %s with seed %s", cfg.command, cfg.seed)
    result, passed, artifacts = COMMANDS[cfg.command](cfg)
    report = {
        "command": cfg.command,
        "version": VERSION,
        "config": to_jsonable(cfg.to_dict()),
        "result": to_jsonable(result),
        "passed": bool(passed),
        "artifacts": sorted(artifacts),
    }
    return report, bool(passed), artifacts
