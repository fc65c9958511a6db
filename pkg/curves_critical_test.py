"""
Curvature pushforward, admissibility, hyperbolic times and critical points.

USAGE: python curves_critical_test.py
"""
import math

import numpy as np
import pytest

from curves_critical import (ParametrizedCurve, binding_expansion_check, certify_admissible, critical_points,
                             curvature_at, extrapolate_critical_point, find_critical_point,
                             hyperbolic_time_curvature_check, image_curve, k0_constant, lambda_constant)
from errors import PreconditionError
from map_core import HenonLikeMap
from models import MapParams


def test_constants():
    print("[+] Testing k0 and lambda...")
    assert k0_constant() == 18
    assert math.isclose(lambda_constant(), 0.5 * math.log(3 / math.sqrt(5)))
    assert math.isclose(lambda_constant(), 0.146946, abs_tol=1e-6)
    assert lambda_constant(0.1) == 0.1
    print("[+] Constant tests completed.")


def test_curvature_of_image():
    print("[+] Testing the exact curvature of f(horizontal) at a=2, b=0.3...")
    fmap = HenonLikeMap(MapParams(a=2.0, b=0.3))
    line = ParametrizedCurve.horizontal(0.0, 0.0, 0.5)
    img = image_curve(fmap, line, samples=201)
    xs = np.linspace(-0.5, 0.5, 201)
    expected = 1.2 / (16 * xs ** 2 + 0.09) ** 1.5
    assert np.allclose(np.abs(img.curvatures), expected, rtol=1e-10)
    assert math.isclose(abs(img.curvatures[100]), 44.444444444, rel_tol=1e-8)
    assert img.tag == "f(horizontal)"
    circle = ParametrizedCurve.circle((0.0, 0.0), 2.0)
    assert math.isclose(curvature_at(circle, 1.0), 0.5)
    print("[+] Image curvature tests completed.")


def test_admissibility():
    print("[+] Testing admissible curves...")
    flat = certify_admissible(ParametrizedCurve.horizontal(0.0, 0.1, 0.5))
    assert flat.admissible and flat.is_long
    short = certify_admissible(ParametrizedCurve.horizontal(0.0, 0.1, 0.1))
    assert not short.is_long
    steep = certify_admissible(ParametrizedCurve.segment((0.0, 0.0), (1.0, 1.0), (-0.2, 0.2)))
    assert math.isclose(steep.max_slope, 1.0) and not steep.admissible
    assert not certify_admissible(ParametrizedCurve.circle((0.0, 0.0), 2.0)).admissible
    print("[+] Admissibility tests completed.")


def test_hyperbolic_time_curvature():
    print("[+] Testing curvature decrease at hyperbolic times...")
    fmap = HenonLikeMap(MapParams(a=2.2, b=0.05))
    line = ParametrizedCurve.horizontal(0.8, 0.0, 0.1)
    report = hyperbolic_time_curvature_check(fmap, line, 2)
    assert report["hyperbolic_times"] > 0
    assert report["passed"], report["failures"][:3]
    assert report["max_kappa_n"] < 0.5
    assert not hyperbolic_time_curvature_check(fmap, line, 0)["passed"]
    with pytest.raises(PreconditionError):
        hyperbolic_time_curvature_check(fmap, ParametrizedCurve.circle((0.0, 0.0), 1.0), 2)
    print("[+] Hyperbolic time tests completed.")


def test_critical_point_near_fold():
    print("[+] Testing critical points at b=1e-6...")
    fmap = HenonLikeMap(MapParams(a=2.0, b=1e-6))
    line = ParametrizedCurve.horizontal(0.0, 0.0, 0.5)
    crit = find_critical_point(fmap, line, 3)
    assert crit.order == 3
    assert abs(crit.c_k[0]) < 1e-6
    assert np.allclose(crit.c0_k, fmap.apply(crit.c_k))
    assert crit.residual < 1e-8
    both = critical_points(fmap, line, [3, 4])
    assert [c.order for c in both] == [3, 4]
    assert np.linalg.norm(both[0].c_k - both[1].c_k) < 1e-6
    report = binding_expansion_check(fmap, line, crit.t, k=3, critical=crit)
    assert report["degenerate"] and report["passed"]
    print("[+] Critical point tests completed.")


def test_extrapolation():
    print("[+] Testing geometric extrapolation...")
    c = np.array([0.3, -0.2])
    d = np.array([1.0, 2.0])
    seq = [c + 0.1 ** k * d for k in range(2, 7)]
    limit, bound = extrapolate_critical_point(seq)
    assert np.allclose(limit, c, atol=1e-12)
    assert bound > 0
    with pytest.raises(PreconditionError):
        extrapolate_critical_point(seq[:2])
    with pytest.raises(PreconditionError) as exc:
        extrapolate_critical_point([c, c + d, c + 1.5 * d, c + 3 * d])
    assert exc.value.message == "non-geometric decay"
    print("[+] Extrapolation tests completed.")


def test_critical_point_cauchy_rate():
    print("[+] Testing the decay of critical point gaps at a=2.05, b=0.1...")
    fmap = HenonLikeMap(MapParams(a=2.05, b=0.1))
    line = ParametrizedCurve.horizontal(0.0, 0.0, 0.5)
    points = critical_points(fmap, line, [2, 3, 4])
    gaps = [np.linalg.norm(q.c0_k - p.c0_k) for p, q in zip(points[:-1], points[1:])]
    assert gaps[0] > 0 and gaps[1] > 0
    # the critical orbit leaves R here, so the decay is at least as fast as b^k
    assert gaps[1] / gaps[0] <= 2 * fmap.b
    print("[+] Critical point gap tests completed.")


def main():
    test_constants()
    print()
    test_curvature_of_image()
    print()
    test_admissibility()
    print()
    test_hyperbolic_time_curvature()
    print()
    test_critical_point_near_fold()
    print()
    test_extrapolation()
    print()
    test_critical_point_cauchy_rate()

if __name__ == "__main__":
    main()
