"""
Hyperbolicity diagnostics: cones, N_a, C_a, splitting, Lyapunov exponents and periodic orbits.

USAGE: python hyperbolicity_test.py
"""
import math

import numpy as np
import pytest

from bifurcation import find_a_star
from errors import OrbitEscapedError, PreconditionError
from fixed_points import find_fixed_points
from hyperbolicity import (assemble_Ca, backward_contraction_check, backward_push, certify_outside,
                           cone_violations, lyapunov_orbit, omega_approximation, periodic_exponents,
                           periodic_orbits, recovery_and_Na, sample_outside_delta, solve_na,
                           splitting_diagnostics)
from map_core import HenonLikeMap, LinearMap
from models import CriticalPoint, MapParams, OmegaSample, RefinementConfig


def make_map(a=2.0, b=0.05):
    return HenonLikeMap(MapParams(a=a, b=b))


def test_lyapunov_at_fixed_point():
    print("[+] Testing Lyapunov exponents at q...")
    fmap = make_map()
    _, Q = find_fixed_points(fmap)
    expected = sorted(np.log(np.abs(np.linalg.eigvals(fmap.jacobian(Q.location)))), reverse=True)
    report = lyapunov_orbit(fmap, Q.location, 5, transient=5, label="q")
    assert math.isclose(report.lambda_u, expected[0], rel_tol=1e-8)
    assert math.isclose(report.lambda_s, expected[1], rel_tol=1e-8)
    assert math.isclose(report.lambda_u, 1.37276, abs_tol=1e-4)
    assert math.isclose(report.lambda_u + report.lambda_s, math.log(0.05), abs_tol=1e-9)
    assert report.residual < 1e-9 and not report.escaped
    cycle = periodic_exponents(fmap, [Q.location])
    assert cycle.period == 1
    assert math.isclose(cycle.lambda_u, expected[0], rel_tol=1e-12)
    print("[+] Lyapunov tests completed.")


def test_lyapunov_escape():
    print("[+] Testing Lyapunov exponents on escaping orbits...")
    fmap = make_map()
    with pytest.raises(PreconditionError):
        lyapunov_orbit(fmap, [0.0, 0.0], 0)
    truncated = lyapunov_orbit(fmap, [10.0, 0.0], 50)
    assert truncated.escaped and truncated.n == 2
    with pytest.raises(OrbitEscapedError):
        lyapunov_orbit(fmap, [10.0, 0.0], 50, truncate=False)
    print("[+] Escape tests completed.")


def test_solve_na():
    print("[+] Testing N_a...")
    assert solve_na(0.01, 0.146946) == 6
    assert solve_na(0.01, 0.146946, crit_gap_fn=lambda n: 1.0 if n < 8 else 0.0) == 8
    with pytest.raises(PreconditionError) as exc:
        solve_na(0.0, 0.1)
    assert exc.value.message == "no valid N"
    with pytest.raises(PreconditionError):
        solve_na(1e-30, 0.1, cap=5)
    print("[+] N_a tests completed.")


def test_cone_violations():
    print("[+] Testing the slope cone...")
    fmap = make_map()
    assert cone_violations(fmap, np.array([[1.0, 0.0], [-0.5, 0.01]]), 0.5) == []
    bad = cone_violations(fmap, np.array([[0.01, 0.0]]), 0.5)
    assert bad == [{"x": 0.01, "y": 0.0}]
    print("[+] Cone tests completed.")


def test_certify_outside_small():
    print("[+] Testing the cone certificate at a=2.1, b=0.01...")
    cert = certify_outside(make_map(a=2.1, b=0.01), samples=500, segments=20, max_len=20)
    assert 0 < cert.samples <= 500
    assert len(cert.segment_stats) <= 20
    assert cert.slope_violations == []
    assert 0 < cert.measured_C_eps <= 1
    assert not cert.below_a_star
    summary = cert.to_dict()
    assert summary["segments"] == len(cert.segment_stats)
    fmap = make_map(a=2.1, b=0.01)
    pts = sample_outside_delta(fmap, 0.15, 400, np.random.default_rng(0))
    assert len(pts) == 400
    assert (np.abs(pts[:, 1]) < 0.04).all() and (np.abs(pts[:, 0]) >= 0.15).all()
    assert cone_violations(fmap, pts, 0.5) == []
    assert cone_violations(fmap, np.array([[-0.116, -0.08]]), 0.5) != []
    print("[+] Cone certificate tests completed.")


def test_constant_without_returns():
    print("[+] Testing C_a with N_a = 0...")
    consts = assemble_Ca(make_map(), 0, 0.1, 0.3)
    assert consts.C_a == 0.3
    assert consts.C_N_plus == consts.C_N_minus == 1.0
    assert assemble_Ca(make_map(), 0, 0.1, 2.0).C_a == 1.0
    print("[+] C_a tests completed.")


def test_recovery_with_geometric_critical_points():
    print("[+] Testing N_a and recovery times from a synthetic critical sequence...")
    fmap = make_map()
    critical = [CriticalPoint(order=k, t=0.0, c_k=np.array([0.01 * 0.5 ** k, 0.0]),
                              c0_k=np.array([0.01 * 0.5 ** k, 0.0]), residual=0.0, image_curvature=1.0)
                for k in range(2, 7)]
    far = OmegaSample(np.array([[0.5, 0.0], [-0.8, 0.1]]), np.array([[1.0, 0.0], [1.0, 0.0]]), "orbit")
    result = recovery_and_Na(fmap, 0.146946, critical, far)
    assert np.allclose(result["critical_limit"], [0.0, 0.0], atol=1e-15)
    assert math.isclose(result["critical_error"], 2 * 0.01 * 0.5 ** 6)
    assert math.isclose(result["d_c_omega"], 0.5)
    assert result["N_a"] == 2
    assert result["returns"] == [] and result["passed"]
    near = OmegaSample(np.array([[0.5, 0.0], [0.1, 0.0]]), np.array([[1.0, 0.0], [1.0, 0.0]]), "orbit")
    result = recovery_and_Na(fmap, 0.146946, critical, near)
    assert result["N_a"] == 4
    assert len(result["returns"]) == 1
    assert result["returns"][0]["x"] == 0.1 and result["returns"][0]["n"] <= 4
    print("[+] Recovery tests completed.")


def test_splitting_at_saddle():
    print("[+] Testing E^u / E^s splitting at p...")
    fmap = make_map()
    P, _ = find_fixed_points(fmap)
    pts = np.repeat(P.location[None, :], 3, axis=0)
    tangents = np.repeat(P.eigenvectors[0][None, :], 3, axis=0)
    omega = OmegaSample(pts, tangents, "orbit")
    field = splitting_diagnostics(fmap, omega, k_split=4)
    u, s = P.eigenvectors[0], P.eigenvectors[1]
    expected = math.acos(abs(u @ s) / (np.linalg.norm(u) * np.linalg.norm(s)))
    assert math.isclose(field.min_angle, expected, abs_tol=1e-6)
    assert field.modulus[1e-2] == 0.0
    assert np.allclose(field.forward_logs, 4 * math.log(abs(P.eigenvalues[0])), atol=1e-8)
    check = backward_contraction_check(fmap, omega, 1.0, 0.1, n=5)
    assert check["passed"]
    print("[+] Splitting tests completed.")


def test_backward_push_linear():
    print("[+] Testing backward pushes on a linear map...")
    lmap = LinearMap(np.diag([3.0, 0.1]))
    z, v, log_gain = backward_push(lmap, np.array([0.3, 0.2]), np.array([1.0, 0.0]), 2)
    assert np.allclose(z, [0.3 / 9, 20.0])
    assert np.allclose(v, [1.0, 0.0])
    assert math.isclose(log_gain, -2 * math.log(3.0))
    print("[+] Backward push tests completed.")


def test_periodic_orbits_small_period():
    print("[+] Testing periodic orbits up to period 2...")
    fmap = make_map()
    found = periodic_orbits(fmap, max_period=2)
    fixed = [orbit for orbit, rep in found if rep.period == 1]
    assert len(fixed) == 2
    P, Q = find_fixed_points(fmap)
    locs = sorted(tuple(orbit[0]) for orbit in fixed)
    assert np.allclose(locs, sorted([tuple(Q.location), tuple(P.location)]), atol=1e-10)
    for _, rep in found:
        assert rep.lambda_u > 0 > rep.lambda_s
        assert rep.residual < 1e-9
    with pytest.raises(PreconditionError):
        periodic_orbits(fmap, max_period=15)
    print("[+] Periodic orbit tests completed.")


def test_hyperbolic_regime_above_a_star():
    print("[+] Testing exponents, cones and splitting at a = a*(0.05) + 0.05...")
    coarse = RefinementConfig(max_spacing=1e-2, max_turn=0.05)
    report = find_a_star(MapParams(a=2.0, b=0.05), bracket=(1.7, 2.3), tol=1e-2, scan_points=7,
                         refinement=coarse)
    fmap = make_map(a=report.a_star + 0.05)
    found = periodic_orbits(fmap, max_period=10)
    assert len(found) > 2
    for _, rep in found:
        assert rep.lambda_u >= 0.14
        assert abs(rep.lambda_u + rep.lambda_s - math.log(0.05)) <= 1e-9
    cert = certify_outside(fmap, samples=10_000, segments=100, lambda_hat=0.3, a_star=report.a_star)
    assert cert.slope_violations == []
    assert not cert.below_a_star
    assert all(s.ue2_passed for s in cert.segment_stats if s.returns_to_delta)
    assert cert.measured_C_eps > 0
    field = splitting_diagnostics(fmap, omega_approximation(fmap, n_steps=20_000), k_split=8)
    assert len(field.angles) > 0
    assert field.min_angle >= 0.05
    assert field.invariance_defect <= 0.1
    print("[+] Hyperbolic regime tests completed.")


def main():
    test_lyapunov_at_fixed_point()
    print()
    test_lyapunov_escape()
    print()
    test_solve_na()
    print()
    test_cone_violations()
    print()
    test_certify_outside_small()
    print()
    test_constant_without_returns()
    print()
    test_recovery_with_geometric_critical_points()
    print()
    test_splitting_at_saddle()
    print()
    test_backward_push_linear()
    print()
    test_periodic_orbits_small_period()
    print()
    test_hyperbolic_regime_above_a_star()

if __name__ == "__main__":
    main()
