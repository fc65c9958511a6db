"""
Map evaluation checks: forward and inverse maps, Jacobians, perturbations and vector pushes.

USAGE: python map_core_test.py   (or: pytest map_core_test.py)
"""
import math

import numpy as np
import pytest

from errors import InverseError
from map_core import HenonLikeMap, LinearMap, build_perturbation, det_bound_check, measure_eta
from models import MapParams


def make_map(a=2.0, b=0.3, **kwargs):
    return HenonLikeMap(MapParams(a=a, b=b, **kwargs))


def test_forward_values():
    print("[+] Testing forward evaluation...")
    fmap = make_map()
    assert np.allclose(fmap.apply([0.0, 0.0]), [1.0, 0.0])
    assert np.allclose(fmap.apply([1.0, 1.0]), [0.0, 0.3])
    batch = fmap.apply(np.array([[0.0, 0.0], [1.0, 1.0], [-0.5, 0.2]]))
    assert batch.shape == (3, 2)
    assert np.allclose(batch[2], [1.0 - 2.0 * 0.25 + 0.2, -0.15])
    print("[+] Forward evaluation tests completed.")


def test_inverse():
    print("[+] Testing inverse evaluation...")
    fmap = make_map()
    pts = np.array([[0.3, -0.1], [-1.2, 0.4], [0.9, 0.05]])
    assert np.allclose(fmap.apply_inverse(fmap.apply(pts)), pts, atol=1e-13)
    with pytest.raises(InverseError) as exc:
        make_map(b=0.0).apply_inverse([0.1, 0.0])
    assert exc.value.message == "inverse undefined for b=0"
    print("[+] Inverse tests completed.")


def test_bump_inverse_uses_newton():
    print("[+] Testing Newton inverse for the bump perturbation...")
    fmap = make_map(b=0.1, eta_bound=0.1, perturbation="bump", perturbation_params={"epsilon": 0.01})
    pts = np.array([[0.2, 0.01], [-0.7, -0.05]])
    assert np.allclose(fmap.apply_inverse(fmap.apply(pts)), pts, atol=1e-10)
    print("[+] Newton inverse tests completed.")


def test_jacobian_and_second_derivatives():
    print("[+] Testing derivatives...")
    fmap = make_map()
    J = fmap.jacobian([0.4, 0.2])
    assert np.allclose(J, [[-1.6, 1.0], [0.3, 0.0]])
    assert math.isclose(np.linalg.det(J), -0.3)
    H = fmap.second_derivatives(np.zeros((4, 2)))
    assert H.shape == (4, 2, 2, 2)
    assert np.all(H[:, 0, 0, 0] == -4.0)
    assert np.count_nonzero(H) == 4
    print("[+] Derivative tests completed.")


def test_perturbation_registry_and_eta():
    print("[+] Testing perturbations and measured eta...")
    with pytest.raises(ValueError):
        build_perturbation("wiggle")
    fmap = make_map(b=0.1, eta_bound=0.1, perturbation="bump", perturbation_params={"epsilon": 0.01})
    eta = measure_eta(fmap)
    assert 0.08 < eta <= 0.09 + 1e-12
    sup_det, bound = det_bound_check(make_map(b=0.3))
    assert math.isclose(sup_det, 0.3) and math.isclose(bound, 0.3)
    print("[+] Perturbation tests completed.")


def test_iterate_and_escape():
    print("[+] Testing orbit iteration...")
    fmap = make_map()
    orbit = fmap.iterate([0.0, 0.0], 3)
    assert len(orbit) == 4 and not orbit.escaped
    assert np.allclose(orbit.points[1], [1.0, 0.0])
    assert fmap.iterate([10.0, 0.0], 10).escaped
    back = fmap.iterate(orbit.points[-1], -3)
    assert np.allclose(back.points[-1], [0.0, 0.0], atol=1e-12)
    print("[+] Orbit iteration tests completed.")


def test_push_vector_linear():
    print("[+] Testing tangent vector pushes...")
    lmap = LinearMap(np.diag([3.0, 0.1]))
    z, v, log_gain = lmap.push_vector(np.zeros(2), np.array([1.0, 0.0]), 4)
    assert np.allclose(v, [1.0, 0.0])
    assert math.isclose(log_gain, 4 * math.log(3.0))
    _, v, log_gain = lmap.push_vector(np.zeros(2), np.array([0.0, 2.0]), 3)
    assert math.isclose(log_gain, math.log(2.0) + 3 * math.log(0.1))
    print("[+] Tangent vector push tests completed.")


def test_derivatives_match_finite_differences():
    print("[+] Testing analytic derivatives against central differences...")
    fmap = make_map(b=0.3, eta_bound=0.5, perturbation="bump", perturbation_params={"epsilon": 0.05})
    rng = np.random.default_rng(11)
    pts = rng.uniform(-2.0, 2.0, size=(200, 2))
    h = 1e-6
    J = fmap.jacobian(pts)
    H = fmap.second_derivatives(pts)
    grad = fmap.phi.gradient(pts[:, 0], pts[:, 1], fmap.a)
    for j, e in enumerate(np.eye(2)):
        fd = (fmap.apply(pts + h * e) - fmap.apply(pts - h * e)) / (2 * h)
        assert np.allclose(J[:, :, j], fd, atol=1e-7)
        fd_jac = (fmap.jacobian(pts + h * e) - fmap.jacobian(pts - h * e)) / (2 * h)
        assert np.allclose(H[:, :, :, j], fd_jac, atol=1e-7)
        lo = np.stack(fmap.phi.value(*(pts - h * e).T, fmap.a), axis=-1)
        hi = np.stack(fmap.phi.value(*(pts + h * e).T, fmap.a), axis=-1)
        assert np.allclose(grad[:, :, j], (hi - lo) / (2 * h), atol=1e-8)
    # the bump does not depend on a
    assert np.all(grad[:, :, 2] == 0.0)
    print("[+] Finite difference tests completed.")


def test_bump_inverse_on_grid():
    print("[+] Testing the Newton inverse on a grid...")
    fmap = make_map(b=0.3, eta_bound=0.1, perturbation="bump", perturbation_params={"epsilon": 0.01})
    xs, ys = np.meshgrid(np.linspace(-1.0, 1.0, 21), np.linspace(-0.3, 0.3, 21))
    grid = np.column_stack((xs.ravel(), ys.ravel()))
    assert np.allclose(fmap.apply_inverse(fmap.apply(grid)), grid, atol=1e-9)
    assert np.allclose(fmap.apply(fmap.apply_inverse(grid)), grid, atol=1e-9)
    print("[+] Grid inverse tests completed.")


def main():
    test_forward_values()
    print()
    test_inverse()
    print()
    test_bump_inverse_uses_newton()
    print()
    test_jacobian_and_second_derivatives()
    print()
    test_perturbation_registry_and_eta()
    print()
    test_iterate_and_escape()
    print()
    test_push_vector_linear()
    print()
    test_derivatives_match_finite_differences()
    print()
    test_bump_inverse_on_grid()

if __name__ == "__main__":
    main()
