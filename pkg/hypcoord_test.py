"""
Hyperbolic frames and stable leaves of finite order.

USAGE: python hypcoord_test.py
"""
import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from errors import DegenerateFrameError, OrbitEscapedError, PreconditionError
from hypcoord import angle_between, frame, frames, integrate_stable_leaf, leaf_convergence
from map_core import HenonLikeMap, LinearMap
from models import MapParams
from regions import RegionContext, in_foliation_domain, locate_stable_leaf_point, stable_leaf, v_orders


def direct_product(fmap, z, k):
    M = np.eye(2)
    z = np.asarray(z, dtype=float)
    for _ in range(k):
        M = fmap.jacobian(z) @ M
        z = fmap.apply(z)
    return M


def test_linear_frame():
    print("[+] Testing frames of a diagonal linear map...")
    lmap = LinearMap(np.diag([3.0, 0.1]))
    for k in (1, 4, 10):
        fr = frame(lmap, np.zeros(2), k)
        assert np.allclose(fr.e_k, [0.0, 1.0])
        assert np.allclose(fr.f_k, [1.0, 0.0])
        assert math.isclose(fr.log_e, k * math.log(0.1), rel_tol=1e-12)
        assert math.isclose(fr.log_f, k * math.log(3.0), rel_tol=1e-12)
        assert fr.log_h <= 0
    print("[+] Linear frame tests completed.")


def test_frame_matches_brute_force():
    print("[+] Testing the order-3 frame at a=2, b=0.3 against a direction sweep...")
    fmap = HenonLikeMap(MapParams(a=2.0, b=0.3))
    z = np.array([0.1, 0.05])
    fr = frame(fmap, z, 3)
    M = direct_product(fmap, z, 3)
    theta = np.linspace(0.0, math.pi, 20001)
    dirs = np.column_stack((np.cos(theta), np.sin(theta)))
    norms = np.linalg.norm(dirs @ M.T, axis=1)
    assert angle_between(fr.e_k, dirs[norms.argmin()]) < 1e-3
    assert angle_between(fr.f_k, dirs[norms.argmax()]) < 1e-3
    sigma = np.linalg.svd(M, compute_uv=False)
    assert math.isclose(math.exp(fr.log_e), sigma[1], rel_tol=1e-8)
    assert math.isclose(math.exp(fr.log_f), sigma[0], rel_tol=1e-8)
    assert abs(fr.e_k @ fr.f_k) < 1e-12
    assert fr.e_k[1] >= 0 and fr.f_k[1] >= 0
    print("[+] Brute force frame tests completed.")


def test_batch_frames_agree():
    print("[+] Testing vectorised frames...")
    fmap = HenonLikeMap(MapParams(a=2.0, b=0.3))
    pts = np.array([[0.1, 0.05], [-0.4, 0.2], [0.7, -0.1]])
    e, f, log_e, log_f = frames(fmap, pts, 3)
    for i, z in enumerate(pts):
        fr = frame(fmap, z, 3)
        assert np.allclose(e[i], fr.e_k, atol=1e-10)
        assert np.allclose(f[i], fr.f_k, atol=1e-10)
        assert math.isclose(log_e[i], fr.log_e, rel_tol=1e-10)
        assert math.isclose(log_f[i], fr.log_f, rel_tol=1e-10)
    e, _, _, _ = frames(fmap, np.array([[10.0, 0.0]]), 5)
    assert np.isnan(e).all()
    print("[+] Vectorised frame tests completed.")


def test_frame_errors():
    print("[+] Testing frame failures...")
    with pytest.raises(ValueError):
        frame(LinearMap(np.diag([3.0, 0.1])), np.zeros(2), 0)
    with pytest.raises(DegenerateFrameError) as exc:
        frame(LinearMap(2.0 * np.eye(2)), np.zeros(2), 3)
    assert exc.value.message == "degenerate"
    with pytest.raises(OrbitEscapedError):
        frame(HenonLikeMap(MapParams(a=2.0, b=0.3)), np.array([10.0, 0.0]), 5)
    print("[+] Frame failure tests completed.")


def test_linear_leaf_is_vertical():
    print("[+] Testing the stable leaf of a linear map...")
    lmap = LinearMap(np.diag([3.0, 0.1]))
    leaf = integrate_stable_leaf(lmap, [0.5, 0.0], 2, arclength=0.2, step=1e-2)
    verts = leaf.curve.vertices
    assert leaf.order == 2
    assert leaf.curve.tag == "leaf_k=2"
    assert np.allclose(verts[:, 0], 0.5)
    assert math.isclose(verts[:, 1].min(), -0.1, abs_tol=1e-9)
    assert math.isclose(verts[:, 1].max(), 0.1, abs_tol=1e-9)
    point = integrate_stable_leaf(lmap, [0.5, 0.0], 2, arclength=0.0)
    assert len(point.curve.vertices) == 1
    print("[+] Linear leaf tests completed.")


def test_random_frames_against_direction_maximum():
    print("[+] Testing 100 random frames at a=2, b=0.3 against a maximised direction sweep...")
    fmap = HenonLikeMap(MapParams(a=2.0, b=0.3))
    rng = np.random.default_rng(3)
    pts = rng.uniform((-0.6, -0.15), (0.6, 0.15), size=(100, 2))
    orders = rng.integers(1, 6, size=100)
    theta = np.linspace(0.0, math.pi, 2001)
    dirs = np.column_stack((np.cos(theta), np.sin(theta)))
    for z, k in zip(pts, orders):
        fr = frame(fmap, z, int(k))
        M = direct_product(fmap, z, int(k))
        coarse = theta[np.linalg.norm(dirs @ M.T, axis=1).argmax()]
        best = minimize_scalar(lambda t: -np.linalg.norm(M @ [math.cos(t), math.sin(t)]) ** 2,
                               bounds=(coarse - 2e-3, coarse + 2e-3), method="bounded",
                               options={"xatol": 1e-12})
        assert angle_between(fr.f_k, [math.cos(best.x), math.sin(best.x)]) < 1e-6
        assert fr.log_h <= 0
        assert fr.contdir_agrees
    print("[+] Random frame tests completed.")


def test_frame_growth_on_v_k():
    print("[+] Testing logE <= k ln b + ln 2 and logF >= k ln 3 - ln 2 on V_k at b=0.05...")
    fmap = HenonLikeMap(MapParams(a=2.0, b=0.05))
    ctx = RegionContext(fmap)
    leaf = stable_leaf(ctx)
    verts = leaf.vertices[np.argsort(leaf.vertices[:, 1])]
    rng = np.random.default_rng(1)
    y = rng.uniform(-1.0, -0.5, size=1000)
    offsets = rng.choice((-1.0, 1.0), size=1000) * 10.0 ** rng.uniform(-9.0, -3.0, size=1000)
    pts = np.column_stack((np.interp(y, verts[:, 1], verts[:, 0]) + offsets, y))
    orders = v_orders(ctx, pts, 10)
    usable = orders >= 1
    assert usable.sum() >= 100
    checked = 0
    for z, order in zip(pts[usable][:100], orders[usable][:100]):
        k = int(min(order, 10))
        fr = frame(fmap, z, k)
        assert fr.log_e <= k * math.log(0.05) + math.log(2.0)
        assert fr.log_f >= k * math.log(3.0) - math.log(2.0)
        checked += 1
    assert checked == 100
    print("[+] V_k growth tests completed.")


def test_contdir_mismatch_is_reported():
    print("[+] Testing the closed-form angle cross-check on frames...")
    fmap = HenonLikeMap(MapParams(a=2.0, b=0.3))
    fr = frame(fmap, np.array([0.1, 0.05]), 3)
    assert fr.contdir_mismatch is not None and fr.contdir_mismatch < 1e-8
    assert fr.contdir_agrees
    deep = frame(fmap, np.array([0.1, 0.05]), 7)
    assert deep.contdir_mismatch is None and deep.contdir_agrees
    print("[+] Closed-form angle tests completed.")


def test_leaf_seed_domain():
    print("[+] Testing that leaf seeds must lie in V+ or V-_k...")
    fmap = HenonLikeMap(MapParams(a=2.0, b=0.05))
    d_side = np.array([0.5, -1.44])
    assert in_foliation_domain(fmap, d_side, 0)
    assert not in_foliation_domain(fmap, d_side, 3)
    assert in_foliation_domain(fmap, np.array([0.5, -1.52]), 3)
    assert not in_foliation_domain(fmap, np.array([-0.5, -1.44]), 1)
    with pytest.raises(PreconditionError) as exc:
        integrate_stable_leaf(fmap, d_side, 3, arclength=0.01)
    assert exc.value.message == "seed outside V+ and V-_k"
    with pytest.raises(PreconditionError):
        leaf_convergence(fmap, d_side, 3)
    print("[+] Leaf seed domain tests completed.")


def test_leaf_convergence_on_stable_leaf():
    print("[+] Testing e_k convergence at a point of f^-1(W^s(q))...")
    fmap = HenonLikeMap(MapParams(a=2.0, b=0.05))
    seed = locate_stable_leaf_point(RegionContext(fmap), -0.75, 0.7, 0.9)
    assert in_foliation_domain(fmap, seed, 4)
    result = leaf_convergence(fmap, seed, 3, arclength=0.05, step=5e-3)
    entries = result["entries"]
    assert [e["k"] for e in entries] == [1, 2, 3]
    assert entries[1]["angle"] < entries[0]["angle"]
    assert all(np.isfinite(e["gap"]) for e in entries)
    print("[+] Leaf convergence tests completed.")


def main():
    test_linear_frame()
    print()
    test_frame_matches_brute_force()
    print()
    test_batch_frames_agree()
    print()
    test_frame_errors()
    print()
    test_linear_leaf_is_vertical()
    print()
    test_random_frames_against_direction_maximum()
    print()
    test_frame_growth_on_v_k()
    print()
    test_contdir_mismatch_is_reported()
    print()
    test_leaf_seed_domain()
    print()
    test_leaf_convergence_on_stable_leaf()

if __name__ == "__main__":
    main()
