"""
Fixed point checks against the closed forms.

USAGE: python fixed_points_test.py
"""
import math

import numpy as np
import pytest

from errors import PreconditionError
from fixed_points import classify, find_fixed_points, local_manifold_seed, one_d_fixed_points
from map_core import HenonLikeMap
from models import MapParams


def closed_form(a, b):
    root = math.sqrt((1 - b) ** 2 + 4 * a)
    return [(-(1 - b) + s * root) / (2 * a) for s in (1, -1)]


def test_one_dimensional_roots():
    print("[+] Testing one-dimensional fixed points...")
    assert one_d_fixed_points(2.0) == (0.5, -1.0)
    with pytest.raises(PreconditionError) as exc:
        one_d_fixed_points(-1.0)
    assert exc.value.message == "complex roots"
    print("[+] One-dimensional tests completed.")


def test_planar_fixed_points_match_closed_form():
    print("[+] Testing planar fixed points at a=2, b=0.3...")
    fmap = HenonLikeMap(MapParams(a=2.0, b=0.3))
    P, Q = find_fixed_points(fmap)
    xp, xq = closed_form(2.0, 0.3)
    assert np.allclose(P.location, [xp, 0.3 * xp], atol=1e-12)
    assert np.allclose(Q.location, [xq, 0.3 * xq], atol=1e-12)
    assert P.location[0] > 0 > Q.location[0]
    for fp in (P, Q):
        assert fp.is_saddle
        assert math.isclose(fp.eigenvalues[0] * fp.eigenvalues[1], -0.3, rel_tol=1e-10)
        assert fp.orientation == "Reversing"
    print("[+] Planar fixed point tests completed.")


def test_orientation_preserving_case():
    print("[+] Testing b < 0...")
    P, Q = find_fixed_points(HenonLikeMap(MapParams(a=2.0, b=-0.05)))
    assert P.orientation == Q.orientation == "Preserving"
    assert math.isclose(P.eigenvalues[0] * P.eigenvalues[1], 0.05, rel_tol=1e-10)
    print("[+] Orientation tests completed.")


def test_local_seed():
    print("[+] Testing local manifold seeds...")
    fmap = HenonLikeMap(MapParams(a=2.0, b=0.3))
    _, Q = find_fixed_points(fmap)
    seed = local_manifold_seed(Q, "unstable", 0.02)
    anchor = seed.meta["anchor"]
    assert np.array_equal(seed.vertices[anchor], Q.location)
    assert math.isclose(seed.length, 0.04, rel_tol=1e-9)
    with pytest.raises(PreconditionError):
        local_manifold_seed(Q, "stable", 0.2)
    with pytest.raises(ValueError):
        local_manifold_seed(Q, "neutral")
    sink = classify(HenonLikeMap(MapParams(a=0.2, b=0.3)), np.array([0.0, 0.0]), "S")
    assert not sink.is_saddle
    print("[+] Local seed tests completed.")


def main():
    test_one_dimensional_roots()
    print()
    test_planar_fixed_points_match_closed_form()
    print()
    test_orientation_preserving_case()
    print()
    test_local_seed()

if __name__ == "__main__":
    main()
