"""
First tangency search and parameter scans on coarse refinement settings.

USAGE: python bifurcation_test.py
"""
import numpy as np
import pytest

from bifurcation import (PRESERVING, REVERSING, TangencySettings, case_for, find_a_hat, find_a_star, gap,
                         gap_witness, local_crossing_count, scan)
from errors import BracketError, OrderingError
from map_core import HenonLikeMap
from models import MapParams, RefinementConfig

COARSE = RefinementConfig(max_spacing=1e-2, max_turn=0.05)
SETTINGS = TangencySettings()


def test_case_and_settings():
    print("[+] Testing the tangency case and settings...")
    assert case_for(0.05) == REVERSING
    assert case_for(-0.05) == PRESERVING
    settings = TangencySettings().to_dict()
    assert settings["version"] == "1"
    assert settings["local_unstable_arclength"] == 6.0
    print("[+] Case tests completed.")


def test_gap_changes_sign():
    print("[+] Testing the gap on both sides of the tangency at b=0.01...")
    params = MapParams(a=2.0, b=0.01)
    assert gap(params, 1.7, SETTINGS, COARSE) > 0
    crossing = gap_witness(params, 2.3, SETTINGS, COARSE)
    assert crossing["gap"] < 0
    assert crossing["case"] == REVERSING
    assert crossing["manifolds"] == ["Gamma_u(q)", "Gamma_s(p)"]
    print("[+] Gap sign tests completed.")


def test_find_a_star_coarse():
    print("[+] Testing a* at b=0.01 on a coarse grid...")
    params = MapParams(a=2.0, b=0.01)
    report = find_a_star(params, bracket=(1.7, 2.3), tol=1e-3, scan_points=7, settings=SETTINGS,
                         refinement=COARSE)
    assert 1.8 < report.a_star < 2.1
    assert report.case == REVERSING
    assert report.bracket_history[-1]["hi"] - report.bracket_history[-1]["lo"] <= 1e-3
    assert len(report.gap_samples) == 7
    with pytest.raises(BracketError) as exc:
        find_a_star(params, bracket=(1.6, 1.7), tol=1e-3, scan_points=2, settings=SETTINGS, refinement=COARSE)
    assert exc.value.message == "bracket has no sign change"
    print("[+] a* tests completed.")


def test_a_star_across_b():
    print("[+] Testing a* for both orientations and two sizes of |b|...")
    a_star = {}
    for b in (0.01, 0.001, -0.01, -0.001):
        report = find_a_star(MapParams(a=2.0, b=b), bracket=(1.7, 2.3), tol=1e-3, scan_points=7,
                             settings=SETTINGS, refinement=COARSE)
        assert 1.7 <= report.a_star <= 2.3
        assert report.case == case_for(b)
        if b < 0:
            assert report.manifolds == ["Gamma_u(q)", "Gamma_s(q)"]
        a_star[b] = report.a_star
    assert abs(a_star[0.001] - 2.0) < abs(a_star[0.01] - 2.0)
    assert abs(a_star[-0.001] - 2.0) < abs(a_star[-0.01] - 2.0)
    print("[+] a* orientation tests completed.")


def test_a_star_matches_dense_scan():
    print("[+] Testing the bisection against a dense gap scan at b=0.01...")
    params = MapParams(a=2.0, b=0.01)
    tol = 1e-3
    report = find_a_star(params, bracket=(1.7, 2.3), tol=tol, scan_points=7, settings=SETTINGS,
                         refinement=COARSE)
    grid = np.linspace(report.a_star - 5 * tol, report.a_star + 5 * tol, 21)
    values = np.array([gap(params, a, SETTINGS, COARSE) for a in grid])
    change = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
    assert len(change) >= 1
    assert values[0] > 0 > values[-1]
    assert all(abs(0.5 * (grid[j] + grid[j + 1]) - report.a_star) <= tol for j in change)
    print("[+] Dense scan tests completed.")


def test_local_crossing_counts():
    print("[+] Testing the local crossing count of p on both sides of a-hat...")
    fine = RefinementConfig(max_spacing=2e-3, max_turn=0.05)
    assert local_crossing_count(HenonLikeMap(MapParams(a=1.6, b=0.01)), SETTINGS, fine) == 3
    assert local_crossing_count(HenonLikeMap(MapParams(a=2.1, b=0.01)), SETTINGS, fine) == 4
    print("[+] Local crossing tests completed.")


def test_a_hat_needs_crossings():
    print("[+] Testing the a-hat bracket checks...")
    params = MapParams(a=2.0, b=0.01)
    with pytest.raises(BracketError) as exc:
        find_a_hat(params, bracket=(1.6, 1.7), tol=1e-3, settings=SETTINGS, refinement=COARSE)
    assert exc.value.message == "bracket has no sign change"
    print("[+] a-hat tests completed.")


def test_a_hat_below_a_star():
    print("[+] Testing a-hat against a* at b=0.05...")
    params = MapParams(a=2.0, b=0.05)
    a_hat = find_a_hat(params, bracket=(1.6, 2.3), tol=1e-2, settings=SETTINGS, refinement=COARSE)
    assert 1.7 < a_hat < 2.3
    with pytest.raises(OrderingError) as exc:
        find_a_hat(params, bracket=(1.6, 2.3), tol=1e-2, settings=SETTINGS, refinement=COARSE,
                   a_star=a_hat - 0.1)
    assert exc.value.details["a_hat"] > exc.value.details["a_star"]
    print("[+] a-hat ordering tests completed.")


def test_scan_rows():
    print("[+] Testing parameter scans...")
    params = MapParams(a=2.0, b=0.01)
    rows = scan(params, [2.3, 1.7], ["gap"], SETTINGS, COARSE)
    assert [row["a"] for row in rows] == [2.3, 1.7]
    assert rows[0]["gap"] < 0 < rows[1]["gap"]
    assert all(row["error"] is None for row in rows)
    with pytest.raises(ValueError):
        scan(params, [2.0], ["entropy"])
    print("[+] Scan tests completed.")


def main():
    test_case_and_settings()
    print()
    test_gap_changes_sign()
    print()
    test_find_a_star_coarse()
    print()
    test_a_star_across_b()
    print()
    test_a_star_matches_dense_scan()
    print()
    test_local_crossing_counts()
    print()
    test_a_hat_needs_crossings()
    print()
    test_a_hat_below_a_star()
    print()
    test_scan_rows()

if __name__ == "__main__":
    main()
