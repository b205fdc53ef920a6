import math

import numpy as np
import pytest

from conftest import STABLE_A, UNSTABLE_A
from expanderlab.errors import EscalationCapReached, NoBracketFound, PreconditionError
from expanderlab.profiles import integrate_profile
from expanderlab.shooting import (DEFAULT_OPTIONS, ShootingOptions, _jump_too_large,
                                  find_profiles_for_slope, junction_geometry_check, shoot,
                                  slope_map, trace_slope_curve)
from oracles import radau_slope


@pytest.mark.parametrize("a", [0.3, 1.0, 4.0])
def test_slope_map_matches_radau(a):
    est = slope_map(a, "connected", 2)
    assert est.error_bound <= DEFAULT_OPTIONS.target_error
    assert est.value == pytest.approx(radau_slope("connected", a), abs=1e-5)


def test_shoot_escalates_until_settled():
    opts = ShootingOptions(r_start=1.0)
    prof, est = shoot(1.0, "connected", 2, opts)
    assert prof.r_max > opts.r_start
    assert est.error_bound <= DEFAULT_OPTIONS.target_error


def test_escalation_cap():
    with pytest.raises(EscalationCapReached):
        shoot(0.05, "triple", 2, ShootingOptions(r_start=2.0, r_cap=4.0))


def test_tightened_options():
    t = DEFAULT_OPTIONS.tightened(10)
    assert t.tol == pytest.approx(DEFAULT_OPTIONS.tol / 10)
    assert t.r_start == DEFAULT_OPTIONS.r_start


def test_jump_rule():
    assert _jump_too_large(1.0, 1.06, 0.05)
    assert not _jump_too_large(1.0, 1.04, 0.05)
    # relative to |m| once |m| > 1
    assert not _jump_too_large(10.0, 10.4, 0.05)
    assert _jump_too_large(10.0, 10.6, 0.05)


def test_curve_is_sorted_and_refined():
    curve = trace_slope_curve("connected", 2, 0.1, 5.0, samples=12)
    assert np.all(np.diff(curve.a) > 0)
    assert len(curve.a) >= 12
    m = curve.m
    for lo, hi in zip(m[:-1], m[1:]):
        assert not _jump_too_large(lo, hi, curve.policy["jump"])
    assert curve.policy["spacing"] == "log"
    text = curve.to_csv().splitlines()
    assert text[0] == "a,slope,slope_error" and len(text) == len(curve.a) + 1


def test_curve_preconditions():
    with pytest.raises(PreconditionError):
        trace_slope_curve("connected", 2, 2.0, 1.0)
    with pytest.raises(PreconditionError):
        trace_slope_curve("connected", 2, 0.1, 1.0, samples=1)


def test_roots_for_wide_cone():
    roots = find_profiles_for_slope(3.0, "connected", 2, 0.1, 5.0, samples=24, tol=1e-9)
    assert len(roots.roots) == 2
    # the slope read-off carries a 1e-6 error bound, which limits a to ~1e-6
    assert roots.values[0] == pytest.approx(UNSTABLE_A, rel=2e-6)
    assert roots.values[1] == pytest.approx(STABLE_A, rel=2e-6)
    for r in roots.roots:
        assert r.bracket_lo <= r.a <= r.bracket_hi
        assert r.residual <= 1e-9


@pytest.mark.parametrize("a", [UNSTABLE_A, STABLE_A])
def test_frozen_roots_against_radau(a):
    assert radau_slope("connected", a) == pytest.approx(3.0, abs=2e-6)


def test_no_bracket():
    with pytest.raises(NoBracketFound):
        find_profiles_for_slope(1e-4, "triple", 2, 0.1, 5.0, samples=8)
    with pytest.raises(PreconditionError):
        find_profiles_for_slope(-1.0, "triple", 2)


def test_junction_angles_of_triple_profiles():
    prof = integrate_profile("triple", 1.0, 2, 4.0, 1e-10)
    angles = junction_geometry_check(prof)
    assert angles == pytest.approx((2 * math.pi / 3,) * 3, abs=1e-14)


@pytest.mark.parametrize("du0, expected", [(0.0, (math.pi, math.pi / 2, math.pi / 2)),
                                           (1.0, (math.pi / 2, 3 * math.pi / 4, 3 * math.pi / 4))])
def test_junction_angles_synthetic(du0, expected):
    prof = integrate_profile("triple", 1.0, 2, 4.0, 1e-10)
    prof.du[0] = du0
    assert junction_geometry_check(prof) == pytest.approx(expected, abs=1e-14)


def test_junction_requires_triple_family():
    with pytest.raises(PreconditionError):
        junction_geometry_check(integrate_profile("connected", 1.0, 2, 4.0, 1e-10))
