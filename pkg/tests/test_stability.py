import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import UNSTABLE_A
from expanderlab.errors import FoldOverError, PreconditionError
from expanderlab.profiles import Profile, ProfileFamily
from expanderlab.stability import (PerturbationSpec, ProfileCurve, analysis_profile,
                                   assemble_operator, convexity_certificate,
                                   decay_envelope_check, eigenfunction_spline, envelope,
                                   expander_mean_curvature, family_is_reflected, g_beta,
                                   lowest_eigenpair, lowest_eigenvalue, perturb_profile)
from oracles import lowest_tridiagonal

# mu1 at N = 1600 on [0, 16], frozen
UNSTABLE_MU1 = -5.470546463538984


def plane(n, length=20.0):
    rho = np.linspace(0.0, length, 2001)
    z = np.zeros_like(rho)
    return Profile(ProfileFamily.GraphOverPlane, n, 1.0, rho, z, z, 0.0, length)


@pytest.mark.parametrize("n", [2, 3])
def test_plane_spectrum_second_order(n):
    # -L on the plane is the Ornstein-Uhlenbeck operator shifted by 1/2
    exact = (n + 1) / 2.0
    errs = [lowest_eigenpair(assemble_operator(plane(n), 16.0, N)).mu1 - exact
            for N in (200, 400, 800)]
    assert all(e > 0 for e in errs)
    assert abs(errs[-1]) < 1e-4
    for e1, e2 in zip(errs, errs[1:]):
        assert math.log2(e1 / e2) == pytest.approx(2.0, abs=0.05)


def test_unstable_root_eigenvalue(unstable_eigen):
    assert unstable_eigen.mu1 == pytest.approx(UNSTABLE_MU1, rel=1e-12)
    assert unstable_eigen.mu1 < 0.5


def test_eigenvalue_against_lapack(unstable_eigen):
    p = unstable_eigen.pencil
    assert unstable_eigen.mu1 == pytest.approx(lowest_tridiagonal(p.diag, p.off), abs=1e-10)


@given(st.integers(5, 60), st.integers(0, 2 ** 31 - 1))
def test_sturm_bisection_against_lapack(size, seed):
    rng = np.random.default_rng(seed)
    d, e = rng.normal(size=size), rng.normal(size=size - 1)
    assert lowest_eigenvalue(d, e) == pytest.approx(lowest_tridiagonal(d, e), abs=1e-12)


def test_eigenfunction_properties(unstable_eigen):
    res = unstable_eigen
    assert abs(res.rayleigh - res.mu1) <= 1e-10
    assert np.all(res.f > 0)
    assert res.norm == pytest.approx(1.0, abs=1e-12)
    phi = res.f
    resid = res.pencil.apply_operator(phi) + res.mu1 * phi
    assert np.max(np.abs(resid)) <= 1e-8 * np.max(np.abs(res.mu1 * phi))


def test_stable_root_has_positive_eigenvalue(stable_profile):
    res = lowest_eigenpair(assemble_operator(stable_profile, 16.0, 800))
    assert res.mu1 == pytest.approx(0.7589479703115127, abs=1e-3)
    with pytest.raises(PreconditionError):
        decay_envelope_check(res)


def test_short_profile_rejected():
    prof = analysis_profile("connected", UNSTABLE_A, 2, 4.0)
    with pytest.raises(PreconditionError):
        assemble_operator(prof, prof.arclength[-1] + 1.0, 100)


def test_curve_inverts_arclength(unstable_profile):
    curve = ProfileCurve(unstable_profile)
    s = np.linspace(0.0, 15.0, 31)
    g = curve.param_at(s)
    assert np.max(np.abs(curve.s_poly(g) - s)) < 1e-13
    nodes = unstable_profile.arclength <= 15.0
    back = curve.param_at(unstable_profile.arclength[nodes])
    assert np.max(np.abs(back - unstable_profile.grid[nodes])) < 1e-12


def _with_f(res, f):
    return dataclasses.replace(res, f=f)


def test_envelope_check_synthetic(unstable_eigen):
    x2 = unstable_eigen.pencil.geometry["x2"]
    env = envelope(x2, 2, unstable_eigen.mu1)
    fit = decay_envelope_check(_with_f(unstable_eigen, 2.0 * env))
    assert fit.passed and fit.C == pytest.approx(2.0, rel=1e-12)
    fit = decay_envelope_check(_with_f(unstable_eigen, env * (1.0 + 0.5 * np.sin(x2))))
    assert fit.passed and fit.C == pytest.approx(2.0, rel=1e-3)


def test_envelope_check_rejects_polynomial_tail(unstable_eigen):
    x2 = unstable_eigen.pencil.geometry["x2"]
    fit = decay_envelope_check(_with_f(unstable_eigen, (1.0 + x2) ** -2.0))
    assert not fit.passed and fit.C > 1e9
    fit = decay_envelope_check(_with_f(unstable_eigen, -envelope(x2, 2, unstable_eigen.mu1)))
    assert not fit.passed and fit.C == math.inf


def test_envelope_of_computed_eigenfunction(unstable_eigen):
    fit = decay_envelope_check(unstable_eigen)
    assert fit.passed and 1.0 <= fit.C < 1e9


def test_perturbation_spec_validation():
    with pytest.raises(PreconditionError):
        PerturbationSpec(1e-3, 1.0, 0.0)


def test_g_beta():
    assert g_beta(1.0, 2.0) == pytest.approx(math.exp(-2.0))
    assert g_beta(2.0, 1.0) == pytest.approx(0.5 * math.exp(-2.0))


def test_zero_perturbation_is_a_copy(unstable_profile, unstable_eigen):
    copy = perturb_profile(unstable_profile, unstable_eigen, 0.0)
    assert copy is not unstable_profile
    assert np.array_equal(copy.u, unstable_profile.u)
    copy.u[0] = -1.0
    assert unstable_profile.u[0] > 0


def test_constant_normal_push_of_a_plane():
    pl = plane(2)
    moved = perturb_profile(pl, lambda s, nu=0: np.full_like(s, 0.0 if nu else 1.0), 0.1)
    assert np.allclose(moved.u, 0.1) and np.allclose(moved.grid, pl.grid)


def test_fold_over(unstable_profile, unstable_eigen):
    with pytest.raises(FoldOverError):
        perturb_profile(unstable_profile, unstable_eigen, 50.0)


def test_linearized_expander_curvature(unstable_profile, unstable_eigen):
    # E(Sigma^eps)/eps -> 2 mu1 f on the inner arc, with an O(eps) remainder
    res = unstable_eigen
    F = eigenfunction_spline(res)(unstable_profile.arclength)
    mask = unstable_profile.arclength <= 0.8 * res.truncation
    base = expander_mean_curvature(unstable_profile)
    target = 2.0 * res.mu1 * F
    errs = []
    for eps in (1e-2, 1e-3):
        q = (expander_mean_curvature(perturb_profile(unstable_profile, res, eps)) - base) / eps
        errs.append(np.max(np.abs(q - target)[mask]) / np.max(np.abs(target[mask])))
    assert errs[1] < 0.05
    assert errs[0] / errs[1] == pytest.approx(10.0, rel=0.25)


@pytest.mark.parametrize("eps", [1e-3, -1e-3])
def test_certificate_is_positive_for_both_signs(unstable_profile, unstable_eigen, eps):
    pert = perturb_profile(unstable_profile, unstable_eigen, eps)
    spec, E, window = convexity_certificate(unstable_profile, pert, unstable_eigen.mu1, eps)
    assert spec.c > 0 and spec.epsilon == eps
    assert spec.beta == pytest.approx((3 - 2 * unstable_eigen.mu1) / 2)
    assert window > 1.0


def test_expander_curvature_time_domain(unstable_profile):
    with pytest.raises(PreconditionError):
        expander_mean_curvature(unstable_profile, t=0.5)


def test_reflected_families():
    assert family_is_reflected("connected") and family_is_reflected("triple")
    assert not family_is_reflected("graph")


def test_report_formats(unstable_eigen):
    d = unstable_eigen.to_dict(envelope_c=3.0)
    assert d["envelope_C"] == 3.0 and d["cells"] == 1600
    lines = unstable_eigen.to_csv().splitlines()
    assert lines[0] == "s,r,u,f" and len(lines) == 1601
