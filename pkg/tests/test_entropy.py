import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expanderlab.entropy import (SIMONS_PROSE_VALUE, GaussianCenter, centered_area_closed_form,
                                 entropy_cone, entropy_scan, gaussian_area_cone,
                                 reference_entropy, scaled_angular_kernel, scan_to_csv,
                                 simons_density, simons_density_numeric, sphere_volume)
from expanderlab.errors import PreconditionError
from expanderlab.profiles import ConeSpec
from oracles import cylinder_entropy, gaussian_area_quad, kernel_scaled, radial_moment


def test_sphere_volume():
    assert sphere_volume(0) == 2.0
    assert sphere_volume(1) == pytest.approx(2 * math.pi, rel=1e-15)
    assert sphere_volume(2) == pytest.approx(4 * math.pi, rel=1e-15)
    with pytest.raises(PreconditionError):
        sphere_volume(1.5)


# the Bessel oracle loses precision below ~1e-8 through c^-nu I_nu(c)
@given(st.integers(2, 6), st.one_of(st.just(0.0), st.floats(1e-8, 500.0)))
def test_kernel_matches_bessel(n, c):
    assert scaled_angular_kernel(n, c)[0] == pytest.approx(kernel_scaled(n, c), rel=1e-12)


def test_center_validation():
    with pytest.raises(PreconditionError):
        GaussianCenter(0.0, -1.0)


@pytest.mark.parametrize("mp, mm, t, d", [(1.0, 1.0, 0.0, 0.0), (2.0, 0.5, 0.7, 1.3),
                                          (0.3, 3.0, -1.0, 0.4)])
def test_area_matches_nested_quadrature(mp, mm, t, d):
    val, err = gaussian_area_cone(ConeSpec(2, mp, mm), GaussianCenter(t, d))
    assert val == pytest.approx(gaussian_area_quad(2, mp, mm, t, d), rel=1e-9)
    assert err < 1e-10


@pytest.mark.parametrize("n", [2, 3, 4])
def test_centered_area_closed_form(n):
    cone = ConeSpec(n, 0.7, 2.0)
    val, _ = gaussian_area_cone(cone, GaussianCenter(0.0))
    assert val == pytest.approx(centered_area_closed_form(cone), rel=1e-12)


@given(st.floats(0.2, 4.0), st.floats(-2.0, 2.0), st.floats(0.0, 2.0))
def test_dilation_invariance(scale, t, d):
    cone = ConeSpec(2, 1.5, 0.5)
    a, _ = gaussian_area_cone(cone, GaussianCenter(t, d), scale=scale)
    b, _ = gaussian_area_cone(cone, GaussianCenter(t / scale, d / scale))
    assert a == pytest.approx(b, rel=1e-11)


def test_scale_must_be_positive():
    with pytest.raises(PreconditionError):
        gaussian_area_cone(ConeSpec(2, 1.0, 1.0), GaussianCenter(0.0), scale=0.0)


@pytest.fixture(scope="module")
def unit_cone_entropy():
    return entropy_cone(ConeSpec(2, 1.0, 1.0))


def test_entropy_of_the_right_angle_cone(unit_cone_entropy):
    rep = unit_cone_entropy
    assert rep.lambda_ == pytest.approx(math.sqrt(2.0), abs=1e-10)
    assert rep.lambda_ >= rep.f_at_origin - 1e-14
    assert rep.quad_error < 1e-12
    assert {"n", "m_plus", "m_minus", "lambda", "argmax", "f_at_origin", "quad_error",
            "opt_error"} == set(rep.to_dict())


def test_entropy_is_between_plane_and_two_planes():
    rep = entropy_cone(ConeSpec(2, 0.25, 0.25))
    assert 1.0 < rep.lambda_ < 2.0
    assert rep.lambda_ == pytest.approx(2.0 / math.sqrt(1 + 0.0625), abs=1e-9)


def test_scan_rows_and_csv():
    rows = entropy_scan(2, [1.0], [1.0, 2.0])
    assert len(rows) == 2 and rows[0][:2] == (1.0, 1.0)
    assert rows[0][2] == pytest.approx(math.sqrt(2.0), abs=1e-10)
    text = scan_to_csv(rows).splitlines()
    assert text[0] == "m_plus,m_minus,lambda,t,d,err" and len(text) == 3


def test_simons_planar_case():
    s = simons_density(2, 1)
    assert s.theta == pytest.approx(math.pi / 2, rel=1e-15)
    assert SIMONS_PROSE_VALUE in s.note
    assert "paper_discrepancy" in s.to_dict()
    assert simons_density(3, 1).note is None


@pytest.mark.parametrize("n, p", [(2, 1), (3, 1), (4, 2), (5, 2), (7, 3)])
def test_simons_closed_form_vs_quadrature(n, p):
    assert simons_density_numeric(n, p) == pytest.approx(simons_density(n, p).theta, rel=1e-12)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_radial_moment_oracle(n):
    # the numeric path integrates r^n exp(-r^2/4); cross-check with scipy
    val = simons_density_numeric(n, 1) / simons_density(n, 1).theta
    assert val == pytest.approx(1.0, rel=1e-12)
    assert radial_moment(n) == pytest.approx(2 ** n * math.gamma((n + 1) / 2), rel=1e-12)


@pytest.mark.parametrize("args", [(1, 1), (3, 0), (3, 3), (2.5, 1)])
def test_simons_domain(args):
    with pytest.raises(PreconditionError):
        simons_density(*args)


@pytest.mark.parametrize("k", [1, 2, 3, 6])
def test_reference_entropies(k):
    assert reference_entropy("sphere", k) == pytest.approx(cylinder_entropy(k), rel=1e-14)
    assert reference_entropy("cylinder", k) == reference_entropy("sphere", k)


def test_reference_values():
    assert reference_entropy("hyperplane") == 1.0
    assert reference_entropy("sphere", 1) == pytest.approx(math.sqrt(2 * math.pi / math.e))
    vals = [reference_entropy("sphere", k) for k in range(1, 8)]
    assert np.all(np.diff(vals) < 0)
    with pytest.raises(PreconditionError):
        reference_entropy("torus")
