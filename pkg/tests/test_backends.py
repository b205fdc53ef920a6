import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expanderlab import _backend, _pykernels

_core = pytest.importorskip("expanderlab._core")


def test_compiled_backend_is_selected():
    assert _backend.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, EXPANDERLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c",
                          "from expanderlab import _backend; print(_backend.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("family, a, slope", [(0, 1.0, math.sqrt(3) / 3), (1, 0.3, 0.0),
                                              (0, 5.0, math.sqrt(3) / 3)])
def test_integrate_agrees(family, a, slope):
    args = (family, 2.0, 0.0, a, slope, 0.0, 12.0, 1e-10, 1e-3 * min(1.0, a), 1e-8 * a, 1e8,
            2_000_000)
    c, p = _core.integrate(*args), _pykernels.integrate(*args)
    assert len(c) == len(p)
    for x, y in zip(c[:6], p[:6]):
        assert np.asarray(x).shape == np.asarray(y).shape
        assert np.max(np.abs(np.asarray(x) - np.asarray(y))) <= 1e-12 * (1 + np.max(np.abs(y)))
    assert c[6:] == pytest.approx(p[6:], rel=1e-12)


@given(st.integers(2, 80), st.floats(-4.0, 4.0), st.integers(0, 2 ** 31 - 1))
def test_sturm_count_agrees(size, sigma, seed):
    rng = np.random.default_rng(seed)
    d = np.ascontiguousarray(rng.normal(size=size))
    e2 = np.ascontiguousarray(rng.normal(size=size - 1) ** 2)
    assert _core.sturm_count(d, e2, sigma) == _pykernels.sturm_count(d, e2, sigma)


@given(st.integers(2, 80), st.integers(0, 2 ** 31 - 1))
def test_thomas_agrees_and_solves(size, seed):
    rng = np.random.default_rng(seed)
    lower = np.ascontiguousarray(np.r_[0.0, rng.uniform(-1, 1, size - 1)])
    upper = np.ascontiguousarray(np.r_[rng.uniform(-1, 1, size - 1), 0.0])
    diag = np.ascontiguousarray(3.0 + rng.uniform(0, 1, size))
    rhs = np.ascontiguousarray(rng.normal(size=size))
    xc = np.asarray(_core.thomas(lower, diag, upper, rhs))
    xp = np.asarray(_pykernels.thomas(lower, diag, upper, rhs))
    assert np.allclose(xc, xp, rtol=1e-13, atol=1e-14)
    A = np.diag(diag) + np.diag(upper[:-1], 1) + np.diag(lower[1:], -1)
    assert np.allclose(A @ xc, rhs, atol=1e-12)


@pytest.mark.parametrize("rescaled", [0, 1])
def test_flow_step_agrees(rescaled):
    rho = np.linspace(0.0, 8.0, 201)
    v = np.ascontiguousarray(np.sqrt(0.5 + 9.0 * rho * rho))
    dt = 0.4 * (rho[1] - rho[0]) ** 2
    c = np.asarray(_core.flow_step(v, rho, dt, 2.0, rescaled, float(v[-1])))
    p = np.asarray(_pykernels.flow_step(v, rho, dt, 2.0, rescaled, float(v[-1])))
    assert np.max(np.abs(c - p)) <= 1e-14 * np.max(np.abs(v))
    assert c[-1] == v[-1]
