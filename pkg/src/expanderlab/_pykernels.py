"""Pure-Python twins of the kernels in ``_core.pyx``.

Used when the compiled extension is unavailable or when
``EXPANDERLAB_PURE_PYTHON=1`` is set.  Keep the arithmetic in the same order
as the Cython source so both backends agree to rounding.
"""
from math import fabs, sqrt

import numpy as np
from scipy.linalg import solve_banded

C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0
A64, A65 = 49.0 / 176.0, -5103.0 / 18656.0
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4 = 71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0
E5, E6, E7 = -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0
# 3-point Gauss-Legendre nodes/weights on [0, 1]
G1 = 0.5 - sqrt(15.0) / 10.0
G3 = 0.5 + sqrt(15.0) / 10.0
GAUSS3 = ((G1, 5.0 / 18.0), (0.5, 8.0 / 18.0), (G3, 5.0 / 18.0))


def _accel(family, y, p, x, n):
    if family == 0:
        return (1.0 + p * p) * ((n - 1.0) / y + 0.5 * y - 0.5 * x * p)
    if x == 0.0:
        return y / (2.0 * n)
    return (1.0 + p * p) * (0.5 * (y - x * p) - (n - 1.0) * p / x)


def integrate(family, n, x0, y0, p0, s0, x_end, tol, h0, floor, ceiling, max_steps):
    """Integrate one profile ODE; returns (x, y, p, s, ypp, resid, status, h_last)."""
    x, y, p, s, h = float(x0), float(y0), float(p0), float(s0), float(h0)
    n = float(n)
    facold = 1e-4
    expo1, beta = 0.2 - 0.04 * 0.75, 0.04
    status, reject, nsteps = 0, False, 0

    k1y = p
    k1p = _accel(family, y, p, x, n)
    rows = [(x, y, p, s, k1p, 0.0)]
    while x < x_end:
        if nsteps >= max_steps:
            status = 4
            break
        if h < 1e-14 * max(1.0, fabs(x)):
            status = 3
            break
        if x + 1.01 * h >= x_end:
            h = x_end - x
        nsteps += 1
        yt = y + h * A21 * k1y
        pt = p + h * A21 * k1p
        k2y, k2p = pt, _accel(family, yt, pt, x + C2 * h, n)
        yt = y + h * (A31 * k1y + A32 * k2y)
        pt = p + h * (A31 * k1p + A32 * k2p)
        k3y, k3p = pt, _accel(family, yt, pt, x + C3 * h, n)
        yt = y + h * (A41 * k1y + A42 * k2y + A43 * k3y)
        pt = p + h * (A41 * k1p + A42 * k2p + A43 * k3p)
        k4y, k4p = pt, _accel(family, yt, pt, x + C4 * h, n)
        yt = y + h * (A51 * k1y + A52 * k2y + A53 * k3y + A54 * k4y)
        pt = p + h * (A51 * k1p + A52 * k2p + A53 * k3p + A54 * k4p)
        k5y, k5p = pt, _accel(family, yt, pt, x + C5 * h, n)
        yt = y + h * (A61 * k1y + A62 * k2y + A63 * k3y + A64 * k4y + A65 * k5y)
        pt = p + h * (A61 * k1p + A62 * k2p + A63 * k3p + A64 * k4p + A65 * k5p)
        k6y, k6p = pt, _accel(family, yt, pt, x + h, n)
        yn = y + h * (B1 * k1y + B3 * k3y + B4 * k4y + B5 * k5y + B6 * k6y)
        pn = p + h * (B1 * k1p + B3 * k3p + B4 * k4p + B5 * k5p + B6 * k6p)
        k7y, k7p = pn, _accel(family, yn, pn, x + h, n)
        ey = h * (E1 * k1y + E3 * k3y + E4 * k4y + E5 * k5y + E6 * k6y + E7 * k7y)
        ep = h * (E1 * k1p + E3 * k3p + E4 * k4p + E5 * k5p + E6 * k6p + E7 * k7p)
        sy = tol + tol * max(fabs(y), fabs(yn))
        sp = tol + tol * max(fabs(p), fabs(pn))
        err = sqrt(0.5 * ((ey / sy) * (ey / sy) + (ep / sp) * (ep / sp)))
        if err != err:
            err = 1e10
        fac = err**expo1 / facold**beta
        fac = max(0.1, min(5.0, fac / 0.9))
        if err > 1.0:
            h = h / min(5.0, err**expo1 / 0.9)
            reject = True
            continue
        dy = yn - y
        dp = pn - p
        bsy = h * k1y - dy
        bsp = h * k1p - dp
        r5y = h * (D1 * k1y + D3 * k3y + D4 * k4y + D5 * k5y + D6 * k6y + D7 * k7y)
        r5p = h * (D1 * k1p + D3 * k3p + D4 * k4p + D5 * k5p + D6 * k6p + D7 * k7p)
        r4y = dy - h * k7y - bsy
        r4p = dp - h * k7p - bsp
        quad = 0.0
        arc = 0.0
        for th, w in GAUSS3:
            th1 = 1.0 - th
            yq = y + th * (dy + th1 * (bsy + th * (r4y + th1 * r5y)))
            pq = p + th * (dp + th1 * (bsp + th * (r4p + th1 * r5p)))
            quad = quad + w * _accel(family, yq, pq, x + th * h, n)
            arc = arc + w * sqrt(1.0 + pq * pq)
        resid = fabs(dp - h * quad)
        s = s + h * arc
        x = x + h
        y = yn
        p = pn
        k1y, k1p = k7y, k7p
        facold = max(err, 1e-4)
        rows.append((x, y, p, s, k7p, resid))
        if y < floor:
            status = 1
            break
        if fabs(p) > ceiling:
            status = 2
            break
        if reject:
            h = h / max(fac, 1.0)
            reject = False
        else:
            h = h / fac
    out = np.array(rows, dtype=float)
    return out[:, 0], out[:, 1], out[:, 2], out[:, 3], out[:, 4], out[:, 5], status, h


def sturm_count(d, e2, sigma):
    """Number of eigenvalues of the symmetric tridiagonal (d, e) below sigma."""
    count = 0
    q = d[0] - sigma
    if q < 0.0:
        count += 1
    for i in range(1, len(d)):
        if q == 0.0:
            q = 1e-300
        q = d[i] - sigma - e2[i - 1] / q
        if q < 0.0:
            count += 1
    return count


def thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system; lower[0] and upper[-1] are ignored."""
    N = len(diag)
    cp = np.empty(N)
    x = np.empty(N)
    denom = diag[0] if diag[0] != 0.0 else 1e-300
    cp[0] = upper[0] / denom
    x[0] = rhs[0] / denom
    for i in range(1, N):
        denom = diag[i] - lower[i] * cp[i - 1]
        if denom == 0.0:
            denom = 1e-300
        if i < N - 1:
            cp[i] = upper[i] / denom
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / denom
    for i in range(N - 2, -1, -1):
        x[i] = x[i] - cp[i] * x[i + 1]
    return x


def flow_step(v, rho, dt, n, rescaled, v_right):
    """One semi-implicit step of the radial flow (see the compiled twin)."""
    v = np.asarray(v, dtype=float)
    rho = np.asarray(rho, dtype=float)
    N = v.shape[0]
    h = rho[1] - rho[0]
    ih2 = 1.0 / (h * h)
    vr = np.zeros(N)
    vr[1:-1] = 0.5 * (v[2:] - v[:-2]) / h
    coef = 1.0 / (1.0 + vr * vr)
    g = -(n - 1.0) / v
    if rescaled:
        g = g + 0.5 * (rho * vr - v)
    b = v + dt * g
    lo = -dt * coef * ih2
    di = 1.0 + 2.0 * dt * coef * ih2
    up = -dt * coef * ih2
    lo[0] = 0.0
    up[0] = 2.0 * up[0]
    lo[-1] = 0.0
    up[-1] = 0.0
    di[-1] = 1.0
    b[-1] = v_right
    # banded LAPACK solve stands in for the compiled Thomas sweep
    ab = np.zeros((3, N))
    ab[0, 1:] = up[:-1]
    ab[1] = di
    ab[2, :-1] = lo[1:]
    return solve_banded((1, 1), ab, b)
