# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: profile integration, tridiagonal kernels, flow steps.

Every function here has a line-for-line twin in ``_pykernels``; the two must
produce the same numbers up to floating-point reassociation.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, fmax, fmin, pow

cnp.import_array()

# Dormand-Prince 5(4) tableau
cdef double C2 = 1.0 / 5.0, C3 = 3.0 / 10.0, C4 = 4.0 / 5.0, C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0
cdef double D1 = -12715105075.0 / 11282082432.0
cdef double D3 = 87487479700.0 / 32700410799.0
cdef double D4 = -10690763975.0 / 1880347072.0
cdef double D5 = 701980252875.0 / 199316789632.0
cdef double D6 = -1453857185.0 / 822651844.0
cdef double D7 = 69997945.0 / 29380423.0
# 3-point Gauss-Legendre nodes/weights on [0, 1]
cdef double[3] GTH = [0.5 - sqrt(15.0) / 10.0, 0.5, 0.5 + sqrt(15.0) / 10.0]
cdef double[3] GW = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0]


cdef inline double _accel(int family, double y, double p, double x, double n) nogil:
    if family == 0:
        return (1.0 + p * p) * ((n - 1.0) / y + 0.5 * y - 0.5 * x * p)
    if x == 0.0:
        return y / (2.0 * n)
    return (1.0 + p * p) * (0.5 * (y - x * p) - (n - 1.0) * p / x)


def integrate(int family, double n, double x0, double y0, double p0, double s0,
              double x_end, double tol, double h0, double floor, double ceiling,
              long max_steps):
    """Integrate one profile ODE; returns (x, y, p, s, ypp, resid, status, h_last)."""
    cdef long cap = 1024, m = 0
    cdef cnp.ndarray[cnp.float64_t, ndim=2] buf = np.empty((cap, 6))
    cdef double x = x0, y = y0, p = p0, s = s0, h = h0
    cdef double k1y, k2y, k3y, k4y, k5y, k6y, k7y
    cdef double k1p, k2p, k3p, k4p, k5p, k6p, k7p
    cdef double yt, pt, yn, pn, ey, ep, sy, sp, err, fac, facold = 1e-4
    cdef double yq, pq, th, th1, quad, arc, r4y, r4p, r5y, r5p, dy, dp, bsy, bsp
    cdef double hmin, resid
    cdef int q
    cdef int status = 0, reject = 0
    cdef long nsteps = 0
    cdef double expo1 = 0.2 - 0.04 * 0.75, beta = 0.04

    k1y = p
    k1p = _accel(family, y, p, x, n)
    buf[0, 0] = x; buf[0, 1] = y; buf[0, 2] = p; buf[0, 3] = s
    buf[0, 4] = k1p; buf[0, 5] = 0.0
    m = 1
    while x < x_end:
        if nsteps >= max_steps:
            status = 4
            break
        hmin = 1e-14 * fmax(1.0, fabs(x))
        if h < hmin:
            status = 3
            break
        if x + 1.01 * h >= x_end:
            h = x_end - x
        nsteps += 1
        yt = y + h * A21 * k1y
        pt = p + h * A21 * k1p
        k2y = pt; k2p = _accel(family, yt, pt, x + C2 * h, n)
        yt = y + h * (A31 * k1y + A32 * k2y)
        pt = p + h * (A31 * k1p + A32 * k2p)
        k3y = pt; k3p = _accel(family, yt, pt, x + C3 * h, n)
        yt = y + h * (A41 * k1y + A42 * k2y + A43 * k3y)
        pt = p + h * (A41 * k1p + A42 * k2p + A43 * k3p)
        k4y = pt; k4p = _accel(family, yt, pt, x + C4 * h, n)
        yt = y + h * (A51 * k1y + A52 * k2y + A53 * k3y + A54 * k4y)
        pt = p + h * (A51 * k1p + A52 * k2p + A53 * k3p + A54 * k4p)
        k5y = pt; k5p = _accel(family, yt, pt, x + C5 * h, n)
        yt = y + h * (A61 * k1y + A62 * k2y + A63 * k3y + A64 * k4y + A65 * k5y)
        pt = p + h * (A61 * k1p + A62 * k2p + A63 * k3p + A64 * k4p + A65 * k5p)
        k6y = pt; k6p = _accel(family, yt, pt, x + h, n)
        yn = y + h * (B1 * k1y + B3 * k3y + B4 * k4y + B5 * k5y + B6 * k6y)
        pn = p + h * (B1 * k1p + B3 * k3p + B4 * k4p + B5 * k5p + B6 * k6p)
        k7y = pn; k7p = _accel(family, yn, pn, x + h, n)
        ey = h * (E1 * k1y + E3 * k3y + E4 * k4y + E5 * k5y + E6 * k6y + E7 * k7y)
        ep = h * (E1 * k1p + E3 * k3p + E4 * k4p + E5 * k5p + E6 * k6p + E7 * k7p)
        sy = tol + tol * fmax(fabs(y), fabs(yn))
        sp = tol + tol * fmax(fabs(p), fabs(pn))
        err = sqrt(0.5 * ((ey / sy) * (ey / sy) + (ep / sp) * (ep / sp)))
        if err != err:
            err = 1e10
        fac = pow(err, expo1) / pow(facold, beta)
        fac = fmax(0.1, fmin(5.0, fac / 0.9))
        if err > 1.0:
            h = h / fmin(5.0, pow(err, expo1) / 0.9)
            reject = 1
            continue
        # Gauss defect and arc length from the dense output
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
        for q in range(3):
            th = GTH[q]
            th1 = 1.0 - th
            yq = y + th * (dy + th1 * (bsy + th * (r4y + th1 * r5y)))
            pq = p + th * (dp + th1 * (bsp + th * (r4p + th1 * r5p)))
            quad = quad + GW[q] * _accel(family, yq, pq, x + th * h, n)
            arc = arc + GW[q] * sqrt(1.0 + pq * pq)
        resid = fabs(dp - h * quad)
        s = s + h * arc
        x = x + h
        y = yn
        p = pn
        k1y = k7y
        k1p = k7p
        facold = fmax(err, 1e-4)
        if m >= cap:
            cap = 2 * cap
            buf = np.resize(buf, (cap, 6))
        buf[m, 0] = x; buf[m, 1] = y; buf[m, 2] = p; buf[m, 3] = s
        buf[m, 4] = k7p; buf[m, 5] = resid
        m += 1
        if y < floor:
            status = 1
            break
        if fabs(p) > ceiling:
            status = 2
            break
        if reject:
            h = h / fmax(fac, 1.0)
            reject = 0
        else:
            h = h / fac
    out = buf[:m].copy()
    return out[:, 0], out[:, 1], out[:, 2], out[:, 3], out[:, 4], out[:, 5], status, h


def sturm_count(double[::1] d, double[::1] e2, double sigma):
    """Number of eigenvalues of the symmetric tridiagonal (d, e) below sigma."""
    cdef Py_ssize_t i, N = d.shape[0]
    cdef long count = 0
    cdef double q = d[0] - sigma
    if q < 0.0:
        count += 1
    for i in range(1, N):
        if q == 0.0:
            q = 1e-300
        q = d[i] - sigma - e2[i - 1] / q
        if q < 0.0:
            count += 1
    return count


def thomas(double[::1] lower, double[::1] diag, double[::1] upper, double[::1] rhs):
    """Solve a tridiagonal system; lower[0] and upper[-1] are ignored."""
    cdef Py_ssize_t i, N = diag.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cp = np.empty(N)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.empty(N)
    cdef double denom
    denom = diag[0]
    if denom == 0.0:
        denom = 1e-300
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


def flow_step(double[::1] v, double[::1] rho, double dt, double n, int rescaled,
              double v_right):
    """One semi-implicit step of the radial flow on a uniform axial grid.

    Neumann at rho[0], Dirichlet ``v_right`` at rho[-1].  The second-derivative
    term is implicit with its coefficient frozen at the old state; the
    rotational and (rescaled gauge) drift terms are explicit.
    """
    cdef Py_ssize_t i, N = v.shape[0]
    cdef double h = rho[1] - rho[0]
    cdef double ih2 = 1.0 / (h * h)
    cdef double vr, coef, g
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lo = np.zeros(N)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] di = np.zeros(N)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] up = np.zeros(N)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.zeros(N)
    for i in range(N - 1):
        if i == 0:
            vr = 0.0
        else:
            vr = 0.5 * (v[i + 1] - v[i - 1]) / h
        coef = 1.0 / (1.0 + vr * vr)
        g = -(n - 1.0) / v[i]
        if rescaled:
            g = g + 0.5 * (rho[i] * vr - v[i])
        b[i] = v[i] + dt * g
        if i == 0:
            di[i] = 1.0 + 2.0 * dt * coef * ih2
            up[i] = -2.0 * dt * coef * ih2
        else:
            lo[i] = -dt * coef * ih2
            di[i] = 1.0 + 2.0 * dt * coef * ih2
            up[i] = -dt * coef * ih2
    di[N - 1] = 1.0
    b[N - 1] = v_right
    return thomas(lo, di, up, b)
