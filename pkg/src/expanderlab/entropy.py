"""Gaussian surface area and entropy of rotationally symmetric double cones.

A point of the cone is written ``(x1, rho * omega)`` with ``omega`` on the unit
sphere of the cross-section; the Gaussian center is ``(t, d e)`` for a unit
vector ``e``.  Integrating out ``omega`` leaves the angular kernel
``K_n(c) = int_{S^{n-1}} exp(c omega.e) d omega`` with ``c = rho d / 2``,
which is evaluated with its exponential growth factored out.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, PreconditionError
from .profiles import ConeSpec
from .quadrature import gauss_kronrod, gauss_legendre_unit

# integrand cut-off relative to its peak
TAIL_RATIO = 1e-18
_TAIL_LOG = -math.log(TAIL_RATIO)


def sphere_volume(p):
    """Volume of the unit p-sphere in R^{p+1}."""
    if int(p) != p or p < 0:
        raise PreconditionError("sphere dimension must be a non-negative integer")
    return 2.0 * math.pi ** ((p + 1) / 2.0) / math.gamma((p + 1) / 2.0)


@dataclass(frozen=True)
class GaussianCenter:
    """Center ``(t, d)``: axial offset and distance from the axis."""

    t: float
    d: float = 0.0

    def __post_init__(self):
        if not self.d >= 0:
            raise PreconditionError("radial offset of a Gaussian center must be >= 0")


@dataclass(frozen=True)
class QuadOptions:
    rel_tol: float = 1e-13
    abs_tol: float = 1e-17
    kernel_nodes: int = 64
    kernel_tol: float = 1e-13
    max_kernel_nodes: int = 4096


def scaled_angular_kernel(n, c, nodes=64, tol=1e-13, max_nodes=4096):
    """``exp(-c) K_n(c)`` for an array of ``c >= 0``.

    ``K_n(c) = sigma_{n-2} int_0^pi exp(c cos th) sin^{n-2} th dth``.  The
    polar integral runs only where ``exp(-c (1 - cos th))`` is above the tail
    ratio and uses Gauss-Legendre with node doubling until two successive
    rules agree.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    with np.errstate(divide="ignore"):
        reach = np.where(c > 0, _TAIL_LOG / np.where(c > 0, c, 1.0), np.inf)
    th_max = np.where(reach >= 2.0, math.pi, np.arccos(1.0 - np.minimum(reach, 2.0)))
    sig = sphere_volume(n - 2)
    prev = None
    count = nodes
    while True:
        x, w = gauss_legendre_unit(count)
        th = th_max[:, None] * x[None, :]
        vals = np.exp(-c[:, None] * (1.0 - np.cos(th)))
        if n > 2:
            vals = vals * np.sin(th) ** (n - 2)
        cur = sig * th_max * (vals @ w)
        if prev is not None and np.all(np.abs(cur - prev) <= tol * np.abs(cur)):
            return cur
        if 2 * count > max_nodes:
            raise ConvergenceError("angular kernel quadrature did not converge")
        prev = cur
        count *= 2


def angular_kernel(n, c, **kw):
    """``K_n(c)``; overflows for very large ``c``, prefer the scaled form."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return np.exp(c) * scaled_angular_kernel(n, c, **kw)


def _nappe_area(n, slope, sign, t, d, scale, q):
    """Gaussian area of one nappe ``x1 = sign * slope * rho``."""
    s2 = scale * scale
    a = 1.0 + slope * slope
    b = sign * slope * t + d
    # the exponent is -(a rho^2 - 2 b rho + t^2 + d^2) / (4 s^2); peak of the
    # Gaussian part at b/a, widened by the rho^{n-1} factor
    peak = max(b / a, 0.0)
    width = math.sqrt(4.0 * s2 * (_TAIL_LOG + 2.0 * (n - 1) * math.log(2.0 + peak / scale)) / a)
    rho_cut = peak + width + 2.0 * math.sqrt(2.0 * (n - 1) * s2 / a)

    def integrand(rho):
        e = ((sign * slope * rho - t) ** 2 + (rho - d) ** 2) / (4.0 * s2)
        k = scaled_angular_kernel(n, rho * d / (2.0 * s2), q.kernel_nodes, q.kernel_tol,
                                  q.max_kernel_nodes)
        return rho ** (n - 1) * np.exp(-e) * k

    val, err = gauss_kronrod(integrand, 0.0, rho_cut, rel_tol=q.rel_tol,
                             abs_tol=q.abs_tol)
    pref = (4.0 * math.pi * s2) ** (-n / 2.0) * math.sqrt(a)
    return pref * val, pref * err


def gaussian_area_cone(cone, center, quad=QuadOptions(), scale=1.0):
    """Gaussian surface area of ``cone`` centered at ``center``.

    With ``scale != 1`` the Gaussian has variance ``2 scale^2``; by dilation
    invariance ``F(scale, x0) = F(1, x0/scale)``, which the tests exploit.

    Returns
    -------
    F, quad_error : float
    """
    if not isinstance(center, GaussianCenter):
        center = GaussianCenter(*center)
    if not scale > 0:
        raise PreconditionError("scale must be positive")
    total, err = 0.0, 0.0
    for slope, sign in ((cone.m_plus, 1.0), (cone.m_minus, -1.0)):
        v, e = _nappe_area(cone.n, slope, sign, center.t, center.d, scale, quad)
        total += v
        err += e
    # kernel rule error is far below the panel estimate; count it once
    return total, err + 1e-15 * total


def centered_area_closed_form(cone):
    """Gaussian area at the origin: sum over nappes of (1+m^2)^{-(n-1)/2}."""
    return sum((1.0 + m * m) ** (-(cone.n - 1) / 2.0) for m in (cone.m_plus, cone.m_minus))


@dataclass
class EntropyReport:
    cone: ConeSpec
    lambda_: float
    argmax: GaussianCenter
    f_at_origin: float
    quad_error: float
    opt_error: float
    starts: list = field(default_factory=list)

    def to_dict(self):
        return {"n": int(self.cone.n), "m_plus": float(self.cone.m_plus),
                "m_minus": float(self.cone.m_minus), "lambda": float(self.lambda_),
                "argmax": {"t": float(self.argmax.t), "d": float(self.argmax.d)},
                "f_at_origin": float(self.f_at_origin), "quad_error": float(self.quad_error),
                "opt_error": float(self.opt_error)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class SearchOptions:
    grid_t: int = 41
    grid_d: int = 13
    xatol: float = 1e-9
    fatol: float = 1e-14
    max_iter: int = 4000


def _seeds(cone):
    n = cone.n
    reach = math.sqrt(2.0 * n)
    seeds = [(0.0, 0.0),
             (reach * max(1.0, cone.m_plus), 0.0),
             (-reach * max(1.0, cone.m_minus), 0.0)]
    # off-axis seed on the upper nappe, far enough to see an almost flat sheet
    far = 4.0 * reach
    seeds.append((cone.m_plus * far / math.hypot(1.0, cone.m_plus),
                  far / math.hypot(1.0, cone.m_plus)))
    return seeds


def entropy_cone(cone, search=SearchOptions(), quad=QuadOptions()):
    """Entropy of a double cone: the largest Gaussian area over all centers.

    Scales are not searched since the cone is dilation invariant.  A coarse
    grid over ``(t, d >= 0)`` plus fixed seeds feed Nelder-Mead refinements;
    the best refined value wins.
    """
    def area(t, d):
        return gaussian_area_cone(cone, GaussianCenter(t, abs(d)), quad)

    f0, e0 = area(0.0, 0.0)
    reach = math.sqrt(2.0 * cone.n) * max(1.0, cone.m_plus, cone.m_minus)
    ts = np.linspace(-1.5 * reach, 1.5 * reach, search.grid_t)
    ds = np.linspace(0.0, 1.5 * math.sqrt(2.0 * cone.n) * max(1.0, 1.0 / cone.m_plus,
                                                              1.0 / cone.m_minus),
                     search.grid_d)
    grid = [(area(t, d)[0], t, d) for t in ts for d in ds]
    grid.sort(key=lambda g: -g[0])
    starts = _seeds(cone) + [(t, d) for _, t, d in grid[:3]]

    best = None
    trials = []
    for t0, d0 in starts:
        res = minimize(lambda z: -area(z[0], z[1])[0], np.array([t0, d0]),
                       method="Nelder-Mead",
                       options={"xatol": search.xatol, "fatol": search.fatol,
                                "maxiter": search.max_iter, "maxfev": 2 * search.max_iter})
        val = -float(res.fun)
        spread = float(np.ptp(res.final_simplex[1]))
        trials.append({"start": (float(t0), float(d0)), "value": val,
                       "t": float(res.x[0]), "d": float(abs(res.x[1])),
                       "converged": bool(res.success)})
        if best is None or val > best[0]:
            best = (val, float(res.x[0]), float(abs(res.x[1])), spread, bool(res.success))
    val, t, d, spread, ok = best
    if not ok:
        raise ConvergenceError("entropy optimizer stagnated")
    f_best, q_err = area(t, d)
    return EntropyReport(cone, f_best, GaussianCenter(t, d), f0, max(q_err, e0),
                         max(spread, search.fatol), trials)


def entropy_scan(n, slopes_plus, slopes_minus, search=SearchOptions(), quad=QuadOptions()):
    """Entropy over a grid of two-slope cones; rows ``(m+, m-, lambda, t, d, err)``."""
    rows = []
    for mp in slopes_plus:
        for mm in slopes_minus:
            rep = entropy_cone(ConeSpec(n, float(mp), float(mm)), search, quad)
            rows.append((float(mp), float(mm), rep.lambda_, rep.argmax.t, rep.argmax.d,
                         rep.quad_error + rep.opt_error))
    return rows


def scan_to_csv(rows):
    lines = ["m_plus,m_minus,lambda,t,d,err"]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


SIMONS_PROSE_VALUE = "3/2"


@dataclass
class SimonsDensity:
    n: int
    p: int
    theta: float
    sigma_p: float
    sigma_np: float
    sigma_n: float
    note: str = None

    def to_dict(self):
        doc = {"n": self.n, "p": self.p, "theta": self.theta, "sigma_p": self.sigma_p,
               "sigma_np": self.sigma_np, "sigma_n": self.sigma_n}
        if self.note is not None:
            doc["paper_discrepancy"] = self.note
        return doc

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _check_np(n, p):
    if int(n) != n or n < 2:
        raise PreconditionError("n must be an integer >= 2")
    if int(p) != p or not 1 <= p <= n - 1:
        raise PreconditionError("p must be an integer with 1 <= p <= n - 1")


def simons_density(n, p):
    """Gaussian density at the vertex of the cone over S^p(sqrt(p/n)) x S^{n-p}(sqrt((n-p)/n))."""
    _check_np(n, p)
    sp, snp, sn = sphere_volume(p), sphere_volume(n - p), sphere_volume(n)
    theta = sp * snp / sn * (p / n) ** (p / 2.0) * ((n - p) / n) ** ((n - p) / 2.0)
    note = None
    if (n, p) == (2, 1):
        note = (f"a published value of {SIMONS_PROSE_VALUE} for (n, p) = (2, 1) "
                f"disagrees with the closed form pi/2 = {theta!r}; the closed form is reported")
    return SimonsDensity(int(n), int(p), theta, sp, snp, sn, note)


def simons_density_numeric(n, p, quad=QuadOptions()):
    """The same density from the link volume and a radial Gaussian quadrature."""
    _check_np(n, p)
    link = sphere_volume(p) * (p / n) ** (p / 2.0) * sphere_volume(n - p) * \
        ((n - p) / n) ** ((n - p) / 2.0)
    cut = 2.0 * math.sqrt(_TAIL_LOG + n * math.log(2.0 + n)) + 2.0 * math.sqrt(2.0 * n)
    radial, _ = gauss_kronrod(lambda r: r ** n * np.exp(-r * r / 4.0), 0.0, cut,
                              rel_tol=quad.rel_tol)
    return (4.0 * math.pi) ** (-(n + 1) / 2.0) * link * radial


def reference_entropy(kind, k=1):
    """Entropy of the hyperplane, the round k-sphere, or a cylinder S^k x R^l."""
    kind = str(kind).lower()
    if kind == "hyperplane":
        return 1.0
    if int(k) != k or k < 1:
        raise PreconditionError("k must be an integer >= 1")
    if kind in ("sphere", "cylinder"):
        return sphere_volume(k) * (k / (2.0 * math.pi * math.e)) ** (k / 2.0)
    raise PreconditionError(f"unknown reference kind {kind!r}")
