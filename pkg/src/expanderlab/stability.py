"""Stability operator of rotationally symmetric expanders.

For a rotationally invariant function ``phi(s)`` on the profile curve,
parametrized by arc length ``s``, the stability operator reads

    L phi = w^{-1} (w phi')' + (|A|^2 - 1/2) phi,   w = exp(|X|^2/4) R^{n-1},

with ``R`` the distance to the rotation axis.  It is discretized by finite
volumes on a cell-centered uniform grid in ``s`` (zero flux at ``s = 0``,
zero value at the truncation) and symmetrized with the weights, which turns
``-L`` into a standard symmetric tridiagonal matrix.
"""
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BPoly, CubicSpline

from . import _backend
from .entropy import sphere_volume
from .errors import ConvergenceError, FoldOverError, PreconditionError
from .profiles import (Profile, ProfileFamily, integrate_profile, mean_curvature,
                       support_function)


class ProfileCurve:
    """Smooth evaluation of a profile's geometry at arbitrary arc length.

    Quintic Hermite interpolation of the unknown (value, first and second
    derivative at every node) and of the arc length, inverted by Newton.
    """

    def __init__(self, profile):
        g, p, ypp = profile.grid, profile.du, profile.ddu
        w = np.sqrt(1.0 + p * p)
        self.profile = profile
        self.u_poly = BPoly.from_derivatives(g, np.column_stack([profile.u, p, ypp]))
        self.s_poly = BPoly.from_derivatives(
            g, np.column_stack([profile.arclength, w, p * ypp / w]))
        self.u_d1 = self.u_poly.derivative(1)
        self.u_d2 = self.u_poly.derivative(2)
        self.s_d1 = self.s_poly.derivative(1)
        self.length = float(profile.arclength[-1])

    def param_at(self, s):
        """Independent coordinate of the nodes with arc length ``s``."""
        s = np.asarray(s, dtype=float)
        g = np.interp(s, self.profile.arclength, self.profile.grid)
        for _ in range(50):
            step = (self.s_poly(g) - s) / self.s_d1(g)
            g = np.clip(g - step, self.profile.grid[0], self.profile.grid[-1])
            if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(g))):
                break
        return g

    def geometry(self, s):
        """Dictionary of geometric quantities at arc lengths ``s``."""
        prof = self.profile
        g = self.param_at(s)
        u, p, ypp = self.u_poly(g), self.u_d1(g), self.u_d2(g)
        w = np.sqrt(1.0 + p * p)
        k1 = ypp / w ** 3
        if prof.graph_form:
            radial, axial = g, u
            safe = np.where(g > 0, g, 1.0)
            k2 = np.where(g > 0, p / (safe * w), ypp)
        else:
            radial, axial = u, g
            k2 = 1.0 / (u * w)
        return {"param": g, "u": u, "du": p, "ddu": ypp, "axial": axial, "radial": radial,
                "x2": axial ** 2 + radial ** 2, "A2": k1 * k1 + (prof.n - 1) * k2 * k2}


@dataclass
class Pencil:
    """Symmetrized discrete eigenproblem for ``-L``.

    ``diag``/``off`` define the symmetric tridiagonal ``A = M^{-1/2} K M^{-1/2}``,
    ``log_mass`` the log of the diagonal mass ``M = w h``, ``potential`` the
    nodal ``|A|^2 - 1/2``.
    """

    profile: Profile
    s: np.ndarray
    h: float
    truncation: float
    diag: np.ndarray
    off: np.ndarray
    log_mass: np.ndarray
    potential: np.ndarray
    geometry: dict

    @property
    def size(self):
        return self.s.size

    def matrix(self):
        """Dense copy of the symmetric matrix (tests and small problems)."""
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def apply_operator(self, phi):
        """Discrete ``L phi`` in the unsymmetrized variables."""
        scale = np.exp(0.5 * (self.log_mass - self.log_mass.max()))
        psi = scale * phi
        a_psi = self.diag * psi
        a_psi[:-1] += self.off * psi[1:]
        a_psi[1:] += self.off * psi[:-1]
        return -a_psi / scale


def _log_weight(geo, n):
    return 0.25 * geo["x2"] + (n - 1) * np.log(geo["radial"])


def analysis_profile(family, a, n, truncation=16.0, r_min=8.0, tol=1e-10):
    """Integrate a profile long enough (in arc length) for a truncated eigenproblem."""
    R = float(r_min)
    prof = integrate_profile(family, a, n, R, tol)
    while prof.arclength[-1] < truncation:
        R *= 2.0
        prof = integrate_profile(family, a, n, R, tol)
    return prof


def assemble_operator(profile, truncation=16.0, cells=800):
    """Build the symmetric tridiagonal discretization of ``-L`` on ``[0, truncation]``.

    Parameters
    ----------
    profile : Profile
        Must extend to arc length ``truncation``.
    truncation : float
        Arc length of the Dirichlet end.
    cells : int
        Number of uniform cells.
    """
    if profile.arclength[-1] < truncation:
        raise PreconditionError(
            f"profile arc length {profile.arclength[-1]:.4g} is shorter than the truncation"
            f" {truncation:.4g}")
    curve = ProfileCurve(profile)
    n = profile.n
    h = truncation / cells
    s = (np.arange(cells) + 0.5) * h
    faces = np.arange(1, cells + 1) * h
    geo = curve.geometry(s)
    lw = _log_weight(geo, n)
    lw_face = _log_weight(curve.geometry(faces), n)
    pot = geo["A2"] - 0.5
    # flux through face i+1/2 relative to the two neighbouring cells
    right = np.exp(lw_face[:-1] - lw[:-1]) / (h * h)
    left = np.exp(lw_face[:-1] - lw[1:]) / (h * h)
    last = np.exp(lw_face[-1] - lw[-1]) / (h * h)
    diag = -pot.copy()
    diag[:-1] += right
    diag[1:] += left
    # Dirichlet value at the truncation face through a mirrored ghost cell
    diag[-1] += 2.0 * last
    off = -np.exp(lw_face[:-1] - 0.5 * (lw[:-1] + lw[1:])) / (h * h)
    return Pencil(profile, s, h, truncation, diag, off, lw + math.log(h), pot, geo)


@dataclass
class EigenResult:
    mu1: float
    f: np.ndarray
    norm: float
    grid: np.ndarray
    truncation: float
    rayleigh: float = float("nan")
    pencil: Pencil = None

    def to_dict(self, envelope_c=None):
        return {"mu1": float(self.mu1), "norm": float(self.norm),
                "truncation": float(self.truncation), "envelope_C": envelope_c,
                "rayleigh": float(self.rayleigh), "cells": int(self.grid.size)}

    def to_csv(self):
        geo = self.pencil.geometry
        lines = ["s,r,u,f"]
        for row in zip(self.grid, geo["param"], geo["u"], self.f):
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def _gershgorin(diag, off):
    rad = np.zeros_like(diag)
    rad[:-1] += np.abs(off)
    rad[1:] += np.abs(off)
    return float(np.min(diag - rad)), float(np.max(diag + rad))


def lowest_eigenvalue(diag, off, rel_tol=1e-14):
    """Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection."""
    d = np.ascontiguousarray(diag, dtype=float)
    e2 = np.ascontiguousarray(off * off, dtype=float)
    lo, hi = _gershgorin(d, off)
    while hi - lo > rel_tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if _backend.sturm_count(d, e2, mid) >= 1:
            hi = mid
        else:
            lo = mid
        if mid == lo and mid == hi:
            break
    return 0.5 * (lo + hi)


def inverse_iteration(diag, off, shift, iterations=6, tol=1e-13):
    """Eigenvector for the eigenvalue nearest ``shift``."""
    N = diag.size
    lower = np.concatenate([[0.0], off])
    upper = np.concatenate([off, [0.0]])
    shifted = np.ascontiguousarray(diag - shift)
    x = np.ones(N) / math.sqrt(N)
    for _ in range(iterations):
        y = _backend.thomas(lower, shifted, upper, x)
        y = y / np.linalg.norm(y)
        if y @ x < 0:
            y = -y
        done = np.linalg.norm(y - x) < tol
        x = y
        if done:
            return x
    resid = diag * x
    resid[:-1] += off * x[1:]
    resid[1:] += off * x[:-1]
    lam = x @ resid
    if np.linalg.norm(resid - lam * x) > 1e-8 * (1.0 + abs(lam)):
        raise ConvergenceError("inverse iteration did not converge")
    return x


def _rayleigh(diag, off, x):
    ax = diag * x
    ax[:-1] += off * x[1:]
    ax[1:] += off * x[:-1]
    return float(x @ ax / (x @ x))


def lowest_eigenpair(pencil):
    """Lowest eigenvalue ``mu1`` of ``-L`` and its positive, unit-norm eigenfunction.

    The norm is ``sigma_{n-1} sum_i f_i^2 w_i h`` over the computed sheet.
    """
    lam = lowest_eigenvalue(pencil.diag, pencil.off)
    # stay a hair below the eigenvalue so the shifted matrix is never singular
    shift = lam - 1e-10 * (1.0 + abs(lam))
    psi = inverse_iteration(pencil.diag, pencil.off, shift)
    if psi.sum() < 0:
        psi = -psi
    mu = _rayleigh(pencil.diag, pencil.off, psi)
    inner = psi[np.abs(psi) > 1e-12 * np.abs(psi).max()]
    if np.any(inner < 0):
        raise ConvergenceError("lowest eigenvector changes sign")
    lm = pencil.log_mass
    shift_log = lm.max()
    f = psi * np.exp(-0.5 * (lm - shift_log))
    sig = sphere_volume(pencil.profile.n - 1)
    norm2 = sig * np.sum(f * f * np.exp(lm - shift_log))
    f = f / math.sqrt(norm2) * math.exp(-0.5 * shift_log)
    norm = math.sqrt(sig * np.sum(f * f * np.exp(lm)))
    return EigenResult(lam, f, norm, pencil.s, pencil.truncation, mu, pencil)


def envelope(x2, n, mu1):
    """(1+|x|^2)^{-(n+1-2 mu1)/2} exp(-|x|^2/4)."""
    return (1.0 + x2) ** (-(n + 1 - 2.0 * mu1) / 2.0) * np.exp(-0.25 * x2)


@dataclass
class EnvelopeFit:
    passed: bool
    C: float
    window: tuple


def decay_envelope_check(res, profile=None, cap=1e9, inner=1.0, outer_fraction=0.8):
    """Fit the smallest ``C >= 1`` with ``C^-1 env <= f <= C env`` on the window.

    The window is ``inner <= |x| <= outer_fraction * |x(truncation)|``.
    """
    if not res.mu1 < 0:
        raise PreconditionError("the envelope estimate applies only when mu1 < 0")
    geo = res.pencil.geometry
    n = res.pencil.profile.n if profile is None else profile.n
    r = np.sqrt(geo["x2"])
    r_end = math.sqrt(float(geo["x2"][-1]))
    mask = (r >= inner) & (r <= outer_fraction * r_end)
    if not mask.any():
        raise PreconditionError("envelope window is empty")
    ratio = res.f[mask] / envelope(geo["x2"][mask], n, res.mu1)
    if np.any(ratio <= 0):
        return EnvelopeFit(False, float("inf"), (inner, outer_fraction * r_end))
    C = max(1.0, float(ratio.max()), float(1.0 / ratio.min()))
    return EnvelopeFit(C < cap, C, (inner, outer_fraction * r_end))


@dataclass
class EnvelopeStudy:
    truncations: list
    constants: list
    mu1: list
    stable: bool


def envelope_truncation_study(profile, truncations=(16.0, 20.0, 24.0), cells_per_unit=100,
                              cap=1e9, max_growth=1.5):
    """Envelope constant at growing truncations.

    ``C`` approaches its limit slowly (relative corrections of order
    ``beta^2/|x|^2``), so stability means: every fit passes, each step
    changes ``C`` by less than the factor ``max_growth`` and the increments
    shrink.  A tail without the Gaussian factor grows like ``exp(|x|^2/4)``
    between truncations and fails at once.
    """
    Cs, mus = [], []
    ok = True
    for T in truncations:
        res = lowest_eigenpair(assemble_operator(profile, T, int(round(cells_per_unit * T))))
        fit = decay_envelope_check(res, profile, cap)
        ok &= fit.passed
        Cs.append(fit.C)
        mus.append(res.mu1)
    steps = np.diff(Cs)
    ratios = [b / a for a, b in zip(Cs, Cs[1:])]
    ok &= all(max(r, 1.0 / r) < max_growth for r in ratios)
    ok &= bool(np.all(np.abs(steps[1:]) <= np.abs(steps[:-1])))
    return EnvelopeStudy(list(truncations), Cs, mus, bool(ok))


def eigenfunction_spline(res):
    """Even extension of the eigenfunction in ``s``, zero past the truncation."""
    s, f = res.grid, res.f
    knots = np.concatenate([-s[::-1], s, [res.truncation]])
    vals = np.concatenate([f[::-1], f, [0.0]])
    spline = CubicSpline(knots, vals)

    def value(x, nu=0):
        x = np.asarray(x, dtype=float)
        out = spline(np.minimum(x, res.truncation), nu)
        return np.where(x <= res.truncation, out, 0.0)

    return value


@dataclass(frozen=True)
class PerturbationSpec:
    epsilon: float
    c: float
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise PreconditionError("beta must be positive")


def perturb_profile(profile, f, epsilon):
    """Push every node by ``epsilon * f * nu`` along the unit normal.

    ``f`` is an :class:`EigenResult` or a callable ``f(s, nu)`` of arc length.
    Nodes stay material (same parameter order); the perturbed curve must
    remain a graph over the profile's independent coordinate.
    """
    if isinstance(f, EigenResult):
        f = eigenfunction_spline(f)
    if epsilon == 0:
        return Profile(profile.family, profile.n, profile.a, profile.grid.copy(),
                       profile.u.copy(), profile.du.copy(), profile.residual_sup,
                       profile.r_max, ddu=profile.ddu.copy(),
                       arclength=profile.arclength.copy(), residual=profile.residual.copy(),
                       tol=profile.tol, h_last=profile.h_last)
    g, u, p, ypp = profile.grid, profile.u, profile.du, profile.ddu
    w = np.sqrt(1.0 + p * p)
    F = f(profile.arclength)
    dF_ds = f(profile.arclength, 1)
    # derivatives with respect to the old independent coordinate
    d_axial = dF_ds * p + F * ypp / w ** 3
    d_normal = dF_ds - F * p * ypp / w ** 3
    g_new = g - epsilon * F * p / w
    u_new = u + epsilon * F / w
    jac = 1.0 - epsilon * d_axial
    if np.any(jac <= 0) or np.any(np.diff(g_new) <= 0):
        raise FoldOverError(f"epsilon={epsilon:g} folds the perturbed curve over")
    q = (d_normal + p * d_axial) / jac
    du_new = p + epsilon * q
    ddu_new = (ypp + epsilon * np.gradient(q, g)) / jac
    return Profile(profile.family, profile.n, profile.a, g_new, u_new, du_new,
                   float("nan"), float(g_new[-1]), ddu=ddu_new,
                   residual=np.full_like(g, np.nan), tol=profile.tol)


def expander_mean_curvature(profile, t=1.0, orientation=1.0):
    """``E = 2 t H + <x, nu>`` at each node.

    ``orientation = -1`` flips the normal (and so the sign of ``E``).
    Exact expanders have ``E = 0`` at ``t = 1``.
    """
    if not t >= 1.0:
        raise PreconditionError("time must be >= 1")
    return orientation * (2.0 * t * mean_curvature(profile) + support_function(profile))


def g_beta(x, beta):
    """Auxiliary barrier ``x^-beta exp(-beta x)``."""
    x = np.asarray(x, dtype=float)
    return x ** (-beta) * np.exp(-beta * x)


def convexity_certificate(profile, perturbed, mu1, epsilon, t=1.0, window=None,
                          noise_factor=1e3):
    """Fit ``c = min E / g_beta(1+|x|^2)`` with ``beta = (n+1-2 mu1)/2``.

    The normal is oriented against the push so a successful certificate has
    ``c > 0`` for either sign of ``epsilon``.  Far out the perturbation is
    smaller than the residual of ``E`` on the unperturbed profile and its
    sign is noise; by default the fit stops at the first node (in |x|)
    where ``|E|`` falls below ``noise_factor`` times that residual.

    Returns
    -------
    spec : PerturbationSpec
    E : ndarray
        Oriented expander mean curvature of the perturbed profile.
    window : float
        Largest |x| used in the fit.
    """
    beta = (profile.n + 1 - 2.0 * mu1) / 2.0
    E = expander_mean_curvature(perturbed, t, orientation=-math.copysign(1.0, epsilon))
    x2 = perturbed.positions_squared()
    if window is None:
        floor = noise_factor * float(np.max(np.abs(expander_mean_curvature(profile, t))))
        order = np.argsort(x2)
        low = np.nonzero(np.abs(E[order]) <= floor)[0]
        cut = order[low[0] - 1] if low.size and low[0] > 0 else order[-1]
        window = math.sqrt(float(x2[cut]))
    mask = x2 <= window ** 2
    E_in, y = E[mask], 1.0 + x2[mask]
    if np.all(E_in > 0):
        # g_beta underflows long before E does; compare logarithms
        c = math.exp(float(np.min(np.log(E_in) + beta * np.log(y) + beta * y)))
    else:
        neg = E_in <= 0
        with np.errstate(over="ignore", invalid="ignore"):
            c = float(np.min(E_in[neg] * y[neg] ** beta * np.exp(beta * y[neg])))
    return PerturbationSpec(epsilon, c, beta), E, window


def eigen_report_json(res, envelope_c=None):
    return json.dumps(res.to_dict(envelope_c), sort_keys=True, indent=2) + "\n"


def family_is_reflected(family):
    """Families whose computed sheet has a reflecting (Neumann) start."""
    return ProfileFamily.parse(family) in (ProfileFamily.ConnectedSymmetric,
                                           ProfileFamily.TripleJunction)
