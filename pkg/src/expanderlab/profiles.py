"""Rotationally symmetric expander profiles.

Two parametrizations of the profile curve in the (axial, radial) half-plane
are used:

* radial form: the radius ``u`` as a function of the axial coordinate ``r``
  (triple-junction and connected families);
* graph form: the axial height ``f`` as a function of the radius ``rho``
  (graphs over the hyperplane through the origin).

Both are integrated by the adaptive Dormand-Prince kernel in ``_backend``.
"""
import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import IntegrationEvent, PreconditionError, TailNotSettled

GUARD_FLOOR_FACTOR = 1e-8
BLOW_UP_CEILING = 1e8
MAX_STEPS = 20_000_000

_EVENT_KINDS = {1: "guard_floor", 2: "blow_up", 3: "step_underflow", 4: "max_steps"}


class ProfileFamily(enum.Enum):
    """Which initial-value problem a profile solves."""

    TripleJunction = "TripleJunction"
    ConnectedSymmetric = "ConnectedSymmetric"
    GraphOverPlane = "GraphOverPlane"

    @property
    def tag(self):
        return self.value

    @property
    def kernel_code(self):
        return 1 if self is ProfileFamily.GraphOverPlane else 0

    @property
    def initial_slope(self):
        """Derivative of the unknown at the start of integration."""
        if self is ProfileFamily.TripleJunction:
            return math.sqrt(3.0) / 3.0
        return 0.0

    @classmethod
    def parse(cls, name):
        """Accept enum values, tags or short CLI names (triple/connected/graph)."""
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        for fam in cls:
            if key == fam.value.lower():
                return fam
        short = {"triple": cls.TripleJunction, "connected": cls.ConnectedSymmetric,
                 "graph": cls.GraphOverPlane}
        if key in short:
            return short[key]
        raise ValueError(f"unknown profile family {name!r}")


@dataclass(frozen=True)
class ConeSpec:
    """Double cone {x1 = m_plus |y|} U {x1 = -m_minus |y|} in R^{n+1}.

    Slopes are axial over radial.  A radial-form profile with u/r -> M is
    asymptotic to the cone with ``m_plus = 1/M``.
    """

    n: int
    m_plus: float
    m_minus: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise PreconditionError(f"cone dimension must be an integer >= 2, got {self.n}")
        if not (self.m_plus > 0 and self.m_minus > 0):
            raise PreconditionError("cone slopes must be positive")
        if not (math.isfinite(self.m_plus) and math.isfinite(self.m_minus)):
            raise PreconditionError("cone slopes must be finite")

    @classmethod
    def symmetric(cls, n, m):
        return cls(n, m, m)

    @classmethod
    def from_radial_slope(cls, n, radial_slope):
        """Symmetric cone that a profile with ``u/r -> radial_slope`` approaches."""
        return cls(n, 1.0 / radial_slope, 1.0 / radial_slope)

    @property
    def is_symmetric(self):
        return self.m_plus == self.m_minus

    @property
    def radial_slope(self):
        """Radius growth per unit axial length on the x1 >= 0 nappe."""
        return 1.0 / self.m_plus


@dataclass
class Profile:
    """A sampled expander profile.

    ``grid`` is the independent variable (axial ``r`` in radial form, radius
    ``rho`` in graph form), ``u``/``du``/``ddu`` the unknown and its
    derivatives, ``arclength`` the arc length of the profile curve from the
    start, and ``residual`` the per-step defect of the integrated equation
    scaled by ``1 + |du|``.
    """

    family: ProfileFamily
    n: int
    a: float
    grid: np.ndarray
    u: np.ndarray
    du: np.ndarray
    residual_sup: float
    r_max: float
    ddu: np.ndarray = None
    arclength: np.ndarray = None
    residual: np.ndarray = None
    tol: float = float("nan")
    h_last: float = float("nan")

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.du = np.asarray(self.du, dtype=float)
        if self.ddu is None:
            self.ddu = np.array([_node_accel(self.family, self.n, x, y, p)
                                 for x, y, p in zip(self.grid, self.u, self.du)])
        if self.arclength is None:
            seg = np.hypot(np.diff(self.grid), np.diff(self.u))
            self.arclength = np.concatenate([[0.0], np.cumsum(seg)])
        if self.residual is None:
            self.residual = np.zeros_like(self.grid)

    @property
    def graph_form(self):
        return self.family is ProfileFamily.GraphOverPlane

    def axial(self):
        """Axial coordinate x1 of every node."""
        return self.u if self.graph_form else self.grid

    def radial(self):
        """Distance |y| from the rotation axis of every node."""
        return self.grid if self.graph_form else self.u

    def positions_squared(self):
        return self.grid ** 2 + self.u ** 2

    def to_csv(self, path=None):
        lines = ["r,u,du,residual"]
        for row in zip(self.grid, self.u, self.du, self.residual):
            lines.append(",".join(repr(float(v)) for v in row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        return text

    def metadata(self, slope=None):
        meta = {"family": self.family.value, "n": int(self.n), "a": float(self.a),
                "r_max": float(self.r_max), "tol": float(self.tol),
                "slope": None, "slope_error": None}
        if slope is not None:
            meta["slope"] = float(slope.value)
            meta["slope_error"] = float(slope.error_bound)
        return meta

    def metadata_json(self, slope=None):
        return json.dumps(self.metadata(slope), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_csv(cls, text, meta):
        rows = [line.split(",") for line in text.strip().splitlines()[1:]]
        data = np.array(rows, dtype=float).reshape(-1, 4)
        fam = ProfileFamily.parse(meta["family"])
        return cls(fam, int(meta["n"]), float(meta["a"]), data[:, 0], data[:, 1],
                   data[:, 2], float(data[:, 3].max()), float(meta["r_max"]),
                   residual=data[:, 3], tol=float(meta["tol"]))


@dataclass(frozen=True)
class SlopeEstimate:
    """Asymptotic slope with a tail error bound ``error_bound = tail_constant/r_used``."""

    value: float
    error_bound: float
    r_used: float
    tail_constant: float = field(default=float("nan"))

    def __post_init__(self):
        if not self.error_bound >= 0:
            raise ValueError("error bound must be non-negative")


def expander_ode_rhs(u, p, r, n):
    """Second derivative of the radius for a radial-form expander profile.

    Parameters
    ----------
    u : float
        Radius, must be positive.
    p : float
        First derivative du/dr.
    r : float
        Axial coordinate.
    n : int
        Dimension of the hypersurface.
    """
    if not u > 0:
        raise PreconditionError(f"profile radius must be positive, got u={u}")
    return (1.0 + p * p) * ((n - 1.0) / u + 0.5 * u - 0.5 * r * p)


def graph_expander_rhs(f, q, rho, n):
    """Second derivative of the height for a graph-form expander profile.

    At the axis the equation is singular; the smooth limit ``f/(2n)`` is
    returned when the slope vanishes there.
    """
    if rho < 0:
        raise PreconditionError("radius must be non-negative")
    if rho == 0.0:
        if q != 0.0:
            raise PreconditionError("a smooth graph must be flat at the axis")
        return f / (2.0 * n)
    return (1.0 + q * q) * (0.5 * (f - rho * q) - (n - 1.0) * q / rho)


def _node_accel(family, n, x, y, p):
    if family is ProfileFamily.GraphOverPlane:
        return graph_expander_rhs(y, p, x, n)
    return expander_ode_rhs(y, p, x, n)


def _initial_state(family, a, n):
    """(x0, y0, p0, s0, h0) and an optional prepended axis node."""
    if family is ProfileFamily.GraphOverPlane:
        # one Taylor step off the regular-singular axis
        h0 = 1e-4 * max(1.0, a)
        y0 = a + a * h0 * h0 / (4.0 * n)
        p0 = a * h0 / (2.0 * n)
        axis = (0.0, a, 0.0, 0.0, a / (2.0 * n), 0.0)
        return h0, y0, p0, math.hypot(h0, y0 - a), h0, axis
    return 0.0, a, family.initial_slope, 0.0, 1e-3 * min(1.0, a), None


def _run_kernel(family, n, x0, y0, p0, s0, x_end, tol, h0, floor):
    x, y, p, s, ypp, resid, status, h_last = _backend.integrate(
        family.kernel_code, float(n), float(x0), float(y0), float(p0), float(s0),
        float(x_end), float(tol), float(h0), float(floor), BLOW_UP_CEILING, MAX_STEPS)
    return [np.asarray(c) for c in (x, y, p, s, ypp, resid)], int(status), float(h_last)


def _assemble(family, n, a, cols, r_max, tol, h_last):
    x, y, p, s, ypp, resid = cols
    scaled = resid / (1.0 + np.abs(p))
    return Profile(family, int(n), float(a), x, y, p,
                   float(scaled.max()) if scaled.size else 0.0, float(r_max),
                   ddu=ypp, arclength=s, residual=scaled, tol=float(tol), h_last=h_last)


def _raise_event(status, prof):
    kind = _EVENT_KINDS[status]
    where = prof.grid[-1]
    raise IntegrationEvent(kind, f"integration halted by {kind} at {where:.6g}", prof)


def _check_args(a, n, r_max, tol):
    if not a > 0:
        raise PreconditionError(f"shooting parameter must be positive, got a={a}")
    if int(n) != n or n < 2:
        raise PreconditionError(f"dimension must be an integer >= 2, got n={n}")
    if not r_max > 0:
        raise PreconditionError("r_max must be positive")
    if not tol > 0:
        raise PreconditionError("tol must be positive")


def integrate_profile(family, a, n, r_max, tol):
    """Integrate an expander profile from the axis (or junction) out to ``r_max``.

    The run is split at ``r_max/2`` so that a node sits exactly there; the
    slope read-off uses both ends of that final window.

    Raises
    ------
    IntegrationEvent
        If the radius falls below ``1e-8 a``, the slope exceeds ``1e8``, the
        step size underflows or the step budget runs out.  The partial
        profile is attached to the exception.
    """
    family = ProfileFamily.parse(family)
    _check_args(a, n, r_max, tol)
    x0, y0, p0, s0, h0, axis = _initial_state(family, float(a), n)
    if r_max <= x0:
        raise PreconditionError("r_max is inside the axis start step")
    floor = GUARD_FLOOR_FACTOR * a
    pieces = []
    if axis is not None:
        pieces.append([np.array([v]) for v in axis])
    h = h0
    status = 0
    for x_end in (max(0.5 * r_max, x0), r_max):
        if x_end <= x0:
            continue
        cols, status, h = _run_kernel(family, n, x0, y0, p0, s0, x_end, tol, h, floor)
        pieces.append(cols if not pieces else [c[1:] for c in cols])
        x0, y0, p0, s0 = cols[0][-1], cols[1][-1], cols[2][-1], cols[3][-1]
        if status:
            break
    cols = [np.concatenate([pc[i] for pc in pieces]) for i in range(6)]
    prof = _assemble(family, n, a, cols, r_max, tol, h)
    if status:
        _raise_event(status, prof)
    return prof


def extend_profile(profile, r_max):
    """Continue an accepted profile to a larger ``r_max`` without restarting."""
    if not r_max > profile.r_max:
        raise PreconditionError("new r_max must exceed the current one")
    fam, n = profile.family, profile.n
    x0, y0, p0, s0 = profile.grid[-1], profile.u[-1], profile.du[-1], profile.arclength[-1]
    h = profile.h_last if math.isfinite(profile.h_last) and profile.h_last > 0 else 1e-3
    floor = GUARD_FLOOR_FACTOR * profile.a
    raw = [profile.grid, profile.u, profile.du, profile.arclength, profile.ddu,
           profile.residual * (1.0 + np.abs(profile.du))]
    status = 0
    for x_end in (max(0.5 * r_max, x0), r_max):
        if x_end <= x0:
            continue
        cols, status, h = _run_kernel(fam, n, x0, y0, p0, s0, x_end, profile.tol, h, floor)
        raw = [np.concatenate([old, new[1:]]) for old, new in zip(raw, cols)]
        x0, y0, p0, s0 = cols[0][-1], cols[1][-1], cols[2][-1], cols[3][-1]
        if status:
            break
    prof = _assemble(fam, n, profile.a, raw, r_max, profile.tol, h)
    if status:
        _raise_event(status, prof)
    return prof


def node_at(profile, x):
    """Index of the node sitting exactly at ``x`` (raises if absent)."""
    i = int(np.searchsorted(profile.grid, x))
    if i < profile.grid.size and profile.grid[i] == x:
        return i
    raise PreconditionError(f"no grid node at {x}")


def _slope_estimator(profile, i):
    """(u/r + u_r)/2 at node i; its leading tail error decays like r^-4."""
    return 0.5 * (profile.u[i] / profile.grid[i] + profile.du[i])


def asymptotic_slope(profile, settle_tol=1e-5):
    """Asymptotic slope ``lim u/r`` of an accepted profile.

    The estimator ``(u/r + u_r)/2`` is read at ``r_max`` and ``r_max/2`` and
    Richardson-extrapolated using its ``r^-4`` tail.  The tail counts as
    settled once the curvature term has a single sign on the final window
    and the two readings agree to ``settle_tol``.

    Raises
    ------
    TailNotSettled
        When either test fails; integrate further and retry.
    """
    R = profile.r_max
    if profile.grid[-1] != R:
        raise TailNotSettled("profile stops before r_max")
    try:
        j = node_at(profile, 0.5 * R)
    except PreconditionError:
        raise TailNotSettled("no node at r_max/2; re-integrate with integrate_profile")
    if profile.grid[j] <= 0:
        raise TailNotSettled("window reaches the axis")
    window = profile.ddu[j:]
    signs = np.sign(window[window != 0.0])
    if signs.size and np.any(signs != signs[0]):
        raise TailNotSettled(f"curvature changes sign on [{R / 2:g}, {R:g}]")
    far = _slope_estimator(profile, -1)
    mid = _slope_estimator(profile, j)
    change = abs(far - mid)
    if not change < settle_tol:
        raise TailNotSettled(f"slope estimate moved by {change:.3g} over the final window")
    value = (16.0 * far - mid) / 15.0
    # extrapolation remainder plus accumulated integration error
    error = change / 15.0 + 10.0 * profile.tol * (1.0 + abs(value))
    return SlopeEstimate(value, error, R, error * R)


def curvature_profile(profile):
    """Principal curvatures of the surface of revolution at each node.

    Returns
    -------
    k1, k2, A2 : ndarray
        Curvature of the profile curve, rotational curvature (multiplicity
        ``n - 1``) and the squared norm of the second fundamental form.
    """
    p = profile.du
    w = np.sqrt(1.0 + p * p)
    k1 = profile.ddu / w ** 3
    if profile.graph_form:
        rho = profile.grid
        with np.errstate(divide="ignore", invalid="ignore"):
            k2 = np.where(rho > 0, p / (np.where(rho > 0, rho, 1.0) * w), profile.ddu)
    else:
        k2 = 1.0 / (profile.u * w)
    return k1, k2, k1 * k1 + (profile.n - 1) * k2 * k2


def mean_curvature(profile):
    """Mean curvature ``div(nu)`` for the normal used throughout the package.

    Radial form: nu points away from the axis.  Graph form: nu has positive
    axial component.  With these choices expanders satisfy ``2H + <x,nu> = 0``.
    """
    k1, k2, _ = curvature_profile(profile)
    if profile.graph_form:
        return -(k1 + (profile.n - 1) * k2)
    return -k1 + (profile.n - 1) * k2


def support_function(profile):
    """<x, nu> at each node."""
    p = profile.du
    w = np.sqrt(1.0 + p * p)
    # the same expression in both parametrizations
    return (profile.u - profile.grid * p) / w


def angle_function(profile):
    """alpha(r) = arctan(u/r) on the nodes with r > 0."""
    mask = profile.grid > 0
    return profile.grid[mask], np.arctan2(profile.u[mask], profile.grid[mask])
