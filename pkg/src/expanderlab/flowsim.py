"""Radial mean curvature flow of rotationally symmetric surfaces.

The surface is the rotation of the graph ``radius = v(rho)`` over the axial
coordinate ``rho`` in ``[0, L]``, reflected across ``rho = 0``.  Two gauges:

* physical time ``t``:  v_t = v'' / (1 + v'^2) - (n-1)/v
* rescaled time ``s = log t`` with ``v -> v / sqrt(t)``:
  v_s = v'' / (1 + v'^2) - (n-1)/v + (rho v' - v)/2,
  whose stationary states are exactly the expanders.
"""
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from . import _backend
from .errors import ConvergenceError, DomainError, PreconditionError
from .profiles import ConeSpec, ProfileFamily
from .stability import (ProfileCurve, analysis_profile, assemble_operator,
                        lowest_eigenpair, perturb_profile)

TUBE_LADDER = (1.5, 2.0, 4.0, 8.0, 16.0)


@dataclass
class FlowState:
    """One time slice.  ``time`` is ``s`` (rescaled) or ``t >= 1`` (physical)."""

    gauge: str
    time: float
    rho: np.ndarray
    v: np.ndarray
    slope: float
    n: int = 2

    def __post_init__(self):
        if self.gauge not in ("rescaled", "physical"):
            raise PreconditionError(f"unknown gauge {self.gauge!r}")
        self.rho = np.asarray(self.rho, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.gauge == "physical" and self.time < 1.0:
            raise PreconditionError("physical time starts at t = 1")

    @property
    def spacing(self):
        return float(self.rho[1] - self.rho[0])

    @property
    def physical_time(self):
        return math.exp(self.time) if self.gauge == "rescaled" else self.time

    def physical_radius(self):
        """Radius of the physical surface at ``physical_time`` on the physical axial grid."""
        if self.gauge == "physical":
            return self.rho, self.v
        scale = math.sqrt(self.physical_time)
        return scale * self.rho, scale * self.v

    def copy(self):
        return replace(self, rho=self.rho.copy(), v=self.v.copy())

    def to_csv(self):
        lines = ["rho,v"] + [f"{float(r)!r},{float(v)!r}" for r, v in zip(self.rho, self.v)]
        return "\n".join(lines) + "\n"


@dataclass
class SingularityEvent:
    type: str
    time: float = float("nan")
    location: float = float("nan")
    fit: dict = field(default_factory=dict)
    inconclusive: bool = False

    def to_dict(self):
        return {"type": self.type, "time": self.time, "location": self.location,
                "fit": self.fit, "inconclusive": self.inconclusive}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=True) + "\n"


@dataclass
class FlowTrace:
    snapshots: list
    times: np.ndarray
    min_v: np.ndarray
    argmin: np.ndarray
    min_E: np.ndarray
    tube_margin: np.ndarray
    proxy: np.ndarray
    event: SingularityEvent = None
    gauge: str = "rescaled"
    n: int = 2

    def monitors_csv(self):
        lines = ["time,min_v,argmin,min_E,tube_margin"]
        for row in zip(self.times, self.min_v, self.argmin, self.min_E, self.tube_margin):
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class FlowOptions:
    """Scheme settings.

    ``dt_factor`` sets ``dt = dt_factor * drho^2``; near a pinch the step is
    also capped by ``pinch_eta * min(v)^2 / (n-1)``.  ``boundary`` selects
    the Dirichlet data at ``rho = L``: ``pinned`` (initial value), ``cone``
    (``slope * L``), ``expander`` (the reference expander, which is what
    the surface approaches far out) or ``function`` (a callable of time).
    """

    dt_factor: float = 0.4
    pinch_eta: float = 0.05
    pinch_ratio: float = 1e-3
    proxy_ceiling: float = 1e3
    cadence: int = 50
    boundary: str = "pinned"
    dt_min: float = 1e-14
    max_steps: int = 5_000_000
    monitor_orientation: float = -1.0
    tube_ladder: tuple = TUBE_LADDER
    monitor_window: float = 0.75


def _derivatives(rho, v):
    h = rho[1] - rho[0]
    d1 = np.empty_like(v)
    d2 = np.empty_like(v)
    d1[1:-1] = 0.5 * (v[2:] - v[:-2]) / h
    d2[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    d1[0] = 0.0
    d2[0] = 2.0 * (v[1] - v[0]) / (h * h)
    d1[-1] = (v[-1] - v[-2]) / h
    d2[-1] = d2[-2]
    return d1, d2


def expander_curvature_of_state(state, orientation=-1.0):
    """``2H + <y, nu>`` of the slice (rescaled variables) with the chosen normal.

    ``orientation = +1`` uses the normal pointing away from the axis.  In the
    rescaled gauge a state moves outward exactly where this quantity, taken
    with ``orientation = -1``, is positive.  Physical slices are first
    rescaled to unit time; the physical ``E`` is ``sqrt(t)`` times the value.
    """
    rho, v = state.rho, state.v
    if state.gauge == "physical":
        sc = 1.0 / math.sqrt(state.time)
        rho, v = rho * sc, v * sc
    d1, d2 = _derivatives(rho, v)
    w = np.sqrt(1.0 + d1 * d1)
    H = -d2 / w ** 3 + (state.n - 1) / (v * w)
    return orientation * (2.0 * H + (v - rho * d1) / w)


def curvature_proxy(state, i):
    d1, d2 = _derivatives(state.rho, state.v)
    return abs(d2[i]) / (1.0 + d1[i] ** 2) ** 1.5 + (state.n - 1) / state.v[i]


@dataclass
class TubeReport:
    passed: bool
    n_prime: float
    per_rung: dict
    margin: float


def cone_tube_check(state, cone, ladder=TUBE_LADDER, outer_fraction=0.8):
    """Tube estimate: outside ``N' R sqrt(t)`` the surface lies within ``sqrt(t)/R`` of the cone.

    For each ``R`` on the ladder the smallest workable ``N'_R`` is the largest
    ``|x|/(R sqrt(t))`` among nodes farther than ``sqrt(t)/R`` from the cone.
    A rung fails when violations reach the outer ``1 - outer_fraction`` of
    the domain, where the estimate can no longer be certified.  The margin is
    the smallest slack ``sqrt(t)/R - dist`` over the certified region.
    """
    if not isinstance(cone, ConeSpec):
        raise PreconditionError("cone_tube_check needs a ConeSpec")
    t = state.physical_time
    rho, v = state.physical_radius()
    M = cone.radial_slope
    dist = np.abs(v - M * rho) / math.sqrt(1.0 + M * M)
    r = np.hypot(rho, v)
    r_end = float(r[-1])
    per_rung = {}
    passed = True
    margin = math.inf
    n_prime = 0.0
    for R in ladder:
        band = math.sqrt(t) / R
        bad = dist > band
        reach = float(r[bad].max()) if bad.any() else 0.0
        ok = reach <= outer_fraction * r_end
        npr = reach / (R * math.sqrt(t))
        per_rung[float(R)] = {"n_prime": npr, "passed": bool(ok)}
        passed &= ok
        n_prime = max(n_prime, npr)
        outside = r > reach
        if outside.any():
            margin = min(margin, float(np.min(band - dist[outside])))
    return TubeReport(bool(passed), n_prime, per_rung, margin)


def _boundary_value(opts, init, reference, state_time):
    L = init.rho[-1]
    if opts.boundary == "pinned":
        return float(init.v[-1])
    if opts.boundary == "cone":
        return float(init.slope * L)
    if opts.boundary == "expander":
        if reference is None:
            raise PreconditionError("expander boundary needs a reference profile")
        if init.gauge == "rescaled":
            return float(reference(L))
        sq = math.sqrt(state_time)
        return float(sq * reference(L / sq))
    if opts.boundary == "function":
        if reference is None:
            raise PreconditionError("function boundary needs a callable of time")
        return float(reference(state_time))
    raise PreconditionError(f"unknown boundary mode {opts.boundary!r}")


def _monitor(state, cone, opts):
    i = int(np.argmin(state.v))
    E = expander_curvature_of_state(state, opts.monitor_orientation)
    inner = state.rho <= opts.monitor_window * state.rho[-1]
    tube = cone_tube_check(state, cone, opts.tube_ladder) if cone is not None else None
    return (float(state.v[i]), float(state.rho[i]), float(np.min(E[inner])),
            float(tube.margin) if tube is not None else float("nan"),
            float(curvature_proxy(state, i)))


def evolve(init, horizon, opts=FlowOptions(), reference=None, cone=None):
    """Advance ``init`` by ``horizon`` (in its own time variable).

    Parameters
    ----------
    init : FlowState
    horizon : float
        Time span; the run also stops at a detected pinch.
    reference : callable, optional
        Expander radius as a function of the axial coordinate (unit time)
        for the ``expander`` boundary mode, or the boundary value as a
        function of time for the ``function`` mode.
    cone : ConeSpec, optional
        Enables the tube-margin monitor.

    Returns
    -------
    FlowTrace
    """
    if not horizon > 0:
        raise PreconditionError("horizon must be positive")
    if np.any(init.v <= 0):
        raise PreconditionError("initial radius must be positive")
    rescaled = init.gauge == "rescaled"
    state = init.copy()
    h = state.spacing
    dt_base = opts.dt_factor * h * h
    t_end = init.time + horizon
    v0_min = float(np.min(init.v))
    snaps = [state.copy()]
    rows = [(state.time,) + _monitor(state, cone, opts)]
    steps = 0
    event = None
    while state.time < t_end - 1e-14 * max(1.0, abs(t_end)):
        vmin = float(np.min(state.v))
        dt = min(dt_base, t_end - state.time)
        if state.n > 1:
            dt = min(dt, opts.pinch_eta * vmin * vmin / (state.n - 1))
        if dt < opts.dt_min:
            raise ConvergenceError(f"time step collapsed to {dt:.3g} without a pinch signature")
        if steps >= opts.max_steps:
            raise ConvergenceError("flow step budget exhausted")
        t_next = state.time + dt
        right = _boundary_value(opts, init, reference, t_next)
        v_new = np.asarray(_backend.flow_step(np.ascontiguousarray(state.v), state.rho, dt,
                                              float(state.n), int(rescaled), right))
        steps += 1
        if not np.all(np.isfinite(v_new)):
            raise DomainError("flow produced non-finite radii")
        state = FlowState(state.gauge, t_next, state.rho, v_new, state.slope, state.n)
        if np.any(v_new <= 0):
            event = SingularityEvent("neck_pinch", t_next, float(state.rho[np.argmin(v_new)]),
                                     inconclusive=True)
            break
        rows.append((state.time,) + _monitor(state, cone, opts))
        if steps % opts.cadence == 0:
            snaps.append(state.copy())
        if rows[-1][1] < opts.pinch_ratio * v0_min:
            break
    if snaps[-1].time != state.time and np.all(state.v > 0):
        snaps.append(state.copy())
    data = np.array(rows, dtype=float)
    trace = FlowTrace(snaps, data[:, 0], data[:, 1], data[:, 2], data[:, 3], data[:, 4],
                      data[:, 5], event, init.gauge, init.n)
    trace.event = detect_singularity(trace, opts) if event is None else event
    return trace


def _fit_extinction(t, radius, n, samples=30):
    """Fit ``radius = P (T - t)^alpha`` to the last samples before a pinch.

    ``T`` comes from a straight-line fit of ``radius^2`` against ``t``; the
    exponent and prefactor then come from a log-log least-squares fit.
    """
    t, radius = t[-samples:], radius[-samples:]
    slope, icpt = np.polyfit(t, radius * radius, 1)
    if not slope < 0:
        return {"exponent": float("nan"), "prefactor": float("nan"), "r2": float("nan"),
                "T": float("nan"), "samples": int(t.size)}
    T = -icpt / slope
    gap = T - t
    ok = gap > 0
    x, y = np.log(gap[ok]), np.log(radius[ok])
    alpha, logp = np.polyfit(x, y, 1)
    pred = alpha * x + logp
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss if ss > 0 else 1.0
    return {"exponent": float(alpha), "prefactor": float(math.exp(logp)), "r2": r2,
            "T": float(T), "samples": int(ok.sum()),
            "reference_prefactor": math.sqrt(2.0 * (n - 1))}


def detect_singularity(trace, opts=FlowOptions(), samples=30):
    """Classify the end of a trace as ``neck_pinch`` or ``none``.

    A pinch needs both ``min v < pinch_ratio * min v(0)`` and the curvature
    proxy above ``proxy_ceiling``; the threshold alone is reported as
    inconclusive.  The extinction fit is done in physical variables.
    """
    below = np.nonzero(trace.min_v < opts.pinch_ratio * trace.min_v[0])[0]
    if below.size == 0:
        return SingularityEvent("none")
    k = int(below[0])
    t_phys = np.exp(trace.times) if trace.gauge == "rescaled" else trace.times
    radius = trace.min_v * (np.sqrt(t_phys) if trace.gauge == "rescaled" else 1.0)
    fit = _fit_extinction(t_phys[:k + 1], radius[:k + 1], trace.n, samples)
    blown = trace.proxy[k] > opts.proxy_ceiling
    return SingularityEvent("neck_pinch" if blown else "none", float(trace.times[k]),
                            float(trace.argmin[k]), fit, inconclusive=not blown)


def state_from_profile(profile, length=8.0, cells=200, gauge="rescaled", eigen=None,
                       epsilon=0.0):
    """Sample a (possibly normally perturbed) radial-form profile on the flow grid."""
    if ProfileFamily.parse(profile.family) is not ProfileFamily.ConnectedSymmetric:
        raise PreconditionError("only the smooth connected family can be evolved")
    if profile.grid[-1] < length:
        raise PreconditionError("profile is shorter than the flow domain")
    src = profile if epsilon == 0 else perturb_profile(profile, eigen, epsilon)
    rho = np.linspace(0.0, length, cells + 1)
    if epsilon == 0:
        v = ProfileCurve(profile).u_poly(rho)
    else:
        v = CubicSpline(src.grid, src.u)(rho)
    slope_far = float(src.u[-1] / src.grid[-1])
    return FlowState(gauge, 0.0 if gauge == "rescaled" else 1.0, rho, v, slope_far, profile.n)


def shrinking_cylinder(radius, length=4.0, cells=200, n=2):
    """Physical-gauge cylinder state and its exact boundary data ``sqrt(r^2 - 2(n-1)(t-1))``."""
    rho = np.linspace(0.0, length, cells + 1)
    state = FlowState("physical", 1.0, rho, np.full(rho.size, float(radius)), 0.0, n)
    exact = lambda t: math.sqrt(max(radius * radius - 2.0 * (n - 1) * (t - 1.0), 0.0))
    return state, exact


def reference_radius(profile):
    """Callable radius of an exact radial-form profile (unit time)."""
    poly = ProfileCurve(profile).u_poly
    return lambda x: float(poly(x))


def sup_distance(trace_a, trace_b):
    """``sup |v_a - v_b|`` on matching snapshots (same grid and times)."""
    return np.array([np.max(np.abs(a.v - b.v)) for a, b in zip(trace_a.snapshots,
                                                                 trace_b.snapshots)])


@dataclass
class FlowLineResult:
    plus: FlowTrace
    minus: FlowTrace
    base: FlowTrace
    mu1: float
    rates: dict
    distances: dict


def divergence_rate(times, dist, lower, upper):
    """Least-squares slope of ``log dist`` where ``lower <= dist <= upper``."""
    mask = (dist > 0) & (dist >= lower) & (dist <= upper)
    if mask.sum() < 3:
        return float("nan"), mask
    slope, _ = np.polyfit(times[mask], np.log(dist[mask]), 1)
    return float(slope), mask


def flow_line_experiment(cone, a_unstable, epsilon, horizon, n=2, length=8.0, cells=200,
                         eigen_cells=1600, truncation=16.0, opts=FlowOptions(cadence=1)):
    """Evolve both normal pushes of an unstable connected expander.

    The distance to the stationary state is measured against an unperturbed
    run on the same grid, so discretization drift cancels.
    """
    prof = analysis_profile(ProfileFamily.ConnectedSymmetric, a_unstable, n, truncation,
                            r_min=max(length, 8.0))
    eig = lowest_eigenpair(assemble_operator(prof, truncation, eigen_cells))
    if not eig.mu1 < 0:
        raise PreconditionError(f"expander at a={a_unstable:g} is stable (mu1={eig.mu1:.4g})")
    base_state = state_from_profile(prof, length, cells)
    base = evolve(base_state, horizon, opts, cone=cone)
    eps = abs(epsilon)
    traces = {}
    for sign in (1.0, -1.0):
        st = state_from_profile(prof, length, cells, eigen=eig, epsilon=sign * eps)
        o = replace(opts, monitor_orientation=-sign)
        traces[sign] = evolve(st, horizon, o, cone=cone)
    rates, dists = {}, {}
    for sign, tr in traces.items():
        m = min(len(tr.snapshots), len(base.snapshots))
        d = np.array([np.max(np.abs(tr.snapshots[i].v - base.snapshots[i].v)) for i in range(m)])
        times = tr.times[:m] if opts.cadence == 1 else np.array(
            [s.time for s in tr.snapshots[:m]])
        rate, _ = divergence_rate(times, d, 2.0 * d[0], 1e-2 * a_unstable)
        rates[sign] = rate
        dists[sign] = (times, d)
    return FlowLineResult(traces[1.0], traces[-1.0], base, eig.mu1, rates, dists)
