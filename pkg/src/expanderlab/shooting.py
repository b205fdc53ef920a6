"""Shooting map a -> m(a), slope curves and root finding for a target cone."""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (EscalationCapReached, NoBracketFound, PreconditionError,
                     TailNotSettled)
from .profiles import (ProfileFamily, asymptotic_slope, extend_profile,
                       integrate_profile)


@dataclass(frozen=True)
class ShootingOptions:
    """Integrator and read-off settings for one evaluation of the shooting map.

    ``r_start`` is doubled until the slope error bound drops below
    ``target_error``; ``r_cap`` bounds the escalation.
    """

    tol: float = 1e-10
    r_start: float = 8.0
    r_cap: float = 1024.0
    target_error: float = 1e-6
    settle_tol: float = 1e-5

    def tightened(self, factor=10.0):
        return ShootingOptions(self.tol / factor, self.r_start, self.r_cap,
                               self.target_error, self.settle_tol)


DEFAULT_OPTIONS = ShootingOptions()


def shoot(a, family, n, opts=DEFAULT_OPTIONS):
    """Integrate the profile for ``a`` far enough to read its slope.

    Returns
    -------
    profile : Profile
    slope : SlopeEstimate
    """
    family = ProfileFamily.parse(family)
    if not a > 0:
        raise PreconditionError(f"shooting parameter must be positive, got a={a}")
    R = float(opts.r_start)
    prof = integrate_profile(family, a, n, R, opts.tol)
    while True:
        try:
            est = asymptotic_slope(prof, opts.settle_tol)
            if est.error_bound <= opts.target_error:
                return prof, est
        except TailNotSettled:
            pass
        if 2.0 * R > opts.r_cap:
            raise EscalationCapReached(
                f"slope of the a={a:g} profile not settled by r_max={R:g}")
        R *= 2.0
        prof = extend_profile(prof, R)


def slope_map(a, family, n, opts=DEFAULT_OPTIONS):
    """Asymptotic slope lim u/r of the profile with shooting parameter ``a``."""
    return shoot(a, family, n, opts)[1]


@dataclass
class SlopeCurve:
    """Samples of the shooting map in increasing ``a``.

    ``policy`` records the refinement rule: an interval is split while the
    slope jump exceeds ``jump * max(1, |m|)`` and the interval is wider (in
    ``a``) than ``min_spacing``.  ``unresolved`` lists intervals that stayed
    above the jump threshold at minimum spacing.
    """

    family: ProfileFamily
    n: int
    a: np.ndarray
    slopes: list
    policy: dict = field(default_factory=dict)
    unresolved: list = field(default_factory=list)

    @property
    def m(self):
        return np.array([s.value for s in self.slopes])

    @property
    def errors(self):
        return np.array([s.error_bound for s in self.slopes])

    def minimum(self):
        """(a, m, error) at the smallest sampled slope."""
        i = int(np.argmin(self.m))
        return float(self.a[i]), float(self.m[i]), float(self.errors[i])

    def max_jump(self):
        return float(np.max(np.abs(np.diff(self.m)))) if len(self.a) > 1 else 0.0

    def to_csv(self):
        lines = ["a,slope,slope_error"]
        for a, s in zip(self.a, self.slopes):
            lines.append(f"{float(a)!r},{float(s.value)!r},{float(s.error_bound)!r}")
        return "\n".join(lines) + "\n"


def _jump_too_large(m_lo, m_hi, jump):
    return abs(m_hi - m_lo) > jump * max(1.0, abs(m_lo), abs(m_hi))


def trace_slope_curve(family, n, a_min, a_max, samples=64, refine=True, opts=DEFAULT_OPTIONS,
                      jump=0.05, min_spacing=1e-6, max_samples=4096):
    """Sample the shooting map on a log-spaced grid, refining steep intervals.

    Values between samples are never interpolated; each sample is a full
    shooting run.
    """
    family = ProfileFamily.parse(family)
    if not (0 < a_min < a_max):
        raise PreconditionError("need 0 < a_min < a_max")
    if samples < 2:
        raise PreconditionError("need at least two samples")
    grid = list(np.geomspace(a_min, a_max, int(samples)))
    grid[0], grid[-1] = float(a_min), float(a_max)
    est = {a: slope_map(a, family, n, opts) for a in grid}
    unresolved = []
    if refine:
        pending = list(zip(grid[:-1], grid[1:]))
        while pending and len(est) < max_samples:
            lo, hi = pending.pop()
            if not _jump_too_large(est[lo].value, est[hi].value, jump):
                continue
            if hi - lo <= min_spacing:
                unresolved.append((lo, hi))
                continue
            mid = math.sqrt(lo * hi)
            est[mid] = slope_map(mid, family, n, opts)
            pending.extend([(lo, mid), (mid, hi)])
        unresolved.extend(pending)
    a_sorted = np.array(sorted(est))
    policy = {"spacing": "log", "samples": int(samples), "refine": bool(refine),
              "jump": jump, "jump_scale": "max(1,|m|)", "min_spacing": min_spacing}
    return SlopeCurve(family, int(n), a_sorted, [est[a] for a in a_sorted], policy,
                      sorted(unresolved))


@dataclass
class Root:
    a: float
    bracket_lo: float
    bracket_hi: float
    residual: float
    slope: object = None


@dataclass
class RootSet:
    """All roots of m(a) = M found on a scanned window."""

    family: ProfileFamily
    n: int
    M: float
    roots: list

    @property
    def values(self):
        return [r.a for r in self.roots]

    def to_json(self):
        doc = {"family": self.family.value, "n": int(self.n), "M": float(self.M),
               "roots": [{"a": r.a, "bracket_lo": r.bracket_lo, "bracket_hi": r.bracket_hi,
                          "residual": r.residual} for r in self.roots]}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _bisect(M, family, n, lo, hi, m_lo, opts, tol, max_iter=200):
    """Bisection in log(a) on a bracket whose ends straddle M."""
    sign_lo = m_lo > M
    best = None
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        est = slope_map(mid, family, n, opts)
        res = abs(est.value - M)
        if best is None or res < best[1]:
            best = (mid, res, est)
        if res <= tol or hi - lo <= 4e-16 * hi:
            break
        if (est.value > M) == sign_lo:
            lo = mid
        else:
            hi = mid
    return best


def find_profiles_for_slope(M, family, n, a_min=0.05, a_max=20.0, samples=64,
                            opts=DEFAULT_OPTIONS, tol=1e-6, curve=None):
    """Every ``a`` in the window whose profile is asymptotic to slope ``M``.

    Raises
    ------
    NoBracketFound
        When the sampled curve never crosses ``M``.
    """
    family = ProfileFamily.parse(family)
    if not M > 0:
        raise PreconditionError("target slope must be positive")
    if curve is None:
        curve = trace_slope_curve(family, n, a_min, a_max, samples, True, opts)
    a, m = curve.a, curve.m
    roots = []
    for i in range(len(a) - 1):
        if (m[i] - M) * (m[i + 1] - M) > 0:
            continue
        if m[i] == M:
            roots.append(Root(float(a[i]), float(a[i]), float(a[i]), 0.0, curve.slopes[i]))
            continue
        if m[i + 1] == M:
            continue
        root, res, est = _bisect(M, family, n, float(a[i]), float(a[i + 1]), m[i], opts, tol)
        roots.append(Root(root, float(a[i]), float(a[i + 1]), float(res), est))
    if not roots:
        lo = float(np.min(m))
        raise NoBracketFound(f"no profile with slope {M:g} on a in [{a[0]:g}, {a[-1]:g}]"
                             f" (sampled minimum {lo:.8g})")
    return RootSet(family, int(n), float(M), roots)


def junction_geometry_check(profile):
    """Pairwise angles at the junction between the wing, its mirror and the disk.

    Directions in the (axial, radial) half-plane: wing ``(1, u_r(0))``, mirror
    ``(-1, u_r(0))`` and the flat sheet ``(0, -1)`` running toward the axis.

    Returns
    -------
    tuple of float
        (wing-mirror, wing-sheet, mirror-sheet) angles in radians.
    """
    if ProfileFamily.parse(profile.family) is not ProfileFamily.TripleJunction:
        raise PreconditionError("junction geometry applies to the triple-junction family")
    slope = float(profile.du[0])
    dirs = [(1.0, slope), (-1.0, slope), (0.0, -1.0)]

    def angle(v, w):
        return math.atan2(abs(v[0] * w[1] - v[1] * w[0]), v[0] * w[0] + v[1] * w[1])

    return angle(dirs[0], dirs[1]), angle(dirs[0], dirs[2]), angle(dirs[1], dirs[2])
