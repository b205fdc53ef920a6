"""Named acceptance experiments.

Each ``criterion_k`` runs one experiment and returns a :class:`Outcome` whose
``measured`` record holds every number the pass/fail decision uses, plus the
data files it produced.  Everything here is deterministic.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .entropy import (GaussianCenter, centered_area_closed_form, entropy_cone,
                      gaussian_area_cone, reference_entropy, simons_density,
                      simons_density_numeric)
from .flowsim import (FlowOptions, cone_tube_check, evolve, flow_line_experiment,
                      reference_radius, shrinking_cylinder, state_from_profile)
from .profiles import ConeSpec
from .shooting import (DEFAULT_OPTIONS, find_profiles_for_slope, junction_geometry_check, shoot,
                       trace_slope_curve)
from .stability import (analysis_profile, assemble_operator, convexity_certificate,
                        decay_envelope_check, eigenfunction_spline,
                        envelope_truncation_study,
                        expander_mean_curvature, lowest_eigenpair, perturb_profile)

TITLES = {
    1: "triple-junction shooting",
    2: "profile invariants",
    3: "junction geometry",
    4: "entropy closed forms",
    5: "cone entropy below two",
    6: "Simons density",
    7: "eigenanalysis",
    8: "perturbation linearization",
    9: "flow stationarity",
    10: "flow line divergence",
    11: "neck pinch",
    12: "tube estimate",
    13: "determinism",
}

# The wide-cone test case: connected expanders with radial slope 3.
WIDE_CONE_SLOPE = 3.0


@dataclass
class Outcome:
    criterion: int
    passed: bool
    measured: dict
    files: dict = field(default_factory=dict)

    @property
    def title(self):
        return TITLES[self.criterion]

    def to_dict(self):
        return {"criterion": self.criterion, "title": self.title, "passed": bool(self.passed),
                "measured": self.measured}

    def to_json(self):
        return json.dumps(_plain(self.to_dict()), sort_keys=True, indent=2) + "\n"

    def line(self):
        return f"criterion {self.criterion:2d} {self.title:<28s} {'PASS' if self.passed else 'FAIL'}"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Cache:
    """Shared intermediate results (triple curve, wide-cone roots)."""

    def __init__(self):
        self.store = {}

    def get(self, key, build):
        if key not in self.store:
            self.store[key] = build()
        return self.store[key]


def new_cache():
    return _Cache()


def _triple_curve(cache):
    return cache.get("triple_curve", lambda: trace_slope_curve("triple", 2, 0.05, 20.0, 64))


def _wide_roots(cache):
    return cache.get("wide_roots", lambda: find_profiles_for_slope(
        WIDE_CONE_SLOPE, "connected", 2))


def _unstable_root(cache):
    return min(_wide_roots(cache).values)


def _stable_root(cache):
    return max(_wide_roots(cache).values)


def criterion_1(cache):
    curve = _triple_curve(cache)
    a_min, m_min, _ = curve.minimum()
    m = curve.m
    interior = m[1:-1].min()
    target = 1.25 * m_min
    roots = find_profiles_for_slope(target, "triple", 2, curve=curve)
    tight = find_profiles_for_slope(target, "triple", 2, opts=DEFAULT_OPTIONS.tightened(10.0))
    values = roots.values
    shift = [min(abs(a - b) for b in tight.values) for a in values]
    residuals = [abs(r.residual) for r in roots.roots]
    ok = (m[0] > interior and m[-1] > interior and len(values) >= 2
          and max(residuals) <= 1e-6 and len(tight.values) == len(values)
          and max(shift) <= 1e-4)
    measured = {"samples": len(curve.a), "m_left": m[0], "m_right": m[-1],
                "interior_min": interior, "a_at_min": a_min, "target": target,
                "roots": values, "residuals": residuals, "tightened_roots": tight.values,
                "tightening_shift": shift}
    return Outcome(1, ok, measured, {"curve.csv": curve.to_csv(), "roots.json": roots.to_json()})


def alpha_wiggle(r, u):
    """Non-monotone variation of ``arctan(u/r)``: total variation minus net change."""
    alpha = np.arctan2(u, r)
    return float(np.sum(np.abs(np.diff(alpha))) - abs(alpha[-1] - alpha[0]))


def profile_invariants(profile):
    u, ddu, r = profile.u, profile.ddu, profile.grid
    signs = np.sign(ddu[np.abs(ddu) > 0])
    changes = int(np.count_nonzero(signs[1:] != signs[:-1]))
    window = r >= 0.5 * r[-1]
    return {"positive": bool(np.all(u > 0)),
            "increasing": bool(np.all(np.diff(u[1:]) > 0)),
            "ddu_sign_changes": changes,
            "alpha_wiggle": alpha_wiggle(r[window], u[window])}


def criterion_2(cache):
    curve = _triple_curve(cache)
    worst_wiggle, worst_changes, all_pos, all_inc = 0.0, 0, True, True
    for a in curve.a:
        prof, _ = shoot(float(a), "triple", 2, DEFAULT_OPTIONS)
        inv = profile_invariants(prof)
        all_pos &= inv["positive"]
        all_inc &= inv["increasing"]
        worst_changes = max(worst_changes, inv["ddu_sign_changes"])
        worst_wiggle = max(worst_wiggle, inv["alpha_wiggle"])
    ok = all_pos and all_inc and worst_changes <= 1 and worst_wiggle < 1e-4
    return Outcome(2, ok, {"profiles": len(curve.a), "positive": all_pos,
                           "increasing": all_inc, "max_ddu_sign_changes": worst_changes,
                           "max_alpha_wiggle": worst_wiggle})


def criterion_3(cache):
    curve = _triple_curve(cache)
    worst = 0.0
    for a in curve.a[:: max(1, len(curve.a) // 16)]:
        prof, _ = shoot(float(a), "triple", 2, DEFAULT_OPTIONS)
        worst = max(worst, max(abs(x - 2.0 * math.pi / 3.0) for x in junction_geometry_check(prof)))
    return Outcome(3, worst <= 1e-12, {"max_angle_error": worst})


def sphere_entropy_bruteforce(radius=1.0):
    """Gaussian area of a planar circle maximized over the scale, by direct quadrature."""
    def area(scale):
        dens = lambda th: math.exp(-radius * radius / (4.0 * scale)) / math.sqrt(4.0 * math.pi * scale)
        return quad(dens, 0.0, 2.0 * math.pi, epsabs=0.0, epsrel=1e-13)[0] * radius

    res = minimize_scalar(lambda s: -area(s), bounds=(0.05, 5.0), method="bounded",
                          options={"xatol": 1e-10})
    return -res.fun


def criterion_4(cache):
    errs = {}
    for n in (2, 3):
        for m in (0.25, 1.0, 4.0):
            value, _ = gaussian_area_cone(ConeSpec.symmetric(n, m), GaussianCenter(0.0, 0.0))
            exact = 2.0 * (1.0 + m * m) ** (-(n - 1) / 2.0)
            errs[f"n={n},m={m}"] = abs(value - exact)
    plane = reference_entropy("hyperplane")
    sphere = reference_entropy("sphere", 1)
    brute = sphere_entropy_bruteforce()
    target = math.sqrt(2.0 * math.pi / math.e)
    ok = (max(errs.values()) <= 1e-8 and plane == 1.0 and abs(sphere - target) <= 1e-10
          and abs(brute - target) <= 1e-10)
    return Outcome(4, ok, {"centered_errors": errs, "hyperplane": plane, "sphere": sphere,
                           "sphere_bruteforce": brute,
                           "closed_form_check": centered_area_closed_form(
                               ConeSpec.symmetric(2, 1.0))})


def criterion_5(cache):
    rows, ok = {}, True
    for m in (0.25, 0.5, 1.0):
        rep = entropy_cone(ConeSpec.symmetric(2, m))
        rows[str(m)] = rep.to_dict()
        ok &= rep.lambda_ < 2.0 - rep.quad_error
    rep = entropy_cone(ConeSpec.symmetric(2, 8.0))
    rows["8.0"] = rep.to_dict()
    gap = abs(rep.lambda_ - reference_entropy("cylinder", 1))
    ok &= gap < 0.05
    return Outcome(5, ok, {"reports": rows, "cylinder_gap": gap})


def criterion_6(cache):
    worst, top, note = 0.0, 0.0, None
    for n in range(2, 9):
        for p in range(1, n):
            s = simons_density(n, p)
            worst = max(worst, abs(s.theta - simons_density_numeric(n, p)))
            top = max(top, s.theta)
            if (n, p) == (2, 1):
                pair = s
    doc = pair.to_dict()
    note = doc.get("paper_discrepancy", "")
    ok = (worst <= 1e-10 and top < 2.0 and abs(pair.theta - math.pi / 2) <= 1e-12
          and "3/2" in note)
    return Outcome(6, ok, {"max_difference": worst, "max_theta": top, "theta_2_1": pair.theta},
                   {"simons_2_1.json": pair.to_json()})


def _richardson(values):
    return [(4.0 * fine - coarse) / 3.0 for coarse, fine in zip(values, values[1:])]


def criterion_7(cache):
    a = _unstable_root(cache)
    prof = analysis_profile("connected", a, 2, 24.0)
    mus = [lowest_eigenpair(assemble_operator(prof, 16.0, N)).mu1 for N in (400, 800, 1600)]
    extrap = _richardson(mus)
    res = lowest_eigenpair(assemble_operator(prof, 16.0, 1600))
    study = envelope_truncation_study(prof)
    env16 = decay_envelope_check(res, prof)
    rayleigh_gap = abs(res.rayleigh - res.mu1)
    ok = (res.mu1 < 0 and res.mu1 < 0.5 and rayleigh_gap <= 1e-10 * max(1.0, abs(res.mu1))
          and abs(extrap[1] - extrap[0]) < 1e-4 and bool(np.all(res.f > 0))
          and env16.passed and study.stable)
    measured = {"a": a, "mu1": res.mu1, "mu1_by_cells": mus, "extrapolated": extrap,
                "rayleigh_gap": rayleigh_gap, "positive": bool(np.all(res.f > 0)),
                "envelope_C": env16.C, "envelope_truncations": study.truncations,
                "envelope_constants": study.constants, "mu1_by_truncation": study.mu1}
    return Outcome(7, ok, measured, {"eigen.json": json.dumps(_plain(res.to_dict(env16.C)),
                                                              sort_keys=True, indent=2) + "\n",
                                     "eigenfunction.csv": res.to_csv()})


def linearization_errors(profile, res, epsilons=(1e-2, 1e-3, 1e-4), window=0.8):
    """Difference quotients ``E(Sigma^eps)/eps`` against ``2 mu1 F`` on the inner arc."""
    F = eigenfunction_spline(res)(profile.arclength)
    mask = profile.arclength <= window * res.truncation
    base = expander_mean_curvature(profile)
    quotients = [(expander_mean_curvature(perturb_profile(profile, res, e)) - base) / e
                 for e in epsilons]
    target = 2.0 * res.mu1 * F
    scale = float(np.max(np.abs(target[mask])))
    errors = [float(np.max(np.abs(q - target)[mask])) / scale for q in quotients]
    steps = [float(np.max(np.abs(q1 - q2)[mask])) for q1, q2 in zip(quotients, quotients[1:])]
    orders = [math.log10(s1 / s2) for s1, s2 in zip(steps, steps[1:])]
    return errors, orders


def criterion_8(cache):
    a = _unstable_root(cache)
    prof = analysis_profile("connected", a, 2)
    res = lowest_eigenpair(assemble_operator(prof, 16.0, 1600))
    errors, orders = linearization_errors(prof, res)
    certs = {}
    for eps in (1e-3, -1e-3):
        spec, _, window = convexity_certificate(prof, perturb_profile(prof, res, eps), res.mu1, eps)
        certs[repr(eps)] = {"c": spec.c, "beta": spec.beta, "window": window}
    ok = min(orders) >= 0.9 and all(c["c"] > 0 for c in certs.values())
    return Outcome(8, ok, {"relative_errors": errors, "orders": orders, "certificates": certs})


def stationarity_drift(profile, cells, length=8.0, horizon=1.0):
    state = state_from_profile(profile, length, cells)
    trace = evolve(state, horizon, FlowOptions(cadence=10 ** 9))
    return float(np.max([np.max(np.abs(s.v - state.v)) for s in trace.snapshots])), trace


def criterion_9(cache):
    prof = analysis_profile("connected", _stable_root(cache), 2)
    d200, trace = stationarity_drift(prof, 200)
    d400, _ = stationarity_drift(prof, 400)
    order = math.log2(d200 / d400)
    ok = d200 < 1e-3 and 1.8 <= order <= 2.2 and trace.event.type == "none"
    return Outcome(9, ok, {"a": _stable_root(cache), "drift_200": d200, "drift_400": d400,
                           "order": order})


def _flow_line(cache):
    cone = ConeSpec.from_radial_slope(2, WIDE_CONE_SLOPE)
    return cache.get("flow_line", lambda: flow_line_experiment(
        cone, _unstable_root(cache), 1e-3, 1.0, cells=400))


def criterion_10(cache):
    fl = _flow_line(cache)
    target = -fl.mu1
    rel = {("plus" if k > 0 else "minus"): abs(v - target) / target for k, v in fl.rates.items()}
    ok = all(r <= 0.2 for r in rel.values())
    return Outcome(10, ok, {"mu1": fl.mu1, "rates": {"plus": fl.rates[1.0],
                                                     "minus": fl.rates[-1.0]},
                            "relative_error": rel, "outward_event": fl.plus.event.type,
                            "outward_min_E": float(np.min(fl.plus.min_E))},
                   {"monitors_plus.csv": fl.plus.monitors_csv(),
                    "monitors_minus.csv": fl.minus.monitors_csv()})


def criterion_11(cache):
    fl = _flow_line(cache)
    ev = fl.minus.event
    spacing = fl.minus.snapshots[0].spacing
    st, exact = shrinking_cylinder(1.0)
    oracle = evolve(st, 1.0, FlowOptions(boundary="function"), reference=exact).event
    fit = ev.fit
    ref = math.sqrt(2.0 * (2 - 1))
    ok = (ev.type == "neck_pinch" and not ev.inconclusive and abs(ev.location) <= 2 * spacing
          and abs(fit["exponent"] - 0.5) <= 0.05 and abs(fit["prefactor"] - ref) <= 0.1 * ref
          and abs(oracle.fit["exponent"] - 0.5) <= 0.05
          and abs(oracle.fit["prefactor"] - ref) <= 0.1 * ref)
    return Outcome(11, ok, {"event": ev.to_dict(), "spacing": spacing,
                            "cylinder_oracle": oracle.to_dict()},
                   {"event.json": ev.to_json()})


def criterion_12(cache):
    cone = ConeSpec.from_radial_slope(2, WIDE_CONE_SLOPE)
    runs = {}
    ok = True
    for label, a, eps in (("stable", _stable_root(cache), 0.0),
                          ("outward", _unstable_root(cache), 1e-3)):
        prof = analysis_profile("connected", a, 2, 16.0, r_min=16.0)
        eig = lowest_eigenpair(assemble_operator(prof, 16.0, 1600)) if eps else None
        state = state_from_profile(prof, 12.0, 300, gauge="physical", eigen=eig, epsilon=eps)
        trace = evolve(state, 3.0, FlowOptions(boundary="expander", cadence=200),
                       reference=reference_radius(prof), cone=cone)
        reps = [cone_tube_check(s, cone) for s in trace.snapshots]
        passed = all(r.passed for r in reps) and trace.event.type == "none"
        runs[label] = {"snapshots": len(reps), "passed": passed,
                       "n_prime": max(r.n_prime for r in reps),
                       "min_margin": min(r.margin for r in reps)}
        ok &= passed
    return Outcome(12, ok, runs)


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 13)}


def run_criteria(numbers=None, cache=None):
    """Run the requested experiments (default 1-12) and return their outcomes."""
    cache = _Cache() if cache is None else cache
    numbers = sorted(CRITERIA) if numbers is None else numbers
    return [CRITERIA[k](cache) for k in numbers]
