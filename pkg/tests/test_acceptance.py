"""Acceptance criteria 1-13, run end to end through ``expanderlab report --suite``.

The suite is run once per session (two full passes, as the determinism row
needs).  Each test re-reads the stored measurements, re-asserts the stated
thresholds and prints one PASS/FAIL line.
"""
import json
import math

import pytest

from expanderlab.acceptance import TITLES
from expanderlab.cli import dispatch
from expanderlab.entropy import reference_entropy

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    code = dispatch(["report", "--suite", "--out", str(out)])
    return out, code


def measured(suite, k, tag="suite-a"):
    doc = json.loads((suite[0] / tag / f"criterion_{k:02d}" / "result.json").read_text())
    assert doc["criterion"] == k
    return doc


def report_line(k, ok):
    return f"criterion {k:2d} {TITLES[k]:<28s} {'PASS' if ok else 'FAIL'}"


@pytest.fixture
def verdict(capsys):
    def emit(k, checks):
        ok = all(bool(c) for c in checks.values())
        with capsys.disabled():
            print("\n" + report_line(k, ok))
        failed = [name for name, c in checks.items() if not c]
        assert ok, f"criterion {k} failed: {failed}"
    return emit


def test_criterion_01_triple_junction_shooting(suite, verdict):
    d = measured(suite, 1)
    m = d["measured"]
    verdict(1, {
        "samples": m["samples"] >= 64,
        "endpoints_above_interior": m["m_left"] > m["interior_min"] < m["m_right"],
        "two_roots": len(m["roots"]) >= 2,
        "residuals": max(m["residuals"]) <= 1e-6,
        "tightening": max(m["tightening_shift"]) <= 1e-4,
        "target": math.isclose(m["target"], 1.25 * m["interior_min"], rel_tol=1e-12),
        "stored_verdict": d["passed"],
    })


def test_criterion_02_profile_invariants(suite, verdict):
    d = measured(suite, 2)
    m = d["measured"]
    verdict(2, {"positive": m["positive"], "increasing": m["increasing"],
                "sign_changes": m["max_ddu_sign_changes"] <= 1,
                "alpha": m["max_alpha_wiggle"] < 1e-4, "stored_verdict": d["passed"]})


def test_criterion_03_junction_geometry(suite, verdict):
    d = measured(suite, 3)
    verdict(3, {"angles": d["measured"]["max_angle_error"] <= 1e-12,
                "stored_verdict": d["passed"]})


def test_criterion_04_entropy_closed_forms(suite, verdict):
    d = measured(suite, 4)
    m = d["measured"]
    target = math.sqrt(2 * math.pi / math.e)
    verdict(4, {"centered": max(m["centered_errors"].values()) <= 1e-8,
                "cases": len(m["centered_errors"]) == 6,
                "hyperplane": m["hyperplane"] == 1.0,
                "sphere": abs(m["sphere"] - target) <= 1e-10,
                "bruteforce": abs(m["sphere_bruteforce"] - target) <= 1e-10,
                "stored_verdict": d["passed"]})


def test_criterion_05_cone_entropy(suite, verdict):
    d = measured(suite, 5)
    r = d["measured"]["reports"]
    checks = {f"m={m}": r[m]["lambda"] < 2.0 - r[m]["quad_error"] for m in ("0.25", "0.5", "1.0")}
    checks["cylinder"] = abs(r["8.0"]["lambda"] - reference_entropy("cylinder", 1)) < 0.05
    checks["stored_verdict"] = d["passed"]
    verdict(5, checks)


def test_criterion_06_simons(suite, verdict):
    d = measured(suite, 6)
    m = d["measured"]
    note = json.loads((suite[0] / "suite-a" / "criterion_06" / "simons_2_1.json").read_text())
    verdict(6, {"agreement": m["max_difference"] <= 1e-10, "below_two": m["max_theta"] < 2.0,
                "planar": abs(m["theta_2_1"] - math.pi / 2) <= 1e-12,
                "note": "3/2" in note.get("paper_discrepancy", ""),
                "stored_verdict": d["passed"]})


def test_criterion_07_eigenanalysis(suite, verdict):
    d = measured(suite, 7)
    m = d["measured"]
    Cs = m["envelope_constants"]
    verdict(7, {"negative": m["mu1"] < 0, "below_half": m["mu1"] < 0.5,
                "rayleigh": m["rayleigh_gap"] <= 1e-10 * max(1.0, abs(m["mu1"])),
                "grid_halving": abs(m["extrapolated"][1] - m["extrapolated"][0]) < 1e-4,
                "positive": m["positive"],
                "envelope_finite": all(math.isfinite(c) for c in Cs),
                "envelope_stable": all(b / a < 1.5 for a, b in zip(Cs, Cs[1:])),
                "stored_verdict": d["passed"]})


def test_criterion_08_linearization(suite, verdict):
    d = measured(suite, 8)
    m = d["measured"]
    errs = m["relative_errors"]
    verdict(8, {"order": min(m["orders"]) >= 0.9,
                "decreasing": errs[0] > errs[1],
                "certificates": all(c["c"] > 0 for c in m["certificates"].values()),
                "stored_verdict": d["passed"]})


def test_criterion_09_stationarity(suite, verdict):
    d = measured(suite, 9)
    m = d["measured"]
    verdict(9, {"drift": m["drift_200"] < 1e-3,
                "second_order": 1.8 <= m["order"] <= 2.2,
                "stored_verdict": d["passed"]})


def test_criterion_10_flow_line(suite, verdict):
    d = measured(suite, 10)
    m = d["measured"]
    target = -m["mu1"]
    verdict(10, {f"rate_{k}": abs(v - target) <= 0.2 * target for k, v in m["rates"].items()}
            | {"stored_verdict": d["passed"]})


def test_criterion_11_neck_pinch(suite, verdict):
    d = measured(suite, 11)
    m = d["measured"]
    ev, oracle = m["event"], m["cylinder_oracle"]
    ref = math.sqrt(2.0)
    verdict(11, {"event": ev["type"] == "neck_pinch" and not ev["inconclusive"],
                 "location": abs(ev["location"]) <= 2 * m["spacing"],
                 "exponent": abs(ev["fit"]["exponent"] - 0.5) <= 0.05,
                 "prefactor": abs(ev["fit"]["prefactor"] - ref) <= 0.1 * ref,
                 "oracle_exponent": abs(oracle["fit"]["exponent"] - 0.5) <= 0.05,
                 "oracle_prefactor": abs(oracle["fit"]["prefactor"] - ref) <= 0.1 * ref,
                 "stored_verdict": d["passed"]})


def test_criterion_12_tube_estimate(suite, verdict):
    d = measured(suite, 12)
    runs = d["measured"]
    verdict(12, {f"{k}_passed": r["passed"] for k, r in runs.items()}
            | {f"{k}_uniform_n_prime": math.isfinite(r["n_prime"]) for k, r in runs.items()}
            | {"stored_verdict": d["passed"]})


def test_criterion_13_determinism(suite, verdict, tmp_path):
    out, code = suite
    rows = json.loads((out / "report.json").read_text())["criteria"]
    status = {r["criterion"]: r["status"] for r in rows}
    identical = all(
        (out / "suite-a" / p.relative_to(out / "suite-b")).read_bytes() == p.read_bytes()
        for p in (out / "suite-b").rglob("*") if p.is_file() and p.name != "manifest.json")
    # a second report over the same runs reproduces the report bytes
    rerun = tmp_path / "again"
    code2 = dispatch(["report", str(out / "suite-a"), str(out / "suite-b"), "--out", str(rerun)])
    verdict(13, {"exit_code": code == 0 and code2 == 0,
                 "all_pass": sorted(status) == list(range(1, 14))
                 and all(s == "pass" for s in status.values()),
                 "identical_runs": identical,
                 "report_rerun": (rerun / "report.json").read_bytes()
                 == (out / "report.json").read_bytes()})
