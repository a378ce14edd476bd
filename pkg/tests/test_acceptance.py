"""Acceptance criteria, one test each, run through the scenario harness.

Every test records a PASS/FAIL line; the lines are printed together at the
end of the pytest run (see ``pytest_terminal_summary`` in conftest.py).
Tolerances are the harness defaults; none is loosened here.
"""

import time

import pytest

from cxlegendre.harness import ScenarioConfig, run_scenario

FS = {"variant": "fubini-study", "dimension": 1}
_cache = {}


def report(name, **overrides):
    key = (name, repr(sorted(overrides.items())))
    if key not in _cache:
        start = time.perf_counter()
        rep = run_scenario(ScenarioConfig.named(name, **overrides))
        _cache[key] = (rep, time.perf_counter() - start)
    return _cache[key]


def checks(rep, base):
    """All checks named ``base`` or ``base[chart]``."""
    found = [c for c in rep.checks if c.name == base or c.name.startswith(base + "[")]
    assert found, f"{rep.scenario} has no check {base!r}"
    return found


def verdict(record, number, title, items, extra_ok=True, note=""):
    failed = [c for c in items if not c.passed]
    ok = not failed and extra_ok
    worst = ", ".join(f"{c.name}={c.defect:.3g} (tol {c.tolerance})" for c in items)
    record(number, title, ok, worst + (f"; {note}" if note else ""))
    assert not failed, "; ".join(f"{c.name}: {c.defect} vs {c.tolerance} {c.error or ''}" for c in failed)
    assert extra_ok, note


def test_criterion_01_fixed_point(acceptance):
    items, times = [], []
    for name in ("euclidean-fixed-point", "fubini-study-fixed-point"):
        rep, secs = report(name)
        times.append(secs)
        items += checks(rep, "flat-fixed-point") + checks(rep, "transform-of-zero")
    fast = max(times) < 10.0
    verdict(acceptance, 1, "fixed point, Euclidean and Fubini-Study", items, fast,
            f"runtime {max(times):.2f}s (limit 10s)")


def test_criterion_02_involution(acceptance):
    items, total = [], 0.0
    for name in ("flat-involution", "sphere-involution"):
        rep, secs = report(name)
        total += secs
        items += checks(rep, "involution")
    verdict(acceptance, 2, "involutivity, box and sphere", items, total < 60.0,
            f"runtime {total:.2f}s (limit 60s)")


def test_criterion_03_inverse_gradient_map(acceptance):
    items = []
    for name in ("flat-involution", "sphere-involution"):
        items += checks(report(name)[0], "composition")
    verdict(acceptance, 3, "G(L eta) inverts G(eta)", items)


def test_criterion_04_flat_pullback(acceptance):
    rep1, _ = report("flat-pullback")
    rep2, _ = report("flat-pullback-c2")
    items = checks(rep1, "pullback") + checks(rep1, "pullback-order") + checks(rep2, "pullback")
    verdict(acceptance, 4, "pullback identity in C^1 (with order) and C^2", items)


def test_criterion_05_sphere_pullback(acceptance):
    rep, _ = report("sphere-pullback")
    items = checks(rep, "pullback") + checks(rep, "chart-overlap")
    verdict(acceptance, 5, "pullback identity on the sphere", items)


def test_criterion_06_differential(acceptance):
    rep, _ = report("differential")
    verdict(acceptance, 6, "difference quotients converge at first order", checks(rep, "differential"))


def test_criterion_07_isometry(acceptance):
    rep, _ = report("isometry")
    items = checks(rep, "isometry") + checks(rep, "isometry-order")
    verdict(acceptance, 7, "Mabuchi isometry with refinement order", items)


def test_criterion_08_order_properties(acceptance):
    rep, _ = report("order-properties")
    items = checks(rep, "order-reversal") + checks(rep, "envelope-upper-bound") + checks(rep, "envelope-strict")
    verdict(acceptance, 8, "order reversal and the envelope inequality", items)


def test_criterion_09_sphere_volume(acceptance):
    rep, _ = report("sphere-volume")
    verdict(acceptance, 9, "sphere volume pi", checks(rep, "sphere-volume"))


def test_criterion_10_equivalence(acceptance):
    items = checks(report("equivalence")[0], "definition-equivalence")
    items += checks(report("equivalence", potential=FS)[0], "definition-equivalence")
    verdict(acceptance, 10, "diastasis and flat definitions agree", items)


@pytest.mark.parametrize("name", ["flat-involution", "isometry"])
def test_reports_are_deterministic(name):
    a = run_scenario(ScenarioConfig.named(name))
    b = report(name)[0]
    assert a.to_json(runtime=False) == b.to_json(runtime=False)
