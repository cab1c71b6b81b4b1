"""Failure-bound evaluators: formula fidelity, monotonicity, trends."""

import math

import mpmath
import pytest

from msplab.bounds import (
    BoundParams,
    ClawInversionReport,
    claw_inversion_check,
    eval_failure_bounds,
    minmax_scan,
    y_grid,
)
from msplab.errors import ParameterError

mpmath.mp.dps = 50


def mp_f(n, x, ell, y):
    x, ell, y = map(mpmath.mpf, (x, ell, y))
    lead = 1 - 2 * x * ell * mpmath.e ** (-2 * x / 3)
    inv = 1 - mpmath.mpf(0.5) ** (ell * ell * x / 2)
    return lead * (1 - y) ** (4 * x) * inv


def mp_g(n, x, ell, y):
    n, ell, y = map(mpmath.mpf, (n, ell, y))
    nm04 = n ** mpmath.mpf("-0.4")
    if y < nm04 / 2:
        return mpmath.mpf(0)
    base = 1 - (2 * y - nm04) / (2 * ell)
    expo = n ** mpmath.mpf("0.6") * (4 * ell - nm04) / (32 * ell * ell)
    return 1 - base ** expo


@pytest.mark.parametrize("n", [100, 10 ** 4, 10 ** 6])
def test_formulas_match_high_precision(n):
    p = BoundParams(n)
    for y in (0.0, p.g_breakpoint, p.g_breakpoint * 1.5, p.ell / 2, p.ell):
        f, g = eval_failure_bounds(p, y)
        f_ref = float(mp_f(n, p.x, p.ell, y))
        g_ref = float(mp_g(n, p.x, p.ell, y))
        assert f == pytest.approx(f_ref, rel=1e-12, abs=1e-300)
        assert g == pytest.approx(g_ref, rel=1e-12, abs=1e-15)


def test_boundary_cases():
    p = BoundParams(10 ** 4)
    f1, _ = eval_failure_bounds(p, 1.0)
    assert f1 == 0.0  # the (1-y)^(4x) factor kills f at y = 1
    _, g0 = eval_failure_bounds(p, p.g_breakpoint * 0.999)
    assert g0 == 0.0
    _, g_at = eval_failure_bounds(p, p.g_breakpoint)
    assert g_at == 0.0  # continuous at the breakpoint
    with pytest.raises(ParameterError):
        eval_failure_bounds(p, 1.5)
    with pytest.raises(ParameterError):
        BoundParams(10, x=20)
    with pytest.raises(ParameterError):
        BoundParams(10, ell=1.5)


def test_grid_and_monotonicity():
    p = BoundParams(10 ** 4)
    grid = y_grid(p)
    assert grid[0] == 0.0 and grid[-1] == pytest.approx(p.ell)
    assert any(abs(v - p.g_breakpoint) < 1e-18 for v in grid)
    scan = minmax_scan(p)
    assert scan.f_nonincreasing and scan.g_nondecreasing
    assert 0 < scan.value < 1


def test_minmax_trend_toward_one():
    small = minmax_scan(BoundParams(10 ** 4)).value
    big = minmax_scan(BoundParams(10 ** 6)).value
    assert big > small


def test_claw_inversion_default_passes():
    rep = claw_inversion_check(10 ** 4, trials=20000, master_seed=5)
    assert rep.x_claws == 16
    assert rep.bound == pytest.approx(1 - 0.5 ** (rep.ell ** 2 * 16 / 2))
    assert rep.passes
    assert rep.estimate > rep.bound  # comfortably, not just within 3 sigma


def test_claw_inversion_degenerate_and_full_window():
    zero = claw_inversion_check(100, x=0, trials=500)
    assert zero.estimate == 0.0 and zero.bound == 0.0 and zero.passes
    # the whole tail after the horizon, every claw in the window
    full = claw_inversion_check(400, x=400, ell=1 - math.exp(-1), trials=4000, master_seed=9)
    assert full.passes and full.estimate > 0.99
    with pytest.raises(ParameterError):
        claw_inversion_check(100, ell=0.9, trials=10)  # window exceeds [0,1]


def test_reports_are_plain_data():
    rep = claw_inversion_check(100, trials=100)
    assert isinstance(rep, ClawInversionReport)
    assert 0 <= rep.estimate <= 1
