import math

import numpy as np
import pytest

from circledyn import INF, parse_map
from circledyn.errors import BasePointPostcritical, NotFixed, NotRepelling
from circledyn.linearizer import (
    functional_equation_residual,
    nonvanishing_witness,
    periodic_shadow_witness,
    local_taylor,
    poincare_coeffs,
    poincare_eval,
    valiron_order,
)


def test_local_taylor_squaring():
    a = local_taylor(parse_map("z^2"), 1.0, 6)
    assert a[0] == pytest.approx(2.0)
    assert a[1] == pytest.approx(1.0)
    assert np.max(np.abs(a[2:])) < 1e-12


def test_local_taylor_chebyshev():
    a = local_taylor(parse_map("2*z^2-1"), 1.0, 6)
    assert a[0] == pytest.approx(4.0)
    assert a[1] == pytest.approx(2.0)


def test_local_taylor_ex1_at_infinity_chart():
    # multiplier of the fixed point at infinity equals the parameter c
    f = parse_map("(z^2-4)/(1+0.25*z)")
    g = f.reciprocal_chart()
    a = local_taylor(g, 0.0, 4)
    assert a[0] == pytest.approx(0.25, abs=1e-12)


def test_local_taylor_guards():
    with pytest.raises(NotFixed):
        local_taylor(parse_map("z^2"), 0.5, 4)


def test_poincare_coeffs_exponential():
    s = poincare_coeffs(parse_map("z^2"), 1.0, 20)
    expect = np.array([1.0 / math.factorial(n) for n in range(1, 21)])
    np.testing.assert_allclose(s.coeffs, expect, atol=1e-10)
    assert s.coeffs[0] == 1.0


def test_poincare_coeffs_cosh_family():
    # 2 cosh(sqrt(2 z)) linearizes 2z^2 - 1 at 1 once DPsi(0) = 1
    s = poincare_coeffs(parse_map("2*z^2-1"), 1.0, 20)
    expect = np.array([2.0**n / math.factorial(2 * n) for n in range(1, 21)])
    np.testing.assert_allclose(s.coeffs, expect, atol=1e-10)


def test_poincare_requires_repelling():
    with pytest.raises(NotRepelling):
        poincare_coeffs(parse_map("z^2"), 0.0, 8)


def test_functional_equation_residual_invariant():
    for expr, p in (("z^2", 1.0), ("2*z^2-1", 1.0), ("z^2-2", -1.0)):
        f = parse_map(expr)
        s = poincare_coeffs(f, p, 64)
        assert functional_equation_residual(s, f, samples=100) < 1e-8


def test_poincare_eval_exponential_values():
    f = parse_map("z^2")
    s = poincare_coeffs(f, 1.0, 64)
    v = poincare_eval(s, f, math.log(2))
    assert v.value == pytest.approx(2.0, abs=1e-9)
    v2 = poincare_eval(s, f, 1j * math.pi)
    assert v2.value == pytest.approx(-1.0, abs=1e-9)
    assert poincare_eval(s, f, 0.0).value == pytest.approx(1.0, abs=0.0)


def test_poincare_eval_matches_pushforward():
    f = parse_map("z^2-2")
    s = poincare_coeffs(f, -1.0, 64)
    lam = s.multiplier
    rng = np.random.default_rng(4)
    for _ in range(20):
        z = complex(rng.uniform(-5, 5), rng.uniform(-5, 5))
        base = poincare_eval(s, f, z)
        for m in range(1, 6):
            stepped = poincare_eval(s, f, z * lam ** (-m))
            for _ in range(m):
                stepped = f(stepped)
            if base.infinite or stepped.infinite:
                continue
            assert abs(base.value - stepped.value) < 1e-6 * (1 + abs(base.value))


def test_global_functional_equation_with_eval():
    f = parse_map("z^2")
    s = poincare_coeffs(f, 1.0, 64)
    rng = np.random.default_rng(9)
    for _ in range(100):
        z = complex(rng.uniform(-10, 10), rng.uniform(-10, 10))
        lhs = poincare_eval(s, f, s.multiplier * z)
        rhs = f(poincare_eval(s, f, z))
        if lhs.infinite or rhs.infinite:
            continue
        assert abs(lhs.value - rhs.value) < 1e-6 * (1 + abs(lhs.value))


def test_valiron_order_exponential():
    f = parse_map("z^2")
    s = poincare_coeffs(f, 1.0, 64)
    rho_formula, rho_measured = valiron_order(s, f)
    assert rho_formula == pytest.approx(1.0)
    assert rho_measured == pytest.approx(1.0, abs=0.1)


def test_valiron_order_half():
    f = parse_map("2*z^2-1")
    s = poincare_coeffs(f, 1.0, 64)
    rho_formula, rho_measured = valiron_order(s, f)
    assert rho_formula == pytest.approx(0.5)
    assert rho_measured == pytest.approx(0.5, abs=0.1)


def test_valiron_formula_arithmetic():
    # formula-only check: multiplier = degree^2 gives order 1/2
    assert math.log(2) / math.log(4) == pytest.approx(0.5)


def test_nonvanishing_witness_squaring():
    f = parse_map("z^2")
    s = poincare_coeffs(f, 1.0, 64)
    rep = nonvanishing_witness(s, f, count=5)
    assert rep["passed"]
    assert rep["min_abs_dpsi"] > 1e-6
    # solutions of e^z = 1 are 2 pi i Z: every witness is a multiple of 2 pi i
    for re, im in rep["solutions"]:
        q = complex(re, im) / (2j * math.pi)
        assert abs(q - round(q.real)) < 1e-8


def test_nonvanishing_guards_postcritical_base():
    f = parse_map("z^2-2")
    s = poincare_coeffs(f, 2.0, 32)
    with pytest.raises(BasePointPostcritical):
        nonvanishing_witness(s, f)


def test_nonvanishing_witness_chebyshev_like():
    f = parse_map("z^2-2")
    s = poincare_coeffs(f, -1.0, 64)
    rep = nonvanishing_witness(s, f, count=5)
    assert rep["passed"]


def test_periodic_shadow_witness_period8_squaring():
    f = parse_map("z^2")
    s = poincare_coeffs(f, 1.0, 64)
    rep = periodic_shadow_witness(s, f, 8)
    assert rep["found"]
    assert rep["distance"] <= rep["radius"]
    assert rep["stability"] == "repelling"


def test_periodic_shadow_witness_period6_chebyshev():
    f = parse_map("z^2-2")
    s = poincare_coeffs(f, -1.0, 64)
    rep = periodic_shadow_witness(s, f, 6)
    assert rep["found"]


def test_shadow_witness_low_period_typically_misses():
    f = parse_map("z^2")
    s = poincare_coeffs(f, 1.0, 64)
    rep = periodic_shadow_witness(s, f, 1)
    assert not rep["found"]


def test_poincare_at_infinity_base_point():
    # base point at infinity goes through the reciprocal chart
    lat = None
    from circledyn.classifier import lattes_doubling_map

    lat = lattes_doubling_map()
    s = poincare_coeffs(lat, INF, 32)
    assert s.chart_inverted
    assert abs(s.multiplier - 4.0) < 1e-9
    assert poincare_eval(s, lat, 0.0).infinite