import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from acrlab.exprlang import parse_expr
from acrlab.oracles import (
    ORACLES, H_outflow, canonical_a, canonical_b, counterexample_x1_x2, motif2_general_a, motif2_general_b, quad,
    total_G,
)


def test_boundary_branch_rational_decay():
    assert canonical_b(1, 1, 0, 1, 2) == pytest.approx(1 / 3, rel=1e-15)


def test_logistic_branch_values():
    assert canonical_b(1, 1, 2, 2, 0) == pytest.approx(2.0, rel=1e-15)
    for t in (0.5, 1.0, 3.0):
        assert canonical_b(1, 1, 2, 2, t) == pytest.approx(3 / (1 + 0.5 * math.exp(-3 * t)), rel=1e-14)


@pytest.mark.parametrize("a0, b0, limit", [(2, 2, 2.0), (0.5, 1, 0.0), (0.2, 0.3, 0.0), (1.5, 1.5, 1.0)])
def test_canonical_long_time_limit(a0, b0, limit):
    assert canonical_b(1, 2, a0, b0, 400.0) == pytest.approx(limit, abs=1e-12)


def test_canonical_time_scaling_by_k1():
    ref = solve_ivp(lambda t, y: [-2 * y[0] * y[1] + 3 * y[1], 2 * y[0] * y[1] - 3 * y[1]], (0, 2), [1.0, 3.0],
                    method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    for t in (0.3, 1.0, 2.0):
        assert canonical_b(2, 3, 1, 3, t) == pytest.approx(ref.sol(t)[1], rel=1e-9)
        assert canonical_a(2, 3, 1, 3, t) == pytest.approx(ref.sol(t)[0], rel=1e-9)


def test_motif2_without_inflow_matches_canonical():
    for t in (1.0, 5.0):
        assert motif2_general_a(1, 2, 1, 3, None, t) == pytest.approx(canonical_a(1, 2, 1, 3, t), rel=1e-9)
        assert motif2_general_a(1, 2, 1, 3, parse_expr("0"), t) == pytest.approx(canonical_a(1, 2, 1, 3, t), rel=1e-9)


def test_motif2_initial_condition():
    assert motif2_general_a(1, 2, 1.3, 0.7, parse_expr("exp(0.5*t)"), 0.0) == 1.3
    assert motif2_general_b(1, 2, 1.3, 0.7, parse_expr("exp(0.5*t)"), 0.0) == pytest.approx(0.7, rel=1e-15)


def test_motif2_constant_inflow_approaches_k_star():
    g = parse_expr("1")
    # the gap decays like 1/t, so t = 60 is still about 1.7e-2 away
    assert motif2_general_a(1, 2, 1, 1, g, 60.0) == pytest.approx(2.0, abs=2e-2)
    assert motif2_general_a(1, 2, 1, 1, g, 2000.0) == pytest.approx(2.0, abs=1e-3)


@pytest.mark.parametrize("g", ["1", "exp(0.5*t)", "t^2 + 1", "log(t + 1) + 1"])
def test_motif2_oracle_satisfies_its_ode(g):
    ga = parse_expr(g)
    fn = lambda s: float(eval(g.replace("^", "**").replace("exp", "math.exp").replace("log", "math.log"),
                              {"math": math, "t": s}))
    k1, k2, a0, b0 = 1.0, 2.0, 1.0, 1.0
    for t in np.linspace(0.5, 6, 8):
        h = 1e-4 * max(1.0, t)
        da = (motif2_general_a(k1, k2, a0, b0, ga, t + h) - motif2_general_a(k1, k2, a0, b0, ga, t - h)) / (2 * h)
        a = motif2_general_a(k1, k2, a0, b0, ga, t)
        b = motif2_general_b(k1, k2, a0, b0, ga, t)
        rhs = -k1 * a * b + k2 * b + fn(t)
        assert da == pytest.approx(rhs, rel=1e-5, abs=1e-7)


def test_motif2_against_reference_integrator():
    ref = solve_ivp(lambda t, y: [-y[0] * y[1] + 2 * y[1] + math.exp(0.5 * t), y[0] * y[1] - 2 * y[1]], (0, 8),
                    [1.0, 1.0], method="DOP853", rtol=1e-12, atol=1e-12, dense_output=True)
    g = parse_expr("exp(0.5*t)")
    for t in (1.0, 4.0, 8.0):
        assert motif2_general_a(1, 2, 1, 1, g, t) == pytest.approx(ref.sol(t)[0], rel=1e-7)


def test_counterexample_initial_values():
    assert counterexample_x1_x2(1, 1, 1.5, 0.5, 0.0) == pytest.approx((1.5, 0.5), rel=1e-15)


def test_counterexample_against_reference_integrator():
    ref = solve_ivp(lambda t, y: [-y[0] ** 2 - y[0] * y[1], -y[1] ** 2], (0, 5), [1.0, 1.0], method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    for t in (1.0, 2.5, 5.0):
        x1, x2 = counterexample_x1_x2(1, 1, 1, 1, t)
        assert x2 == pytest.approx(ref.sol(t)[1], rel=1e-9)
        assert x1 == pytest.approx(ref.sol(t)[0], rel=1e-6)
    x1, x2 = counterexample_x1_x2(1, 1, 1, 1, 1.0)
    assert x2 == 0.5
    assert x1 == pytest.approx(1 / (2 * (1 + math.log(2))), rel=1e-15)


def test_counterexample_t_x1_decreases():
    vals = [t * counterexample_x1_x2(1, 1, 1, 1, t)[0] for t in (1e3, 1e4, 1e5)]
    assert vals[0] > vals[1] > vals[2]
    # asymptotic form 1/(k1 t log(1 + b2 k2 t))
    t = 1e8
    assert counterexample_x1_x2(1, 1, 1, 1, t)[0] * t * math.log(1 + t) == pytest.approx(1.0, rel=1e-1)


def test_total_G_closed_form():
    for alpha in (0.1, 0.3, 1.0):
        g = parse_expr(f"exp({alpha}*t)")
        for t in (0.5, 5.0, 20.0):
            assert total_G(g, None, t) == pytest.approx((math.exp(alpha * t) - 1) / alpha, rel=1e-13)
    assert total_G(parse_expr("1"), parse_expr("t"), 2.0) == pytest.approx(4.0, rel=1e-15)


def test_H_constant_inflow():
    for ell in (0.1, 0.5, 2.0):
        for t in (0.5, 3.0, 30.0):
            closed = 1.7 / ell * (1 - math.exp(-ell * t))
            assert H_outflow(parse_expr("1.7"), ell, t) == pytest.approx(closed, rel=1e-13)
            assert quad(lambda s: math.exp(ell * (s - t)) * 1.7, 0, t) == pytest.approx(closed, rel=1e-10)


def test_zero_inflows():
    z = parse_expr("0")
    assert total_G(z, z, 7.0) == 0.0
    assert H_outflow(z, 0.4, 7.0) == 0.0


@pytest.mark.parametrize("g", ["exp(0.3*t)", "t^2 + 2", "t*exp(0.1*t)"])
def test_H_reduces_to_G_without_outflow(g):
    e = parse_expr(g)
    assert H_outflow(e, 0.0, 6.0) == total_G(e, None, 6.0)


def test_H_non_exp_poly_uses_quadrature():
    g = parse_expr("log(t + 1)")
    t, ell = 4.0, 0.5
    want = quad(lambda s: math.exp(ell * (s - t)) * math.log(s + 1), 0, t)
    assert H_outflow(g, ell, t) == pytest.approx(want, rel=1e-12)


def test_registry():
    assert {o.name for o in ORACLES} >= {"canonical_b", "motif2_general_a", "counterexample_x1_x2", "total_G",
                                        "H_outflow"}
