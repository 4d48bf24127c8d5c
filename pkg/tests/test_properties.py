"""Randomized invariants driven by hypothesis."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from acrlab.exprlang import classify_growth, diff_expr, eval_expr, parse_expr
from acrlab.massaction import build_field, eval_field, is_compatible, kinetic_subspace
from acrlab.netparse import NetworkSyntaxError, parse_network, print_network
from acrlab.odeint import IntegratorError, integrate
from acrlab.pel import decompose, find_acr_candidates

from conftest import CANONICAL, IDHKP, MOTIF1, MOTIF2, MOTIF3, MOTIF5

SPECIES = ["A", "B", "C", "D", "E", "F"]
rate = st.floats(0.05, 5.0, allow_nan=False).map(lambda v: round(v, 3))


@st.composite
def complexes(draw, species):
    chosen = draw(st.lists(st.sampled_from(species), max_size=2, unique=True))
    return {s: draw(st.integers(1, 2)) for s in chosen}


def complex_text(c):
    return " + ".join(s if k == 1 else f"{k} {s}" for s, k in sorted(c.items())) or "0"


@st.composite
def network_texts(draw, flows=True, conservative=False):
    n = draw(st.integers(1, 6))
    species = SPECIES[:n]
    lines = []
    seen = set()
    for j in range(draw(st.integers(1, 8))):
        lhs = draw(complexes(species))
        rhs = draw(complexes(species))
        if conservative:
            # bounded dynamics: each reaction keeps the total molecule count
            rhs = {s: k for s, k in rhs.items()}
            total = sum(lhs.values())
            if total == 0 or sum(rhs.values()) != total:
                continue
        key = (complex_text(lhs), complex_text(rhs))
        if lhs == rhs or key in seen:
            continue
        seen.add(key)
        lines.append(f"{key[0]} -> {key[1]} @ r{j} = {draw(rate)};")
    assume(lines)
    if flows:
        for s in draw(st.lists(st.sampled_from(species), max_size=2, unique=True)):
            lines.append(f"inflow {s} @ {draw(rate)} + {draw(rate)}*exp(-{draw(rate)}*t);")
        for s in draw(st.lists(st.sampled_from(species), max_size=2, unique=True)):
            lines.append(f"outflow {s} @ {draw(rate)};")
    body = "\n".join(lines)
    used = [s for s in species if any(s in ln.split("@")[0].replace("+", " ").split() for ln in lines)]
    return f"species {', '.join(used)};\n{body}\n"


@settings(max_examples=250, deadline=None)
@given(network_texts())
def test_parse_print_round_trip(text):
    try:
        net = parse_network(text)
    except NetworkSyntaxError:
        assume(False)
    printed = print_network(net)
    assert parse_network(printed) == net
    assert print_network(parse_network(printed)) == printed


# ------------------------------------------------------------- derivatives

coef = st.floats(0.1, 3.0).map(lambda v: round(v, 3))
lam = st.floats(-1.0, 1.0).map(lambda v: round(v, 3))


@st.composite
def exp_poly_text(draw):
    terms = []
    for _ in range(draw(st.integers(1, 4))):
        c, k, r = draw(coef), draw(st.integers(0, 3)), draw(lam)
        body = f"{c}"
        if k:
            body += f"*t^{k}"
        if r:
            body += f"*exp({r}*t)"
        terms.append(body)
    text = " + ".join(terms)
    wrap = draw(st.sampled_from(["{}", "({})^2", "log(1 + {})", "({}) * ({})", "exp(-0.1*({}))"]))
    return wrap.replace("{}", text)


@settings(max_examples=1100, deadline=None)
@given(exp_poly_text(), st.floats(0.1, 10.0))
def test_derivative_matches_central_difference(text, t):
    e = parse_expr(text)
    h = 1e-5
    fd = (eval_expr(e, t + h) - eval_expr(e, t - h)) / (2 * h)
    v = eval_expr(diff_expr(e), t)
    assert abs(v - fd) <= 1e-4 * (1 + abs(v))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(coef, st.integers(0, 3), lam), min_size=1, max_size=4))
def test_growth_class_agrees_with_probing(terms):
    text = " + ".join(f"{c}*t^{k}*exp({r}*t)" for c, k, r in terms)
    g = classify_growth(parse_expr(text))
    e = parse_expr(text)
    top = max(r for _, _, r in terms)
    if top != 0:
        # decaying sums are reported with their (negative) leading rate too
        assert g.tag == "ExpGrowth" and g.rate == pytest.approx(top)
        assert g.degree == max(k for _, k, r in terms if r == top)
        slope = (math.log(eval_expr(e, 300.0)) - math.log(eval_expr(e, 290.0))) / 10.0
        assert slope == pytest.approx(top, abs=0.05)
    elif any(r == 0 and k > 0 for _, k, r in terms):
        assert g.tag == "PolyGrowth"
        est = math.log(eval_expr(e, 2e6) / eval_expr(e, 1e6)) / math.log(2.0)
        assert est == pytest.approx(g.degree, abs=0.05)
    else:
        assert g.tag == "BoundedNonzero"
        assert eval_expr(e, 1e4) == pytest.approx(eval_expr(e, 2e4), rel=1e-6)


# ------------------------------------------------------- flows of the ODE


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(network_texts(flows=False, conservative=True), st.data())
def test_conservation_laws_hold_along_trajectories(text, data):
    net = parse_network(text)
    laws = kinetic_subspace(net, closed=True).conservation_laws()
    assume(laws)
    x0 = data.draw(st.lists(st.floats(0.1, 3.0), min_size=len(net.species), max_size=len(net.species)))
    try:
        tr = integrate(build_field(net), None, x0, 5.0, rtol=1e-10, atol=1e-12)
    except IntegratorError:
        assume(False)
    for w in laws:
        w = np.asarray(w, dtype=float)
        q = tr.states @ w
        assert np.max(np.abs(q - q[0])) <= 1e-7 * (1 + np.abs(w) @ np.abs(np.asarray(x0)))


@settings(max_examples=60, deadline=None)
@given(network_texts(), st.data())
def test_trajectories_stay_nonnegative(text, data):
    try:
        net = parse_network(text)
    except NetworkSyntaxError:
        assume(False)
    x0 = data.draw(st.lists(st.floats(0.0, 3.0), min_size=len(net.species), max_size=len(net.species)))
    try:
        tr = integrate(build_field(net), None, x0, 3.0, max_steps=20_000)
    except IntegratorError:
        assume(False)
    assert tr.states.min() >= -1e-8


# ---------------------------------------------------- compatibility gate


@settings(max_examples=300, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.0, 5.0), st.floats(0.5, 2.0), st.floats(0.5, 4.0))
def test_compatibility_gate_matches_total_mass(a0, b0, k1, k2):
    net = parse_network(CANONICAL)
    ks = k2 / k1
    assume(abs(a0 + b0 - ks) > 1e-9)
    assert is_compatible(net, [a0, b0], "A", ks) == (a0 + b0 > ks)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 4.0), st.floats(0.1, 4.0))
def test_compatibility_gate_predicts_simulated_limit(a0, b0):
    net = parse_network(CANONICAL)
    assume(abs(a0 + b0 - 2.0) > 0.2)
    tr = integrate(build_field(net), None, [a0, b0], 200.0)
    a_end = tr.column("A")[-1]
    if is_compatible(net, [a0, b0], "A", 2.0):
        assert a_end == pytest.approx(2.0, abs=1e-3)
    else:
        assert a_end == pytest.approx(a0 + b0, abs=1e-3)


# ------------------------------------------------ decomposition identity

FIELDS = {
    "motif1": (MOTIF1, "A"), "motif2": (MOTIF2.format(ga="exp(0.3*t)", gb="t"), "A"), "motif3": (MOTIF3, "A"),
    "motif5": (MOTIF5, "A"), "canonical": (CANONICAL, "A"),
}


def _decompositions():
    out = []
    for text, sp in FIELDS.values():
        fld = build_field(parse_network(text))
        out.append((fld, decompose(fld, sp, find_acr_candidates(fld, sp)[0])))
    fld = build_field(parse_network(IDHKP))
    from acrlab.algebra import RateCoeff
    S = RateCoeff.symbol
    out.append((fld, decompose(fld, "Y", S("k3") / S("k4") * (1 + S("k5") / S("k6")))))
    return out


DECS = _decompositions()


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from(range(len(DECS))), st.lists(st.floats(0.0, 10.0), min_size=5, max_size=5),
       st.floats(0.0, 20.0))
def test_decomposition_identity(k, point, t):
    fld, dec = DECS[k]
    x = np.asarray(point[: len(fld.species)])
    f, g = dec.evaluate(x, t)
    F = eval_field(fld, None, x, t)[dec.index]
    assert abs(f * (dec.x_star_value() - x[dec.index]) + g - F) <= 1e-12 * (1 + abs(F))
