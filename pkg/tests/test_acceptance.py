"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line with its runtime."""

import contextlib
import itertools
import json
import time

import numpy as np

from acrlab.algebra import Poly, RateCoeff
from acrlab.cli import main
from acrlab.exprlang import parse_expr
from acrlab.massaction import build_field, eval_field
from acrlab.netparse import parse_network
from acrlab.odeint import integrate
from acrlab.oracles import canonical_b, motif2_general_a
from acrlab.pel import VERIFIED_SYMBOLIC, decompose, find_acr_candidates, predict_limit
from acrlab.scenarios import get_scenario, list_scenarios, run_scenario

import test_properties as props
from conftest import CANONICAL, IDHKP, MOTIF1, MOTIF2, MOTIF3, MOTIF5

S = RateCoeff.symbol
KSTAR = S("k2") / S("k1")


@contextlib.contextmanager
def criterion(capsys, number, title, budget):
    """Time the body, print one verdict line, then fail on error or overrun."""
    start = time.perf_counter()
    err = None
    try:
        yield
    except AssertionError as exc:
        err = exc
    elapsed = time.perf_counter() - start
    within = budget is None or elapsed < budget
    verdict = "PASS" if err is None and within else "FAIL"
    bound = f" < {budget:g}s" if budget is not None else ""
    with capsys.disabled():
        print(f"\ncriterion {number:>2}: {verdict}  {title}  [{elapsed:.2f}s{bound}]")
    if err is not None:
        raise err
    assert within, f"criterion {number} took {elapsed:.2f}s, budget {budget}s"


def _limit(text, species, x0, t_end, **kw):
    return integrate(build_field(parse_network(text)), None, x0, t_end, **kw).column(species)[-1]


def test_criterion_01_decomposition_exactness(capsys):
    with criterion(capsys, 1, "decomposition identity on 1000 points per field; IDHKP load", 1.0):
        rng = np.random.default_rng(2024)
        cases = [(MOTIF1, "A", None), (MOTIF2.format(ga="exp(0.3*t)", gb="1"), "A", None), (MOTIF3, "A", None),
                 (MOTIF5, "A", None), (CANONICAL, "A", None),
                 (IDHKP, "Y", S("k3") / S("k4") * (1 + S("k5") / S("k6")))]
        for text, sp, xs in cases:
            fld = build_field(parse_network(text))
            dec = decompose(fld, sp, xs if xs is not None else find_acr_candidates(fld, sp)[0])
            b = fld.bindings()
            xstar = dec.x_star_value(b)
            i = dec.index
            for _ in range(1000):
                x = rng.uniform(0.0, 10.0, len(fld.species))
                t = rng.uniform(0.0, 20.0)
                f, g = dec.evaluate(x, t)
                F = eval_field(fld, b, x, t)[i]
                assert abs(f * (xstar - x[i]) + g - F) <= 1e-12 * (1 + abs(F)), (sp, x, t)
            if sp == "Y":
                sp_ = fld.species

                def v(name, c):
                    return Poly.monomial(sp_, tuple(int(s == name) for s in sp_), c)

                assert dec.load == (S("k5") / S("k6")) * (v("C2", S("k6")) - v("C1", S("k3")))


def test_criterion_02_zero_load_ratio_identity(capsys):
    with criterion(capsys, 2, "|k*-a| exp(int k1 b) / |k*-a0| stays within 1e-5 of 1", 1.0):
        text = "species A, B; A + B -> 2 B @ k1 = 1; B -> A @ k2 = 1;"
        fld = build_field(parse_network(text))
        dec = decompose(fld, "A", KSTAR)
        tr = integrate(fld, None, [2.0, 2.0], 10.0, dec=dec, rtol=1e-10, atol=1e-12)
        # the engine column holds a - k* without the cancellation of 1 - a
        gap = np.abs(tr.engine)
        keep = gap > 1e-12
        ratio = gap[keep] * np.exp(tr.column("int_f")[keep]) / 1.0
        assert keep.sum() > 20
        assert np.all(np.abs(ratio - 1.0) <= 1e-5), float(np.max(np.abs(ratio - 1.0)))


def test_criterion_03_closed_form_oracles(capsys):
    with criterion(capsys, 3, "integrator agrees with the closed-form oracles on a 20-point grid", 5.0):
        grid = np.linspace(0.5, 10.0, 20)
        fld = build_field(parse_network(CANONICAL))
        for a0, b0 in [(1.0, 3.0), (0.5, 1.0), (1.0, 1.0)]:  # above, below and on the k* = 2 boundary
            tr = integrate(fld, None, [a0, b0], 10.0, rtol=1e-11, atol=1e-14, checkpoints=grid)
            sim = np.interp(grid, tr.times, tr.column("B"))
            ref = np.array([canonical_b(1.0, 2.0, a0, b0, t) for t in grid])
            assert np.max(np.abs(sim - ref) / np.abs(ref)) <= 1e-6, (a0, b0)
        for ga, tol_tail in [("0", 1e-6), ("1", 1e-6), ("exp(0.5*t)", 1e-4)]:
            text = MOTIF2.format(ga=ga, gb="0")
            fld = build_field(parse_network(text))
            tr = integrate(fld, None, [1.0, 1.0], 10.0, rtol=1e-11, atol=1e-14, checkpoints=grid)
            sim = np.interp(grid, tr.times, tr.column("A"))
            g = None if ga == "0" else parse_expr(ga)
            ref = np.array([motif2_general_a(1.0, 2.0, 1.0, 1.0, g, t) for t in grid])
            rel = np.abs(sim - ref) / np.abs(ref)
            tol = np.where(grid > 5.0, tol_tail, 1e-6)
            assert np.all(rel <= tol), (ga, float(rel.max()))


def test_criterion_04_motif2_inflow_limits(capsys):
    with criterion(capsys, 4, "negative-slope motif limits for constant and exponential inflows", 10.0):
        for ga, gb in [("1", "1"), ("2", "0.5"), ("0.5", "2")]:
            assert abs(_limit(MOTIF2.format(ga=ga, gb=gb), "A", [1, 1], 200.0) - 2.0) <= 1e-2
        for (al, be), want in zip([(0.3, 0.1), (0.3, 0.3), (0.1, 0.3)], [2.3, 2.15, 2.0]):
            text = MOTIF2.format(ga=f"exp({al}*t)", gb=f"exp({be}*t)")
            assert abs(_limit(text, "A", [1, 1], 30.0) - want) <= 1e-2, (al, be)


def test_criterion_05_polynomial_chain(capsys):
    with criterion(capsys, 5, "chain inflow of degree d = 1, 2, 3 reaches k2/k1 by t = 2000", 30.0):
        for d in (1, 2, 3):
            sc = get_scenario(f"motif2-poly-chain-d{d}")
            val = _limit(sc.network_text, sc.acr_species, sc.x0, 2000.0)
            assert abs(val - 2.0) <= 5e-2, (d, val)


def test_criterion_06_outflow_limits(capsys):
    with criterion(capsys, 6, "equal-outflow limits k* + l/k1 and k* + l/k1 + alpha/k1", 10.0):
        sc = get_scenario("outflow-poly")
        assert abs(_limit(sc.network_text, sc.acr_species, sc.x0, 200.0) - (2.0 + 0.5)) <= 1e-2
        text = ("species A, B; inflow A @ exp(0.2*t); A + B -> 2 B @ k1 = 1; B -> A @ k2 = 2;"
                " outflow A @ 0.5; outflow B @ 0.5;")
        assert abs(_limit(text, "A", [1, 1], 60.0) - (2.0 + 0.5 + 0.2)) <= 1e-2


def test_criterion_07_quadratic_power(capsys):
    with criterion(capsys, 7, "quadratic-power motif: constant and doubly exponential inflow", 10.0):
        assert abs(_limit(MOTIF5, "A", [1, 1], 200.0) - 2.0) <= 1e-2
        res = run_scenario(get_scenario("motif5-tetration"))
        assert abs(res.observed - 2.0) <= 5e-2, res.observed
        assert any(c.name == "forcing guard" for c in res.checks)
        pred = predict_limit(get_scenario("motif5-tetration").network(), "A")
        status = {h.name: h.status for h in pred.hypotheses}
        assert status["g_a'/g_a^(3/2) -> 0"] == VERIFIED_SYMBOLIC


def test_criterion_08_zero_slope_motif(capsys):
    with criterion(capsys, 8, "zero-slope motif reaches k* by t = 2000 with alpha = 0", 10.0):
        assert abs(_limit(MOTIF3, "A", [1, 1], 2000.0) - 2.0) <= 5e-2
        pred = predict_limit(parse_network(MOTIF3), "A", x0=[1, 1])
        assert pred.alpha == 0.0 and pred.rule == "Motif3Thm"


ENZ = ("species X, Y, E, C; {flows} X + E -> C @ k1 = 1; C -> X + E @ k2 = 1; C -> Y + E @ k3 = 2;"
       " Y + C -> X + C @ k4 = 1;")


def test_criterion_09_enzyme(capsys):
    with criterion(capsys, 9, "enzyme network limits with and without enzyme or complex inflow", 20.0):
        for gx, gy, ge in itertools.product((0.0, 0.3), repeat=3):
            flows = "inflow C @ 0.5;" + "".join(f" inflow {s} @ {v};" for s, v in (("X", gx), ("Y", gy), ("E", ge)) if v)
            val = _limit(ENZ.format(flows=flows), "Y", [1, 1, 1, 1], 200.0)
            assert abs(val - 2.0) <= 1e-2, (gx, gy, ge, val)
        val = _limit(ENZ.format(flows="inflow X @ 0.4; inflow Y @ 0.2;"), "Y", [1, 1, 1, 1], 200.0)
        assert abs(val - (2.0 + 0.2 / 2.0)) <= 1e-2, val


def test_criterion_10_predictor_matches_simulator(capsys, tmp_path):
    with criterion(capsys, 10, "verify --all exits 0; predicted and observed limits agree", None):
        out = tmp_path / "verify.json"
        assert main(["verify", "--all", "--format", "json", "-o", str(out)]) == 0
        results = json.loads(out.read_text())
        assert len(results) >= 18
        tol = {sc.id: sc.tolerance for sc in list_scenarios()}
        compared = 0
        for r in results:
            if r["status"] != "pass" or r["rule"] in (None, "NumericFallback") or r["observed"] is None:
                continue
            assert abs(r["predicted"] - r["observed"]) <= tol[r["id"]], r
            compared += 1
        assert compared >= 15


def test_criterion_11_property_suites(capsys):
    with criterion(capsys, 11, "round-trip, derivative, conservation, nonnegativity and gate properties", None):
        props.test_parse_print_round_trip()
        props.test_derivative_matches_central_difference()
        props.test_conservation_laws_hold_along_trajectories()
        props.test_trajectories_stay_nonnegative()
        props.test_compatibility_gate_matches_total_mass()
        props.test_compatibility_gate_predicts_simulated_limit()
