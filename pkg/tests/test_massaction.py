import json
import random

import numpy as np
import pytest

from acrlab.algebra import Poly, RateCoeff
from acrlab.exprlang import ZERO, parse_expr
from acrlab.massaction import build_field, eval_field, field_to_json, is_compatible, kinetic_subspace

from conftest import CANONICAL, ENZYME, field_of, net

S = RateCoeff.symbol
ABC = ("A", "B", "C")


def mono(species, exps, c):
    return Poly.monomial(species, exps, c)


def test_field_is_coefficient_exact():
    f = field_of("species A, B, C; A + B -> 2 C @ k1 = 1; 2 C -> 2 A @ k2 = 1;")
    k1, k2 = S("k1"), S("k2")
    assert f.poly("A") == mono(ABC, (1, 1, 0), -k1) + mono(ABC, (0, 0, 2), 2 * k2)
    assert f.poly("B") == mono(ABC, (1, 1, 0), -k1)
    assert f.poly("C") == mono(ABC, (1, 1, 0), 2 * k1) + mono(ABC, (0, 0, 2), -2 * k2)
    np.testing.assert_allclose(eval_field(f, None, [1, 1, 1], 0.0), [1.0, -1.0, 0.0])


def test_canonical_raw_form():
    f = field_of(CANONICAL)
    ab = ("A", "B")
    assert f.poly("A") == mono(ab, (1, 1), -S("k1")) + mono(ab, (0, 1), S("k2"))


def test_pure_inflow_has_zero_polynomial():
    f = field_of("species A; inflow A @ t + 1; A -> 2 A @ k = 1;")
    f2 = build_field(net("species A, B; inflow A @ t + 1; B -> 2 B @ k = 1;"))
    assert f2.poly("A").is_zero()
    assert f2.inflow("A") == parse_expr("t + 1")
    assert f.inflow("A") != ZERO


def test_engine_vanishes_at_acr_value():
    f = field_of(CANONICAL)
    np.testing.assert_array_equal(eval_field(f, None, [2.0, 5.0], 3.0), [0.0, 0.0])


def test_enzyme_field_values():
    f = field_of(ENZYME.format(flows="").replace("k3 = 2", "k3 = 1"))
    np.testing.assert_allclose(eval_field(f, None, [1, 1, 1, 1], 0.0), [1.0, 0.0, 1.0, -1.0])


def test_unbound_constant_rejected():
    f = field_of(CANONICAL)
    bad = type(f)(f.species, f.polys, f.inflows, f.outflows, ())
    with pytest.raises(KeyError):
        eval_field(bad, None, [1, 1], 0.0)


def test_kinetic_subspaces():
    assert kinetic_subspace(net(CANONICAL)).basis == ((1, -1),)
    assert kinetic_subspace(net(CANONICAL + " inflow A @ 1;")).rank == 2
    ks = kinetic_subspace(net(ENZYME.format(flows="")))
    assert ks.rank == 2
    laws = {tuple(v) for v in ks.conservation_laws()}
    for w in [(1, 1, 0, 1), (0, 0, 1, 1)]:
        # the conservation space is spanned by the two known laws
        assert np.linalg.matrix_rank(np.array(list(laws) + [w])) == 2


def test_conservation_identities_are_exact():
    f = field_of(CANONICAL)
    assert (f.poly("A") + f.poly("B")).is_zero()
    flows = "inflow X @ 0.4; inflow Y @ 0.2; inflow E @ 0.1; inflow C @ 0.5;"
    e = field_of(ENZYME.format(flows=flows))
    assert (e.poly("X") + e.poly("Y") + e.poly("C")).is_zero()
    assert (e.poly("E") + e.poly("C")).is_zero()


def test_compatibility_examples():
    n = net(CANONICAL)
    assert is_compatible(n, [1, 3], "A", 2.0)
    assert not is_compatible(n, [0.5, 1], "A", 2.0)
    # boundary: a + b = k* leaves b = 0 on the hyperplane, which is not strictly positive
    assert not is_compatible(n, [1, 1], "A", 2.0)
    assert is_compatible(net(CANONICAL + " inflow A @ 1;"), [0.5, 1], "A", 2.0)
    assert not is_compatible(n, [1, 3], "A", 0.0)


def test_compatibility_closed_versus_open():
    n = net(CANONICAL + " inflow B @ 1;")
    assert is_compatible(n, [0.5, 1], "A", 2.0)
    assert not is_compatible(n, [0.5, 1], "A", 2.0, closed=True)


def test_compatibility_with_three_conservation_laws_uses_lp():
    n = net("species A, B, C, D, E; A + B -> 2 B @ k1 = 1; B -> A @ k2 = 2; C -> D @ k3 = 1; D -> C @ k4 = 1;"
            " E -> 2 E @ k5 = 1;")
    assert len(kinetic_subspace(n).conservation_laws()) == 2
    n3 = net("species A, B, C, D, E, F; A + B -> 2 B @ k1 = 1; B -> A @ k2 = 2; C -> D @ k3 = 1;"
             " E -> F @ k5 = 1;")
    assert len(kinetic_subspace(n3).conservation_laws()) == 3
    assert is_compatible(n3, [1, 3, 1, 1, 1, 1], "A", 2.0)
    assert not is_compatible(n3, [0.5, 1, 1, 1, 1, 1], "A", 2.0)


def test_linearity_over_reaction_splits():
    n = net(ENZYME.format(flows=""))
    rng = random.Random(7)
    for _ in range(20):
        rs = list(n.reactions)
        rng.shuffle(rs)
        cut = rng.randrange(1, len(rs))
        whole = build_field(n)
        parts = build_field(n, rs[:cut]), build_field(n, rs[cut:])
        for w, p, q in zip(whole.polys, parts[0].polys, parts[1].polys):
            assert w == p + q


def test_eval_field_matches_per_reaction_sum():
    n = net(ENZYME.format(flows="inflow X @ 0.4;"))
    f = build_field(n)
    b = n.bindings()
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.uniform(0, 5, 4)
        t = rng.uniform(0, 10)
        naive = np.zeros(4)
        for r in n.reactions:
            rate = b[r.rate_name] * np.prod([x[n.index(s)] ** c for s, c in r.reactant.coefficients])
            for k, s in enumerate(n.species):
                naive[k] += rate * r.net_change(s)
        naive[0] += 0.4
        np.testing.assert_allclose(eval_field(f, None, x, t), naive, rtol=1e-13, atol=1e-13)


def test_field_json_schema():
    doc = json.loads(field_to_json(field_of(CANONICAL + " inflow A @ exp(0.5*t); outflow A @ 0.3;")))
    assert [d["species"] for d in doc] == ["A", "B"]
    assert doc[0]["inflow"] == "exp(0.5*t)" and doc[0]["outflow"] == 0.3
    assert all({"coeff", "powers"} <= set(m) for d in doc for m in d["monomials"])


def test_forward_invariance_asserted():
    from acrlab.algebra import RateCoeff
    from acrlab.massaction import _check_forward_invariance
    with pytest.raises(AssertionError):
        _check_forward_invariance(("A", "B"), [Poly.monomial(("A", "B"), (0, 1), RateCoeff.const(-1)),
                                               Poly.zero(("A", "B"))])
