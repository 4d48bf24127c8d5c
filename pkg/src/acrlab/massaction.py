"""Mass-action vector fields with symbolic rate constants.

The polynomial part of each species' equation keeps rate constants as
names (:class:`RateCoeff`), so values like ``k2/k1`` stay exact.  Inflows
are additive time forcing, outflows contribute ``-l * x_s`` to the
polynomial part.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .algebra import Poly, RateCoeff, integerize, nullspace, rref, to_fraction
from .exprlang import ZERO, TimeExpr, bind, compile_expr, eval_expr, print_expr
from .netparse import Network

__all__ = ["PolyField", "KineticSubspace", "build_field", "eval_field", "kinetic_subspace",
           "is_compatible", "field_to_json", "reaction_vectors"]


@dataclass(frozen=True)
class PolyField:
    species: Tuple[str, ...]
    polys: Tuple[Poly, ...]
    inflows: Tuple[TimeExpr, ...]
    outflows: Tuple[float, ...]
    constants: Tuple[Tuple[str, float], ...] = ()

    def index(self, name: str) -> int:
        try:
            return self.species.index(name)
        except ValueError:
            raise KeyError(f"unknown species {name!r}") from None

    def poly(self, name: str) -> Poly:
        return self.polys[self.index(name)]

    def inflow(self, name: str) -> TimeExpr:
        return self.inflows[self.index(name)]

    def outflow(self, name: str) -> float:
        return self.outflows[self.index(name)]

    def bindings(self, overrides: Optional[Mapping[str, float]] = None) -> Dict[str, float]:
        b = dict(self.constants)
        if overrides:
            b.update(overrides)
        return b

    def reaction_part(self, name: str) -> Poly:
        """Polynomial part without the outflow term."""
        i = self.index(name)
        p = self.polys[i]
        if self.outflows[i]:
            unit = tuple(1 if j == i else 0 for j in range(len(self.species)))
            p = p + Poly.monomial(self.species, unit, to_fraction(self.outflows[i]))
        return p


def _complex_exponents(species, cplx) -> Tuple[int, ...]:
    d = cplx.as_dict()
    return tuple(d.get(s, 0) for s in species)


def build_field(n: Network, reactions=None) -> PolyField:
    """Exact mass-action field of ``n`` (optionally restricted to ``reactions``)."""
    sp = n.species
    polys = [Poly.zero(sp) for _ in sp]
    for r in (n.reactions if reactions is None else reactions):
        mono = Poly.monomial(sp, _complex_exponents(sp, r.reactant), RateCoeff.symbol(r.rate_name))
        for i, s in enumerate(sp):
            change = r.net_change(s)
            if change:
                polys[i] = polys[i] + mono * change
    outflows = n.outflow_map
    for i, s in enumerate(sp):
        ell = outflows.get(s, 0.0)
        if ell:
            unit = tuple(1 if j == i else 0 for j in range(len(sp)))
            polys[i] = polys[i] + Poly.monomial(sp, unit, -to_fraction(ell))
    _check_forward_invariance(sp, polys)
    inflows = n.inflow_map
    return PolyField(
        species=sp,
        polys=tuple(polys),
        inflows=tuple(inflows.get(s, ZERO) for s in sp),
        outflows=tuple(outflows.get(s, 0.0) for s in sp),
        constants=tuple(n.bindings().items()),
    )


def _check_forward_invariance(species, polys) -> None:
    for i, p in enumerate(polys):
        for e, c in p.terms.items():
            negative = any(v < 0 for v in c.terms.values())
            if negative and not e[i]:
                raise AssertionError(
                    f"negative monomial without {species[i]} in its equation; orthant not forward invariant")


class CompiledField:
    """Fast numeric evaluation of a bound PolyField and its Jacobian."""

    def __init__(self, field: PolyField, bindings: Mapping[str, float]):
        self.field = field
        self.bindings = dict(bindings)
        n = len(field.species)
        self.n = n
        rows = ", ".join(p.to_source(self.bindings) for p in field.polys)
        self._poly = eval(f"lambda x: [{rows}]", {})
        jac_rows = []
        for p in field.polys:
            jac_rows.append("[" + ", ".join(p.derivative(j).to_source(self.bindings) for j in range(n)) + "]")
        self._jac = eval(f"lambda x: [{', '.join(jac_rows)}]", {})
        self.inflows = [bind(e, self.bindings) for e in field.inflows]
        self._forcing = [None if e == ZERO else compile_expr(e) for e in self.inflows]

    def forcing(self, t: float) -> List[float]:
        return [0.0 if f is None else f(t) for f in self._forcing]

    def poly(self, x) -> List[float]:
        return self._poly(x)

    def __call__(self, t: float, x) -> np.ndarray:
        p = self._poly(x)
        for i, f in enumerate(self._forcing):
            if f is not None:
                p[i] += f(t)
        return np.array(p, dtype=float)

    def jacobian(self, x) -> np.ndarray:
        return np.array(self._jac(x), dtype=float)


def eval_field(field: PolyField, bindings: Optional[Mapping[str, float]], x: Sequence[float], t: float) -> np.ndarray:
    """Evaluate the field at state ``x`` and time ``t``."""
    b = field.bindings(bindings)
    missing = set().union(*(c.names() for p in field.polys for c in p.terms.values())) - set(b)
    if missing:
        raise KeyError(f"unbound rate constant(s) {sorted(missing)}")
    out = []
    for p, g in zip(field.polys, field.inflows):
        v = p.evaluate(b, x)
        if g != ZERO:
            v += eval_expr(bind(g, b), t)
        out.append(v)
    return np.array(out, dtype=float)


def field_to_json(field: PolyField) -> str:
    doc = [
        {"species": s, "monomials": p.to_json(), "inflow": print_expr(g), "outflow": ell}
        for s, p, g, ell in zip(field.species, field.polys, field.inflows, field.outflows)
    ]
    return json.dumps(doc, indent=2, sort_keys=True)


# ------------------------------------------------------------ kinetic subspace


@dataclass(frozen=True)
class KineticSubspace:
    species: Tuple[str, ...]
    basis: Tuple[Tuple[int, ...], ...]

    @property
    def rank(self) -> int:
        return len(self.basis)

    def conservation_laws(self) -> List[Tuple[int, ...]]:
        """Integer basis of the orthogonal complement."""
        return [integerize(v) for v in nullspace(self.basis, len(self.species))]


def reaction_vectors(n: Network) -> List[Tuple[int, ...]]:
    return [tuple(r.net_change(s) for s in n.species) for r in n.reactions]


def kinetic_subspace(n: Network, closed: bool = False) -> KineticSubspace:
    """Span of reaction vectors plus (unless ``closed``) flow unit directions."""
    vecs = reaction_vectors(n)
    if not closed:
        flowing = set(n.inflow_map) | set(n.outflow_map)
        for s in n.species:
            if s in flowing:
                vecs.append(tuple(1 if q == s else 0 for q in n.species))
    red, _ = rref(vecs) if vecs else ([], [])
    return KineticSubspace(n.species, tuple(integerize(r) for r in red))


def is_compatible(n: Network, x0: Sequence[float], species: str, acr_value: float, closed: bool = False) -> bool:
    """Is there ``y > 0`` with ``y_i = acr_value`` and ``y - x0`` in the kinetic subspace?"""
    i = n.index(species)
    if not acr_value > 0:
        return False
    laws = kinetic_subspace(n, closed=closed).conservation_laws()
    if not laws:
        return True
    x0q = [to_fraction(v) for v in x0]
    v = to_fraction(acr_value)
    others = [j for j in range(len(n.species)) if j != i]
    # w . y = w . x0 with y_i = v  ->  sum_{j != i} w_j y_j = d
    rows = [[Fraction(w[j]) for j in others] + [sum(Fraction(wj) * xj for wj, xj in zip(w, x0q)) - w[i] * v]
            for w in laws]
    if len(laws) > 2:
        return _lp_feasible(rows, len(others))
    red, pivots = rref(rows)
    if any(p == len(others) for p in pivots):
        return False  # inconsistent
    red = [r for r in red if any(r[:-1])]
    if not red:
        return True
    if len(red) == 1:
        coeffs, d = red[0][:-1], red[0][-1]
        pos = any(c > 0 for c in coeffs)
        neg = any(c < 0 for c in coeffs)
        if pos and neg:
            return True
        return d > 0 if pos else d < 0
    gens = [(red[0][j], red[1][j]) for j in range(len(others)) if red[0][j] or red[1][j]]
    return _in_open_cone_2d(gens, (red[0][-1], red[1][-1]))


def _in_open_cone_2d(gens, d) -> bool:
    """Is ``d`` a strictly positive combination of ``gens`` (which span R^2)?"""
    # relint of cone(gens): d must be strictly positive on every dual extreme ray
    # that is not orthogonal to all generators.
    for gx, gy in gens:
        for u in ((-gy, gx), (gy, -gx)):
            dots = [u[0] * hx + u[1] * hy for hx, hy in gens]
            if all(v >= 0 for v in dots) and any(v > 0 for v in dots):
                if not u[0] * d[0] + u[1] * d[1] > 0:
                    return False
    return True


def _lp_feasible(rows, m: int) -> bool:
    from scipy.optimize import linprog

    a_eq = np.array([[float(v) for v in r[:-1]] + [0.0] for r in rows])
    b_eq = np.array([float(r[-1]) for r in rows])
    # maximise s subject to A z = d, z_j >= s, s <= 1
    a_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    res = linprog(c=np.r_[np.zeros(m), -1.0], A_ub=a_ub, b_ub=np.zeros(m), A_eq=a_eq, b_eq=b_eq,
                  bounds=[(None, None)] * m + [(None, 1.0)], method="highs")
    return bool(res.status == 0 and -res.fun > 1e-12)
