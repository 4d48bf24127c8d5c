"""Power-engine-load decomposition and dynamic-ACR limit prediction.

Each species equation is split as ``F_i = f * (x* - x_i) + g`` where ``g`` is
the remainder of dividing ``F_i`` by ``x_i - x*`` (so ``g`` is free of
``x_i``).  The predictor recognises a handful of network shapes (two-species
motifs with an inflow-driven partner, the bifunctional-enzyme futile cycle)
and computes the limit of ``x_i`` from exp-poly asymptotics of the inflows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .algebra import Poly, RateCoeff, to_fraction
from .exprlang import (
    Add, ExpPolyTerm, TimeExpr, ZERO, antiderivative_terms, bind, classify_growth,
    exp_poly_terms, is_identically_zero, print_expr, terms_to_expr,
)
from .massaction import PolyField, build_field, is_compatible
from .netparse import Network

__all__ = [
    "PelDecomposition", "AcrPrediction", "Hypothesis", "AlphaEstimate", "ZeroLoadReport",
    "NoRuleApplies", "PowerVanishes", "NotConverged", "LoadNotZero", "RULES",
    "decompose", "find_acr_candidates", "upstream_species", "solve_upstream",
    "predict_limit", "predict_all", "estimate_alpha", "check_zero_load_iff",
    "VERIFIED_SYMBOLIC", "VERIFIED_NUMERIC", "UNVERIFIED", "REFUTED",
]

VERIFIED_SYMBOLIC = "verified-symbolic"
VERIFIED_NUMERIC = "verified-numeric"
UNVERIFIED = "unverified"
REFUTED = "refuted"

RULES = ("ZeroLoadThm", "NonzeroLoadThm", "Motif1Thm", "Motif2Thm", "Motif2PolyCor", "EqualOutflowThm",
         "EqualOutflowLHopital", "Motif5Thm", "Motif5MainThm", "Motif3Thm", "EnzymeInflowC", "EnzymeNoCE",
         "NumericFallback")

# rules whose limit has the shape x* + alpha / (leading power coefficient)
_SHIFT_RULES = {"NonzeroLoadThm", "Motif2Thm", "Motif2PolyCor", "EqualOutflowThm", "EqualOutflowLHopital",
                "Motif5Thm", "Motif5MainThm", "Motif3Thm", "Motif1Thm", "EnzymeInflowC", "EnzymeNoCE"}


class NoRuleApplies(ValueError):
    pass


class PowerVanishes(ValueError):
    pass


class NotConverged(ValueError):
    pass


class LoadNotZero(ValueError):
    pass


# ------------------------------------------------------------- decomposition


@dataclass(frozen=True)
class PelDecomposition:
    species: str
    index: int
    x_star: RateCoeff
    power: Poly
    load: Poly
    forcing: TimeExpr
    constants: Tuple[Tuple[str, float], ...] = ()

    def bindings(self, overrides: Optional[Mapping[str, float]] = None) -> Dict[str, float]:
        b = dict(self.constants)
        if overrides:
            b.update(overrides)
        return b

    def x_star_value(self, bindings: Optional[Mapping[str, float]] = None) -> float:
        return self.x_star.evaluate(self.bindings(bindings))

    def load_is_zero(self, bindings: Optional[Mapping[str, float]] = None) -> bool:
        """Symbolically zero, or zero after binding a numeric ``x*``."""
        if not is_identically_zero(self.forcing):
            return False
        if self.load.is_zero():
            return True
        b = self.bindings(bindings)
        scale = max(1.0, abs(self.x_star.evaluate(b)))
        return all(abs(c.evaluate(b)) <= 1e-13 * scale for c in self.load.terms.values())

    def aux_functions(self, bindings: Optional[Mapping[str, float]] = None):
        """``(index, x*, f(x), g_poly(x))`` as fast callables; forcing is added by the caller."""
        b = self.bindings(bindings)
        f_fn = eval(f"lambda x: {self.power.to_source(b)}", {})
        g_fn = eval(f"lambda x: {self.load.to_source(b)}", {})
        return self.index, self.x_star.evaluate(b), f_fn, g_fn

    def evaluate(self, x: Sequence[float], t: float, bindings: Optional[Mapping[str, float]] = None):
        """``(f, g)`` at state ``x`` and time ``t``."""
        from .exprlang import eval_expr

        b = self.bindings(bindings)
        g = self.load.evaluate(b, x)
        if not is_identically_zero(self.forcing):
            g += eval_expr(bind(self.forcing, b), t)
        return self.power.evaluate(b, x), g

    def load_str(self) -> str:
        parts = [] if self.load.is_zero() else [str(self.load)]
        if not is_identically_zero(self.forcing):
            parts.append(print_expr(self.forcing))
        return " + ".join(parts) if parts else "0"

    def __str__(self) -> str:
        return f"d{self.species}/dt = ({self.power}) * ({self.x_star} - {self.species}) + {self.load_str()}"

    def to_json(self) -> dict:
        return {
            "species": self.species,
            "x_star": str(self.x_star),
            "power": str(self.power),
            "load": str(self.load),
            "forcing": print_expr(self.forcing),
        }


def _as_rate_coeff(v) -> RateCoeff:
    if isinstance(v, RateCoeff):
        return v
    return RateCoeff.const(to_fraction(v))


def decompose(field: PolyField, species: str, x_star, *, reactions_only: bool = False) -> PelDecomposition:
    """Canonical decomposition of ``species``' equation around ``x_star``.

    ``f`` is minus the quotient and ``g`` the remainder of dividing ``F_i`` by
    ``x_i - x*``.  With ``reactions_only`` the outflow term is left out.
    """
    i = field.index(species)
    xs = _as_rate_coeff(x_star)
    poly = field.reaction_part(species) if reactions_only else field.polys[i]
    quotient, remainder = poly.divide_linear(i, xs)
    return PelDecomposition(species, i, xs, -quotient, remainder, field.inflows[i], field.constants)


# ----------------------------------------------------------- ACR candidates


def upstream_species(field: PolyField, species: str) -> List[str]:
    """Species whose dynamics never feel ``species`` (directly or indirectly)."""
    n = len(field.species)
    deps = [{field.species.index(v) for v in p.variables()} for p in field.polys]
    target = field.index(species)
    out = []
    for j in range(n):
        if j == target:
            continue
        seen, stack = {j}, [j]
        while stack:
            for m in deps[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        if target not in seen:
            out.append(field.species[j])
    return out


def _linear_roots(coeffs: Dict[int, RateCoeff]) -> Optional[List[RateCoeff]]:
    """Nonzero roots in ``x`` of ``sum_p c_p x^p`` when degree (after removing ``x^m``) is 1."""
    coeffs = {p: c for p, c in coeffs.items() if not c.is_zero()}
    if not coeffs:
        return None  # identically zero: every value is a root
    low = min(coeffs)
    red = {p - low: c for p, c in coeffs.items()}
    deg = max(red)
    if deg == 0:
        return []
    if deg == 1:
        if not red[1].is_single_term():
            return []
        return [-red.get(0, RateCoeff()) / red[1]]
    if deg == 2 and 1 not in red and 0 in red and red[2].is_single_term():
        # c2 x^2 + c0: rational root only if -c0/c2 is a perfect square single term
        q = -red[0] / red[2]
        if q.is_single_term():
            ((mono, c),) = q.terms.items()
            num, den = c.numerator, c.denominator
            rn, rd = math.isqrt(num) if num > 0 else -1, math.isqrt(den)
            if num > 0 and rn * rn == num and rd * rd == den and all(e % 2 == 0 for _, e in mono):
                half = tuple((s, e // 2) for s, e in mono)
                return [RateCoeff({half: to_fraction(rn) / rd})]
    return []


def find_acr_candidates(field: PolyField, species: str) -> List[RateCoeff]:
    """Values ``c`` (rational in rate constants) making ``F_i|_{x_i=c}`` a pure load.

    Groups ``F_i`` by monomials in the other species; every group that
    depends on ``x_i`` must vanish at ``c``, and groups free of ``x_i`` may
    only involve species upstream of ``x_i``.  The group of terms free of
    the other species (outflow, decay) is used only when it is the sole
    group depending on ``x_i``.
    """
    i = field.index(species)
    f = field.polys[i]
    if f.degree_in(i) > 2:
        return []
    upstream = {field.species.index(s) for s in upstream_species(field, species)}
    groups = f.by_other_monomials(i)
    unit = tuple(0 for _ in field.species)
    active, passive = [], []
    for mono, coeffs in groups.items():
        if any(p > 0 and not c.is_zero() for p, c in coeffs.items()):
            active.append((mono, coeffs))
        else:
            passive.append(mono)
    for mono in passive:
        if any(e and j not in upstream for j, e in enumerate(mono)):
            return []
    others = [(m, c) for m, c in active if m != unit]
    if others:
        active = others
    if not active:
        return []
    cands = _linear_roots(active[0][1])
    if not cands:
        return []
    b = field.bindings()
    out = []
    for c in cands:
        ok = all(_poly_value_zero(coeffs, c) for _, coeffs in active[1:])
        if not ok or c.is_zero():
            continue
        try:
            positive = c.evaluate(b) > 0
        except KeyError:
            positive = c.all_positive()
        if positive:
            out.append(c)
    return sorted(set(out), key=str)


def _poly_value_zero(coeffs: Dict[int, RateCoeff], root: RateCoeff) -> bool:
    total = RateCoeff()
    for p, c in coeffs.items():
        total = total + c * root ** p
    return total.is_zero()


# -------------------------------------------------------- exp-poly helpers


def _tmul(a: List[ExpPolyTerm], b: List[ExpPolyTerm]) -> List[ExpPolyTerm]:
    return _tsum([ExpPolyTerm(x.coef * y.coef, x.degree + y.degree, x.rate + y.rate) for x in a for y in b])


def _tsum(terms) -> List[ExpPolyTerm]:
    acc: Dict[Tuple[float, float], float] = {}
    for tm in terms:
        key = (tm.degree, tm.rate)
        acc[key] = acc.get(key, 0.0) + tm.coef
    out = [ExpPolyTerm(c, d, r) for (d, r), c in acc.items() if abs(c) > 1e-300]
    out.sort(key=lambda tm: (tm.rate, tm.degree))
    return out


def _tscale(a, s: float) -> List[ExpPolyTerm]:
    return _tsum([ExpPolyTerm(x.coef * s, x.degree, x.rate) for x in a])


def _tshift(a, lam: float) -> List[ExpPolyTerm]:
    return [ExpPolyTerm(x.coef, x.degree, x.rate + lam) for x in a]


def _tderiv(a) -> List[ExpPolyTerm]:
    out = []
    for x in a:
        if x.degree:
            out.append(ExpPolyTerm(x.coef * x.degree, x.degree - 1, x.rate))
        if x.rate:
            out.append(ExpPolyTerm(x.coef * x.rate, x.degree, x.rate))
    return _tsum(out)


def _order(tm: ExpPolyTerm) -> Tuple[float, float]:
    return (round(tm.rate, 12), round(tm.degree, 12))


def _ratio_limit(num, den) -> Optional[float]:
    """``lim num/den`` for exp-poly series (None when infinite or undefined)."""
    if not num:
        return 0.0
    if not den:
        return None
    ln, ld = num[-1], den[-1]
    if _order(ln) < _order(ld):
        return 0.0
    if _order(ln) == _order(ld):
        return ln.coef / ld.coef
    return None


def _grows(terms) -> bool:
    if not terms:
        return False
    lead = terms[-1]
    return lead.coef > 0 and (lead.rate > 0 or (lead.rate == 0 and lead.degree > 0))


def _bounded(terms) -> bool:
    if not terms:
        return True
    lead = terms[-1]
    return lead.rate < 0 or (lead.rate == 0 and lead.degree <= 0)


def _integral_terms(terms) -> Optional[List[ExpPolyTerm]]:
    return [] if not terms else antiderivative_terms(terms)


def solve_upstream(field: PolyField, bindings: Mapping[str, float], x0: Optional[Sequence[float]],
                   names: Sequence[str]) -> Dict[str, List[ExpPolyTerm]]:
    """Closed-form exp-poly solutions for upstream species with linear dynamics.

    Handles ``x_j' = lam * x_j + sum_m c_m x_m + h(t)`` with every ``x_m``
    already solved; species outside this class are left out of the result.
    """
    solved: Dict[str, List[ExpPolyTerm]] = {}
    pending = list(names)
    progress = True
    while pending and progress:
        progress = False
        for s in list(pending):
            j = field.index(s)
            sol = _solve_linear(field, bindings, x0, j, solved)
            if sol is not None:
                solved[s] = sol
                pending.remove(s)
                progress = True
    return solved


def _solve_linear(field, bindings, x0, j, solved) -> Optional[List[ExpPolyTerm]]:
    sp = field.species
    lam = 0.0
    h: List[ExpPolyTerm] = []
    for e, c in field.polys[j].terms.items():
        coef = c.evaluate(bindings)
        if sum(e) == 0:
            h.append(ExpPolyTerm(coef, 0.0, 0.0))
        elif sum(e) == 1:
            m = e.index(1)
            if m == j:
                lam += coef
            elif sp[m] in solved:
                h.extend(_tscale(solved[sp[m]], coef))
            else:
                return None
        else:
            return None
    forcing = exp_poly_terms(bind(field.inflows[j], bindings))
    if forcing is None:
        return None
    h = _tsum(h + forcing)
    if x0 is None:
        x0j = 0.0 if not h and lam == 0 else None
        if x0j is None:
            return None
    else:
        x0j = float(x0[j])
    # x(t) = x0 e^{lam t} + e^{lam t} int_0^t e^{-lam s} h(s) ds
    anti = _integral_terms(_tshift(h, -lam))
    if anti is None:
        return None
    return _tsum([ExpPolyTerm(x0j, 0.0, lam)] + _tshift(anti, lam))


# ---------------------------------------------------------------- prediction


@dataclass
class Hypothesis:
    name: str
    status: str
    detail: str = ""

    def to_json(self) -> dict:
        d = {"name": self.name, "status": self.status}
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass
class AcrPrediction:
    species: str
    x_star: str
    x_star_value: float
    alpha: float
    limit: float
    rule: str
    lead: float = 1.0
    hypotheses: List[Hypothesis] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    alternatives: List["AcrPrediction"] = field(default_factory=list)

    def to_json(self) -> dict:
        d = {
            "species": self.species,
            "x_star": self.x_star,
            "alpha": _json_num(self.alpha),
            "limit": _json_num(self.limit),
            "rule": self.rule,
            "hypotheses": [h.to_json() for h in self.hypotheses],
        }
        if self.warnings:
            d["warnings"] = list(self.warnings)
        if self.alternatives:
            d["alternatives"] = [a.to_json() for a in self.alternatives]
        return d

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _json_num(v: float):
    return v if math.isfinite(v) else str(v)


def _positivity_hyp(terms_list) -> Hypothesis:
    if all(t is not None and all(tm.coef >= 0 for tm in t) for t in terms_list):
        return Hypothesis("inflows nonnegative", VERIFIED_SYMBOLIC)
    return Hypothesis("inflows nonnegative", VERIFIED_NUMERIC, "sampled at parse time")


def _core_split(p: Poly, core: Sequence[int]) -> Tuple[Poly, Poly]:
    inside, outside = {}, {}
    for e, c in p.terms.items():
        (inside if all(v == 0 or j in core for j, v in enumerate(e)) else outside)[e] = c
    return Poly(p.species, inside), Poly(p.species, outside)


def _time_function(load: Poly, forcing: TimeExpr, bindings, solved) -> Tuple[Optional[List[ExpPolyTerm]], TimeExpr]:
    """Exp-poly terms and expression of ``load(x(t)) + forcing(t)`` using solved upstream species."""
    terms: List[ExpPolyTerm] = []
    for e, c in load.terms.items():
        acc = [ExpPolyTerm(c.evaluate(bindings), 0.0, 0.0)]
        for j, p in enumerate(e):
            if p:
                sol = solved.get(load.species[j])
                if sol is None:
                    return None, ZERO
                for _ in range(p):
                    acc = _tmul(acc, sol)
        terms.extend(acc)
    bound = bind(forcing, bindings)
    ft = exp_poly_terms(bound)
    poly_part = _tsum(terms)
    if ft is None:
        expr = bound if not poly_part else Add((terms_to_expr(poly_part), bound))
        return None, expr
    total = _tsum(poly_part + ft)
    return total, terms_to_expr(total)


class _Context:
    def __init__(self, n: Network, species: str, x0, bindings, traj, closed_compat=False):
        self.n = n
        self.closed_compat = closed_compat
        self.field = build_field(n)
        self.species = species
        self.i = self.field.index(species)
        self.b = self.field.bindings(bindings)
        if bindings:
            self.field = PolyField(self.field.species, self.field.polys, self.field.inflows,
                                   self.field.outflows, tuple(self.b.items()))
        self.x0 = None if x0 is None else [float(v) for v in x0]
        self.traj = traj
        self.upstream = upstream_species(self.field, species)
        self.solved = solve_upstream(self.field, self.b, self.x0, self.upstream)


def predict_all(n: Network, species: str, *, x_star=None, x0=None, bindings=None, traj=None,
                closed_compat: bool = False) -> List[AcrPrediction]:
    """One prediction per ACR candidate (or for the supplied ``x_star``)."""
    ctx = _Context(n, species, x0, bindings, traj, closed_compat)
    enzyme = _predict_enzyme(ctx)
    if enzyme is not None and x_star is None:
        return [enzyme]
    cands = [_as_rate_coeff(x_star)] if x_star is not None else find_acr_candidates(ctx.field, species)
    if not cands:
        if traj is not None:
            raise NoRuleApplies(f"no ACR candidate for {species}; supply x_star for a numeric estimate")
        raise NoRuleApplies(f"no ACR candidate for {species}")
    out = []
    errors = []
    for c in cands:
        try:
            out.append(_predict_one(ctx, c))
        except NoRuleApplies as exc:
            errors.append(str(exc))
    if not out:
        raise NoRuleApplies("; ".join(errors))
    return out


def predict_limit(n: Network, species: str, *, x_star=None, x0=None, bindings=None, traj=None,
                  closed_compat: bool = False) -> AcrPrediction:
    """Predicted long-time limit of ``species``.

    ``x0`` is needed by rules whose limit depends on initial data (zero-slope
    motif, enzyme without C/E inflow) and for solving upstream species;
    ``traj`` enables the numeric fallback.  Further candidates, if any, are
    attached as ``alternatives``.  ``closed_compat`` checks compatibility
    against the kinetic subspace of the reactions alone, ignoring flow directions.
    """
    preds = predict_all(n, species, x_star=x_star, x0=x0, bindings=bindings, traj=traj, closed_compat=closed_compat)
    first = preds[0]
    first.alternatives = preds[1:]
    return first


def _finish(ctx, xs: RateCoeff, alpha: float, lead: float, rule: str, hyps, warnings=None) -> AcrPrediction:
    xv = xs.evaluate(ctx.b)
    limit = xv + alpha / lead
    warnings = list(warnings or [])
    if abs(limit) <= 1e-12 * max(1.0, abs(xv)):
        warnings.append("alpha equals -x* times the power coefficient: limit sits on the boundary 0")
    elif limit < 0:
        warnings.append("predicted limit is negative: the hypothesis alpha > -x* fails")
    return AcrPrediction(ctx.species, str(xs), xv, alpha, limit, rule, lead, list(hyps), warnings)


def _predict_one(ctx: _Context, xs: RateCoeff) -> AcrPrediction:
    field, i, b = ctx.field, ctx.i, ctx.b
    full = decompose(field, ctx.species, xs)
    xv = xs.evaluate(b)
    hyps: List[Hypothesis] = []
    if full.load_is_zero():
        hyps.append(Hypothesis("load identically zero", VERIFIED_SYMBOLIC))
        warnings = []
        if ctx.x0 is not None:
            ok = is_compatible(ctx.n, ctx.x0, ctx.species, xv, closed=ctx.closed_compat)
            hyps.append(Hypothesis("x0 compatible with the ACR hyperplane", VERIFIED_SYMBOLIC if ok else REFUTED))
            if not ok:
                warnings.append("initial state is not compatible with the ACR value; limit not expected")
        status, detail = UNVERIFIED, "not decidable symbolically"
        if ctx.traj is not None:
            rep = check_zero_load_iff(ctx.traj, full)
            status = VERIFIED_NUMERIC if rep.integral_divergent else REFUTED
            detail = f"dyadic increment ratio of int f = {rep.increment_ratio:.3g}"
        hyps.append(Hypothesis("integral of f diverges", status, detail))
        return _finish(ctx, xs, 0.0, 1.0, "ZeroLoadThm", hyps, warnings)

    core_dec = decompose(field, ctx.species, xs, reactions_only=True)
    power = core_dec.power
    load_terms, load_expr = _time_function(core_dec.load, core_dec.forcing, b, ctx.solved)
    load_known = load_terms is not None or not core_dec.load.variables()

    # constant power with a pure time load
    if not power.variables() and load_known and not field.outflows[i]:
        c = power.terms.get(tuple(0 for _ in field.species))
        cv = c.evaluate(b) if c is not None else 0.0
        if cv > 0 and load_terms is not None:
            alpha = _ratio_limit(load_terms, [ExpPolyTerm(1.0, 0.0, 0.0)])
            if alpha is not None:
                hyps += [Hypothesis("integral of f diverges", VERIFIED_SYMBOLIC, "f is a positive constant"),
                         Hypothesis("g(t) converges", VERIFIED_SYMBOLIC)]
                return _finish(ctx, xs, alpha, cv, "NonzeroLoadThm", hyps)

    motif = _predict_motif(ctx, xs, power, core_dec, load_terms, load_expr)
    if motif is not None:
        return motif
    return _numeric_fallback(ctx, xs, full, "no symbolic rule matches the decomposition")


def _numeric_fallback(ctx, xs, dec, reason) -> AcrPrediction:
    if ctx.traj is None:
        raise NoRuleApplies(f"{reason} (x* = {xs}); supply a trajectory for the numeric fallback")
    est = estimate_alpha(ctx.traj, dec)
    hyps = [Hypothesis("tail g/f converged", VERIFIED_NUMERIC if est.converged else UNVERIFIED,
                       f"half-window estimates {est.halves[0]:.6g}, {est.halves[1]:.6g}")]
    pred = _finish(ctx, xs, est.value, 1.0, "NumericFallback", hyps)
    pred.warnings.append(f"numeric estimate: {reason}")
    return pred


def _predict_motif(ctx, xs, power: Poly, core_dec: PelDecomposition, ga_terms, ga_expr) -> Optional[AcrPrediction]:
    field, i, b = ctx.field, ctx.i, ctx.b
    if len(power.terms) != 1:
        return None
    ((e, c),) = power.terms.items()
    drivers = [j for j, p in enumerate(e) if p]
    if len(drivers) != 1 or drivers[0] == i:
        return None
    d = drivers[0]
    p = e[d]
    lead = c.evaluate(b)
    if lead <= 0 or p not in (1, 2):
        return None
    if core_dec.load.depends_on(d) or core_dec.load.depends_on(i):
        return None
    core = (i, d)
    cp_i, _ = _core_split(field.reaction_part(field.species[i]), core)
    cp_d, rest_d = _core_split(field.reaction_part(field.species[d]), core)
    gb_terms, gb_expr = _time_function(rest_d, field.inflows[d], b, ctx.solved)
    if rest_d.variables() and gb_terms is None:
        return None
    if cp_d == -cp_i:
        slope = "negative"
    elif cp_d == cp_i:
        slope = "positive"
    elif cp_d.is_zero():
        slope = "zero"
    else:
        return None
    ell_i, ell_d = field.outflows[i], field.outflows[d]
    dname = field.species[d]
    hyps: List[Hypothesis] = []

    if slope == "negative" and ell_i == 0 and ell_d == 0 and p == 2:
        return _motif5(ctx, xs, lead, ga_terms, ga_expr, gb_terms)
    if ga_terms is None or gb_terms is None:
        return None  # outside the exp-poly class: numeric route
    hyps.append(_positivity_hyp([ga_terms, gb_terms]))
    g_terms = _tsum(ga_terms + gb_terms)

    if slope == "negative" and p == 1 and ell_i == 0 and ell_d == 0:
        big_g = _integral_terms(g_terms)
        if big_g is None or not _grows(big_g):
            return None
        hyps.append(Hypothesis("G(t) = int (g_a + g_b) diverges", VERIFIED_SYMBOLIC))
        alpha = _ratio_limit(ga_terms, big_g)
        if alpha is None:
            return None
        hyps.append(Hypothesis("g_a/G converges", VERIFIED_SYMBOLIC, f"alpha = {float(alpha)}"))
        rule = "Motif2PolyCor" if all(tm.rate == 0 for tm in ga_terms) else "Motif2Thm"
        return _finish(ctx, xs, alpha, lead, rule, hyps)

    if slope == "negative" and p == 1 and ell_i == ell_d and ell_i > 0:
        if not _grows(g_terms):
            return None
        hyps.append(Hypothesis("g = g_a + g_b tends to infinity", VERIFIED_SYMBOLIC))
        ell = ell_i
        anti = _integral_terms(_tshift(g_terms, ell))
        alpha = None
        if anti is not None:
            h_terms = _tsum(_tshift(anti, -ell))
            alpha = _ratio_limit(ga_terms, h_terms)
        lhop = _ratio_limit(_tsum(_tscale(ga_terms, ell) + _tderiv(ga_terms)), g_terms)
        rule = "EqualOutflowThm"
        if alpha is None:
            if lhop is None:
                return None
            alpha, rule = lhop, "EqualOutflowLHopital"
        hyps.append(Hypothesis("g_a/H converges", VERIFIED_SYMBOLIC, f"alpha = {float(alpha)}"))
        if lhop is not None:
            agree = abs(lhop - alpha) <= 1e-12 * max(1.0, abs(alpha))
            hyps.append(Hypothesis("derivative form of alpha agrees", VERIFIED_SYMBOLIC if agree else REFUTED,
                                   f"lim (l g_a + g_a')/g = {float(lhop)}"))
        return _finish(ctx, xs, alpha, lead, rule, hyps)

    if slope == "negative" and p == 1:
        return None  # unequal outflows: only a conjecture exists

    if slope == "positive" and p == 1 and ell_i == 0 and ell_d == 0:
        if not _bounded(ga_terms):
            return None
        hyps.append(Hypothesis(f"g_{ctx.species} bounded", VERIFIED_SYMBOLIC))
        diff = _integral_terms(_tsum(gb_terms + _tscale(ga_terms, -1.0)))
        if diff is None or not _grows(diff):
            return None
        hyps.append(Hypothesis(f"int (g_{dname} - g_{ctx.species}) diverges", VERIFIED_SYMBOLIC))
        return _finish(ctx, xs, 0.0, lead, "Motif1Thm", hyps)

    if slope == "zero" and p == 1 and ell_i == 0 and ell_d == 0:
        gb_int = _integral_terms(gb_terms)
        if gb_int is None:
            return None
        if ctx.x0 is None:
            if _bounded(ga_terms) and _grows(gb_int):
                hyps.append(Hypothesis(f"int {dname} diverges", VERIFIED_SYMBOLIC))
                return _finish(ctx, xs, 0.0, lead, "Motif3Thm", hyps)
            raise NoRuleApplies(f"zero-slope motif needs the initial value of {dname}")
        driver = _tsum(gb_int + [ExpPolyTerm(ctx.x0[d], 0.0, 0.0)])
        if not driver or (driver[-1].rate == 0 and driver[-1].degree == 0 and not _grows(gb_int)
                          and driver[-1].coef <= 0):
            return None
        hyps.append(Hypothesis(f"int {dname} diverges", VERIFIED_SYMBOLIC))
        alpha = _ratio_limit(ga_terms, driver)
        if alpha is None:
            return None
        hyps.append(Hypothesis(f"g_a/({dname}(0) + int g_b) converges", VERIFIED_SYMBOLIC, f"alpha = {float(alpha)}"))
        return _finish(ctx, xs, alpha, lead, "Motif3Thm", hyps)
    return None


def _motif5(ctx, xs, lead, ga_terms, ga_expr, gb_terms) -> Optional[AcrPrediction]:
    hyps: List[Hypothesis] = []
    gc = classify_growth(ga_expr)
    if gb_terms is None:
        return None
    if gc.tag == "DoubleExp":
        # g_a = exp(u) with u -> oo: d/dt g_a / g_a^{3/2} = u' exp(-u/2) -> 0
        hyps += [Hypothesis("G(t) diverges", VERIFIED_SYMBOLIC, "g_a grows double-exponentially"),
                 Hypothesis("g_a -> infinity", VERIFIED_SYMBOLIC),
                 Hypothesis("g_a'/g_a^(3/2) -> 0", VERIFIED_SYMBOLIC, "u' exp(-u/2) with u an exp-poly"),
                 Hypothesis("g_a'/(g_a^(1/2) g) -> 0", VERIFIED_SYMBOLIC, "bounded by g_a'/g_a^(3/2)")]
        return _finish(ctx, xs, 0.0, lead, "Motif5MainThm", hyps)
    if ga_terms is None:
        return None
    hyps.append(_positivity_hyp([ga_terms, gb_terms]))
    big_g = _integral_terms(_tsum(ga_terms + gb_terms))
    if big_g is None or not _grows(big_g):
        return None
    hyps.append(Hypothesis("G(t) diverges", VERIFIED_SYMBOLIC))
    if _bounded(ga_terms):
        hyps.append(Hypothesis("g_a bounded", VERIFIED_SYMBOLIC))
        return _finish(ctx, xs, 0.0, lead, "Motif5MainThm", hyps)
    if _grows(ga_terms):
        # exp-poly g_a: g_a' = O(g_a), so g_a'/(g_a^{1/2} g) = O(g_a^{-1/2}) -> 0
        hyps.append(Hypothesis("g_a -> infinity", VERIFIED_SYMBOLIC))
        hyps.append(Hypothesis("g_a'/(g_a^(1/2) g) -> 0", VERIFIED_SYMBOLIC, "exp-poly growth orders"))
        return _finish(ctx, xs, 0.0, lead, "Motif5MainThm", hyps)
    alpha = _ratio_limit(ga_terms, _tmul(big_g, big_g))
    if alpha is None:
        return None
    hyps.append(Hypothesis("g_a/G^2 converges", VERIFIED_SYMBOLIC, f"alpha = {float(alpha)}"))
    return _finish(ctx, xs, alpha, lead, "Motif5Thm", hyps)


def _predict_enzyme(ctx: _Context) -> Optional[AcrPrediction]:
    roles = _enzyme_roles(ctx.n, ctx.species)
    if roles is None:
        return None
    X, Y, E, C, k3, k4 = roles
    if any(ctx.field.outflows):
        return None
    rates = {}
    for s in (X, Y, E, C):
        terms = exp_poly_terms(bind(ctx.field.inflow(s), ctx.b))
        if terms is None or any(tm.rate != 0 or tm.degree != 0 for tm in terms):
            return None
        rates[s] = terms[0].coef if terms else 0.0
    xs = RateCoeff.symbol(k3) / RateCoeff.symbol(k4)
    k4v = ctx.b[k4]
    hyps = [Hypothesis("bifunctional enzyme structure", VERIFIED_SYMBOLIC, f"X={X}, E={E}, C={C}"),
            Hypothesis("constant nonnegative inflows", VERIFIED_SYMBOLIC)]
    if rates[C] > 0:
        hyps.append(Hypothesis(f"inflow of {C} positive", VERIFIED_SYMBOLIC))
        return _finish(ctx, xs, 0.0, k4v, "EnzymeInflowC", hyps)
    if rates[E] == 0 and rates[X] + rates[Y] > 0:
        if ctx.x0 is None:
            raise NoRuleApplies(f"enzyme limit needs {E}(0) + {C}(0)")
        total = ctx.x0[ctx.field.index(E)] + ctx.x0[ctx.field.index(C)]
        if total <= 0:
            return None
        hyps.append(Hypothesis(f"no inflow of {C} or {E}; inflow into {X} or {Y}", VERIFIED_SYMBOLIC))
        return _finish(ctx, xs, rates[Y] / total, k4v, "EnzymeNoCE", hyps)
    return None


def _enzyme_roles(n: Network, y: str):
    if len(n.species) != 4 or len(n.reactions) != 4:
        return None
    rx = [(r.reactant.as_dict(), r.product.as_dict(), r.rate_name) for r in n.reactions]
    for lhs, rhs, k4 in rx:
        if lhs.get(y) != 1 or len(lhs) != 2 or any(v != 1 for v in lhs.values()):
            continue
        (c,) = [s for s in lhs if s != y]
        if set(rhs) != {c} | (set(rhs) - {c}) or rhs.get(c) != 1 or len(rhs) != 2:
            continue
        (x,) = [s for s in rhs if s != c]
        if rhs[x] != 1 or x == y:
            continue
        (e,) = [s for s in n.species if s not in (x, y, c)]
        want = {
            "bind": ({x: 1, e: 1}, {c: 1}),
            "unbind": ({c: 1}, {x: 1, e: 1}),
            "cat": ({c: 1}, {y: 1, e: 1}),
        }
        found = {}
        for key, (l2, r2) in want.items():
            for lhs2, rhs2, k in rx:
                if lhs2 == l2 and rhs2 == r2:
                    found[key] = k
        if len(found) == 3:
            return x, y, e, c, found["cat"], k4
    return None


# ------------------------------------------------------------ numeric checks


@dataclass(frozen=True)
class AlphaEstimate:
    value: float
    converged: bool
    halves: Tuple[float, float]


def _ratio_series(traj, dec: PelDecomposition, bindings=None):
    from .exprlang import compile_expr

    _, xstar, f_fn, g_fn = dec.aux_functions(bindings)
    forcing = None if is_identically_zero(dec.forcing) else compile_expr(bind(dec.forcing, dec.bindings(bindings)))
    f = np.array([f_fn(x) for x in traj.states])
    g = np.array([g_fn(x) for x in traj.states])
    if forcing is not None:
        g = g + np.array([forcing(t) for t in traj.times])
    return xstar, f, g


def estimate_alpha(traj, dec: PelDecomposition, bindings=None, *, tail: float = 0.2, rtol: float = 1e-3,
                   strict: bool = False) -> AlphaEstimate:
    """Median of ``g/f`` over the last ``tail`` fraction of the time span."""
    t = traj.times
    start = t[-1] - tail * (t[-1] - t[0])
    mask = t >= start
    if mask.sum() < 50:
        raise ValueError(f"tail window holds {int(mask.sum())} accepted steps; need at least 50")
    _, f, g = _ratio_series(traj, dec, bindings)
    f, g = f[mask], g[mask]
    if np.any(f <= 0):
        raise PowerVanishes("power f is not positive on the tail window")
    r = g / f
    mid = len(r) // 2
    h1, h2 = float(np.median(r[:mid])), float(np.median(r[mid:]))
    value = float(np.median(r))
    converged = abs(h1 - h2) <= rtol * max(1.0, abs(value))
    if strict and not converged:
        raise NotConverged(f"half-window estimates {h1:.6g} and {h2:.6g} disagree")
    return AlphaEstimate(value, converged, (h1, h2))


@dataclass(frozen=True)
class ZeroLoadReport:
    sign_constant: bool
    identity_max_residual: float
    identity_points: int
    integral_divergent: bool
    increment_ratio: float
    f_tail_slope: float
    t_f_decreasing: bool

    def to_json(self) -> dict:
        return {
            "sign_constant": self.sign_constant,
            "identity_max_residual": self.identity_max_residual,
            "identity_points": self.identity_points,
            "integral_divergent": self.integral_divergent,
            "increment_ratio": self.increment_ratio,
            "f_tail_loglog_slope": self.f_tail_slope,
            "t_f_decreasing": self.t_f_decreasing,
        }


# int_0^t f grows by a factor >= 2^-0.25 per dyadic window when f decays no faster than t^-1.25
DIVERGENCE_RATIO = 2.0 ** -0.25
DIVERGENCE_FLOOR = 1e-6


def check_zero_load_iff(traj, dec: PelDecomposition, bindings=None, *, gap_floor: float = 1e-12) -> ZeroLoadReport:
    """Empirical checks of the zero-load convergence criterion along ``traj``.

    The ratio identity ``|x* - x_i(t)| exp(int_0^t f) = |x* - x_i(0)|`` is
    evaluated where the gap exceeds ``gap_floor``.  ``int f`` is called
    divergent when its increment over ``[T/2, T]`` is at least
    ``DIVERGENCE_RATIO`` times the increment over ``[T/4, T/2]`` and above
    ``DIVERGENCE_FLOOR``; this is a finite-horizon heuristic, not a proof.
    """
    if not dec.load_is_zero(bindings):
        raise LoadNotZero(f"load of {dec.species} is {dec.load_str()}")
    xstar, f, _ = _ratio_series(traj, dec, bindings)
    t = traj.times
    gap = traj.engine if traj.engine is not None else xstar - traj.states[:, dec.index]
    if gap[0] == 0:
        raise ValueError("x_i(0) equals x*; the criterion needs x_i(0) != x*")
    ok = np.abs(gap) > gap_floor
    signs = np.sign(gap[ok])
    sign_constant = bool(np.all(signs == signs[0])) if signs.size else True
    if traj.aux is not None:
        int_f = traj.aux[:, 0]
    else:
        int_f = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))])
    resid = np.abs(np.abs(gap[ok]) * np.exp(int_f[ok]) / abs(gap[0]) - 1.0)

    q1, q2, q3 = np.interp([t[-1] / 4, t[-1] / 2, t[-1]], t, int_f)
    late, early = q3 - q2, q2 - q1
    ratio = late / early if early > 0 else (math.inf if late > 0 else 0.0)
    divergent = bool(late > DIVERGENCE_FLOOR and ratio >= DIVERGENCE_RATIO)

    tail = (t >= t[-1] / 2) & (t > 0)
    ft = f[tail]
    if tail.sum() < 2 or np.any(ft <= 0):
        slope = -math.inf
    else:
        slope = float(np.polyfit(np.log(t[tail]), np.log(ft), 1)[0])
    probe = t[-1] * np.array([1e-2, 1e-1, 1.0])
    tf = probe * np.interp(probe, t, f)
    decreasing = bool(np.all(np.diff(tf) < 0))
    return ZeroLoadReport(sign_constant, float(resid.max()) if resid.size else 0.0, int(ok.sum()),
                          divergent, float(ratio), slope, decreasing)
