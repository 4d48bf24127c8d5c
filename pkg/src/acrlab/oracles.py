"""Closed-form reference solutions used as ground truth for the integrator.

Everything here is independent of :mod:`acrlab.odeint`; numeric integrals go
through adaptive Gauss-Kronrod quadrature (``scipy.integrate.quad``) or the
exp-poly closed forms from :mod:`acrlab.exprlang`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from scipy import integrate

from .exprlang import (
    ExpPolyTerm, TimeExpr, antiderivative_terms, compile_expr, eval_terms, exp_poly_terms,
    is_identically_zero,
)

__all__ = ["OracleFn", "canonical_b", "canonical_a", "motif2_general_a", "motif2_general_b",
           "counterexample_x1_x2", "total_G", "H_outflow", "quad", "ORACLES"]

QUAD_RTOL = 1e-10
_EQ_BAND = 1e-12


@dataclass(frozen=True)
class OracleFn:
    name: str
    evaluate: Callable
    domain: str


def quad(fn: Callable[[float], float], a: float, b: float, rtol: float = QUAD_RTOL, points=None) -> float:
    if b <= a:
        return 0.0
    val, _ = integrate.quad(fn, a, b, epsrel=rtol, epsabs=0.0, limit=500, points=points)
    return val


# ------------------------------------------------------------ canonical network


def canonical_b(k1: float, k2: float, a0: float, b0: float, t: float) -> float:
    """``b(t)`` for ``A + B -> 2B, B -> A`` (rate constants k1, k2).

    With ``k = k2/k1`` and ``s = a0 + b0``: logistic relaxation when
    ``s != k`` and rational decay ``(k - a0)/(1 + (k - a0) k1 t)`` on the
    boundary ``s == k``.
    """
    k = k2 / k1
    s = a0 + b0
    r = s - k
    if abs(r) <= _EQ_BAND * max(1.0, abs(k)):
        c = k - a0
        return c / (1.0 + c * k1 * t)
    if b0 == 0.0:
        return 0.0
    # time is scaled by k1 (the printed formula has k1 = 1)
    expo = -r * k1 * t
    ratio = (a0 - k) / b0
    if expo > 700:
        return r / ratio * math.exp(-expo) if ratio else r
    return r / (1.0 + ratio * math.exp(expo))


def canonical_a(k1: float, k2: float, a0: float, b0: float, t: float) -> float:
    return a0 + b0 - canonical_b(k1, k2, a0, b0, t)


# ------------------------------------------------------------- motif 2, gB = 0


def _logaddexp(x: float, y: float) -> float:
    m = max(x, y)
    if m == -math.inf:
        return m
    return m + math.log(math.exp(x - m) + math.exp(y - m))


class _Motif2Oracle:
    """Evaluates the explicit solution of the negative-slope motif with ``g_b = 0``."""

    def __init__(self, k1: float, k2: float, a0: float, b0: float, g_a: Optional[TimeExpr]):
        self.k1, self.k = k1, k2 / k1
        self.a0, self.b0 = a0, b0
        terms = None if g_a is None else exp_poly_terms(g_a)
        self.Ga_terms = self.IGa_terms = None
        if g_a is None or (terms is not None and not terms):
            self.Ga_terms = self.IGa_terms = []
        elif terms is not None:
            self.Ga_terms = antiderivative_terms(terms)
            if self.Ga_terms is not None:
                self.IGa_terms = antiderivative_terms(self.Ga_terms)
        self._g = None if g_a is None else compile_expr(g_a)

    def G_a(self, t: float) -> float:
        if self.Ga_terms is not None:
            return eval_terms(self.Ga_terms, t)
        return quad(self._g, 0.0, t)

    def int_G_a(self, t: float) -> float:
        if self.IGa_terms is not None:
            return eval_terms(self.IGa_terms, t)
        # repeated integral as a single one: int_0^t (t - s) g(s) ds
        return quad(lambda s: (t - s) * self._g(s), 0.0, t)

    def log_q(self, t: float) -> float:
        return self.k1 * (self.a0 + self.b0 - self.k) * t + self.k1 * self.int_G_a(t)

    def log_Q(self, t: float) -> float:
        if t <= 0:
            return -math.inf
        # log int_0^t q(s) ds, shifted by the largest exponent on a coarse grid;
        # geometric breakpoints resolve a q that is sharply peaked at either end
        grid = [t * j / 64 for j in range(65)]
        shift = max(self.log_q(s) for s in grid)
        ends = [t * 2.0 ** -j for j in range(7, 50)]
        points = sorted(set(grid[1:-1] + ends + [t - e for e in ends]) - {0.0, t})
        val = quad(lambda s: math.exp(self.log_q(s) - shift), 0.0, t, points=points)
        return shift + math.log(val) if val > 0 else -math.inf

    def b(self, t: float) -> float:
        if self.b0 == 0.0:
            return 0.0
        lq = self.log_q(t)
        denom = _logaddexp(0.0, math.log(self.k1 * self.b0) + self.log_Q(t))
        return math.exp(math.log(self.b0) + lq - denom)

    def a(self, t: float) -> float:
        return self.a0 + self.b0 + self.G_a(t) - self.b(t)


def motif2_general_a(k1: float, k2: float, a0: float, b0: float, g_a: Optional[TimeExpr], t: float) -> float:
    """``a(t)`` for ``a' = -k1 a b + k2 b + g_a(t)``, ``b' = k1 a b - k2 b``.

    Uses ``q(t) = exp[k1 (a0 + b0 - k) t + k1 int_0^t G_a]`` and
    ``Q = int q`` with the ratio ``b0 q / (1 + k1 b0 Q)`` formed in log space.
    """
    return _Motif2Oracle(k1, k2, a0, b0, g_a).a(t)


def motif2_general_b(k1: float, k2: float, a0: float, b0: float, g_a: Optional[TimeExpr], t: float) -> float:
    return _Motif2Oracle(k1, k2, a0, b0, g_a).b(t)


# ------------------------------------------------------ zero-load counterexample


def counterexample_x1_x2(k1: float, k2: float, b1: float, b2: float, t: float) -> Tuple[float, float]:
    """Explicit ``(x1, x2)`` for ``x2' = -k2 x2^2``, ``x1' = -k1 x1^2 - k2 x1 x2``.

    ``x2 = b2 / (1 + k2 b2 t)`` and
    ``x1 = b1 b2 k2 / ((1 + b2 k2 t) (b2 k2 + b1 k1 log(1 + b2 k2 t)))``.
    """
    u = 1.0 + b2 * k2 * t
    x2 = b2 / u
    x1 = b1 * b2 * k2 / (u * (b2 * k2 + b1 * k1 * math.log(u)))
    return x1, x2


# ------------------------------------------------------------------ G and H


def total_G(g_a: TimeExpr, g_b: Optional[TimeExpr], t: float) -> float:
    """``int_0^t (g_a + g_b) ds``; closed form on exp-poly inputs."""
    exprs = [e for e in (g_a, g_b) if e is not None and not is_identically_zero(e)]
    total = 0.0
    for e in exprs:
        terms = exp_poly_terms(e)
        anti = None if terms is None else antiderivative_terms(terms)
        total += eval_terms(anti, t) if anti is not None else quad(compile_expr(e), 0.0, t)
    return total


def H_outflow(g: TimeExpr, ell: float, t: float) -> float:
    """``H(t) = int_0^t exp(ell (s - t)) g(s) ds``."""
    if is_identically_zero(g):
        return 0.0
    if ell == 0.0:
        return total_G(g, None, t)
    terms = exp_poly_terms(g)
    if terms is not None:
        shifted = [ExpPolyTerm(tm.coef, tm.degree, tm.rate + ell) for tm in terms]
        anti = antiderivative_terms(shifted)
        if anti is not None:
            # evaluate e^{-ell t} * F(t) termwise to avoid overflow
            return math.fsum(tm.coef * (t ** tm.degree if tm.degree else 1.0) * math.exp((tm.rate - ell) * t)
                             for tm in anti)
    fn = compile_expr(g)
    return quad(lambda s: math.exp(ell * (s - t)) * fn(s), 0.0, t)


ORACLES = (
    OracleFn("canonical_b", canonical_b, "k1, k2 > 0; a0, b0 >= 0 not both zero; t >= 0"),
    OracleFn("motif2_general_a", motif2_general_a, "g_b = 0; g_a integrable on [0, t]"),
    OracleFn("counterexample_x1_x2", counterexample_x1_x2, "b1, b2 > 0; t >= 0"),
    OracleFn("total_G", total_G, "g_a, g_b integrable on [0, t]"),
    OracleFn("H_outflow", H_outflow, "ell >= 0; g integrable on [0, t]"),
)
