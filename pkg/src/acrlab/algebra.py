"""Exact coefficient ring over named rate constants, and sparse polynomials.

A :class:`RateCoeff` is a finite sum of terms ``q * prod(k_j ** e_j)`` with
``q`` a Fraction and integer (possibly negative) exponents, i.e. a Laurent
polynomial in the rate-constant names.  :class:`Poly` is a sparse
multivariate polynomial in species concentrations with RateCoeff
coefficients.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

Monomial = Tuple[Tuple[str, int], ...]
Number = Union[int, float, Fraction]


def to_fraction(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    # repr gives the shortest decimal that round-trips, so 0.3 -> 3/10
    return Fraction(repr(float(x)))


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    acc = dict(a)
    for name, e in b:
        acc[name] = acc.get(name, 0) + e
    return tuple(sorted((n, e) for n, e in acc.items() if e != 0))


class RateCoeff:
    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[Monomial, Fraction]] = None):
        self.terms: Dict[Monomial, Fraction] = {m: c for m, c in (terms or {}).items() if c != 0}

    @classmethod
    def const(cls, value: Number) -> "RateCoeff":
        return cls({(): to_fraction(value)})

    @classmethod
    def symbol(cls, name: str, power: int = 1) -> "RateCoeff":
        return cls({((name, power),): Fraction(1)})

    def is_zero(self) -> bool:
        return not self.terms

    def is_single_term(self) -> bool:
        return len(self.terms) == 1

    def constant_value(self) -> Optional[Fraction]:
        if not self.terms:
            return Fraction(0)
        if set(self.terms) == {()}:
            return self.terms[()]
        return None

    def all_positive(self) -> bool:
        return bool(self.terms) and all(c > 0 for c in self.terms.values())

    def names(self) -> set:
        return {n for m in self.terms for n, _ in m}

    def __add__(self, other) -> "RateCoeff":
        if isinstance(other, Poly):
            return NotImplemented
        other = _as_coeff(other)
        acc = dict(self.terms)
        for m, c in other.terms.items():
            acc[m] = acc.get(m, Fraction(0)) + c
        return RateCoeff(acc)

    __radd__ = __add__

    def __neg__(self) -> "RateCoeff":
        return RateCoeff({m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> "RateCoeff":
        if isinstance(other, Poly):
            return NotImplemented
        return self + (-_as_coeff(other))

    def __rsub__(self, other) -> "RateCoeff":
        return _as_coeff(other) - self

    def __mul__(self, other) -> "RateCoeff":
        if isinstance(other, Poly):
            return NotImplemented
        other = _as_coeff(other)
        acc: Dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                acc[m] = acc.get(m, Fraction(0)) + c1 * c2
        return RateCoeff(acc)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "RateCoeff":
        out = RateCoeff.const(1)
        for _ in range(n):
            out = out * self
        return out

    def inverse(self) -> "RateCoeff":
        """Multiplicative inverse; only single-term coefficients are invertible."""
        if not self.is_single_term():
            raise ZeroDivisionError(f"cannot invert multi-term coefficient {self}")
        (m, c), = self.terms.items()
        return RateCoeff({tuple((n, -e) for n, e in m): 1 / c})

    def __truediv__(self, other) -> "RateCoeff":
        return self * _as_coeff(other).inverse()

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, float, Fraction)):
            other = RateCoeff.const(other)
        return isinstance(other, RateCoeff) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def evaluate(self, bindings: Mapping[str, float]) -> float:
        total = []
        for m, c in self.terms.items():
            v = float(c)
            for name, e in m:
                try:
                    v *= float(bindings[name]) ** e
                except KeyError:
                    raise KeyError(f"unbound rate constant {name!r}") from None
            total.append(v)
        return math.fsum(total)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda m: (len(m), m)):
            c = self.terms[m]
            num = [n if e == 1 else f"{n}^{e}" for n, e in m if e > 0]
            den = [n if e == -1 else f"{n}^{-e}" for n, e in m if e < 0]
            sign = "-" if c < 0 else "+"
            c = abs(c)
            if c.numerator != 1 or not num:
                num.insert(0, str(c.numerator))
            if c.denominator != 1:
                den.insert(0, str(c.denominator))
            s = "*".join(num)
            if den:
                s += "/" + (den[0] if len(den) == 1 else "(" + "*".join(den) + ")")
            parts.append((sign, s))
        out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, s in parts[1:]:
            out += f" {sign} {s}"
        return out

    def __repr__(self) -> str:
        return f"RateCoeff({str(self)!r})"


def _as_coeff(x) -> RateCoeff:
    if isinstance(x, RateCoeff):
        return x
    if isinstance(x, (int, float, Fraction)):
        return RateCoeff.const(x)
    raise TypeError(f"cannot use {x!r} as a RateCoeff")


Exponents = Tuple[int, ...]


class Poly:
    """Sparse polynomial over a fixed ordered species tuple."""

    __slots__ = ("species", "terms")

    def __init__(self, species: Tuple[str, ...], terms: Optional[Mapping[Exponents, RateCoeff]] = None):
        self.species = tuple(species)
        self.terms: Dict[Exponents, RateCoeff] = {}
        for e, c in (terms or {}).items():
            if not c.is_zero():
                self.terms[tuple(e)] = c

    @classmethod
    def zero(cls, species) -> "Poly":
        return cls(species)

    @classmethod
    def constant(cls, species, c) -> "Poly":
        return cls(species, {(0,) * len(species): _as_coeff(c)})

    @classmethod
    def monomial(cls, species, exps: Exponents, c=1) -> "Poly":
        return cls(species, {tuple(exps): _as_coeff(c)})

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.constant(self.species, other)
        acc = dict(self.terms)
        for e, c in other.terms.items():
            acc[e] = acc[e] + c if e in acc else c
        return Poly(self.species, acc)

    def __neg__(self) -> "Poly":
        return Poly(self.species, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.constant(self.species, other)
        return self + (-other)

    __radd__ = __add__

    def __rsub__(self, other) -> "Poly":
        return (-self) + other

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            c = _as_coeff(other)
            return Poly(self.species, {e: v * c for e, v in self.terms.items()})
        acc: Dict[Exponents, RateCoeff] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = acc[e] + c1 * c2 if e in acc else c1 * c2
        return Poly(self.species, acc)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.species == other.species and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.species, frozenset(self.terms.items())))

    def degree_in(self, i: int) -> int:
        return max((e[i] for e in self.terms), default=0)

    def depends_on(self, i: int) -> bool:
        return any(e[i] for e in self.terms)

    def variables(self) -> set:
        return {self.species[i] for e in self.terms for i, p in enumerate(e) if p}

    def coefficients_in(self, i: int) -> Dict[int, "Poly"]:
        """Split as ``sum_p x_i^p * P_p`` with ``P_p`` free of ``x_i``."""
        out: Dict[int, Dict[Exponents, RateCoeff]] = {}
        for e, c in self.terms.items():
            rest = e[:i] + (0,) + e[i + 1:]
            out.setdefault(e[i], {})[rest] = c
        return {p: Poly(self.species, d) for p, d in out.items()}

    def by_other_monomials(self, i: int) -> Dict[Exponents, Dict[int, RateCoeff]]:
        """Group as ``sum_m m * P_m(x_i)`` with ``m`` a monomial free of ``x_i``."""
        out: Dict[Exponents, Dict[int, RateCoeff]] = {}
        for e, c in self.terms.items():
            rest = e[:i] + (0,) + e[i + 1:]
            out.setdefault(rest, {})[e[i]] = c
        return out

    def substitute(self, i: int, value) -> "Poly":
        """Replace ``x_i`` by a RateCoeff value."""
        value = _as_coeff(value)
        acc: Dict[Exponents, RateCoeff] = {}
        for e, c in self.terms.items():
            rest = e[:i] + (0,) + e[i + 1:]
            term = c * value ** e[i]
            acc[rest] = acc[rest] + term if rest in acc else term
        return Poly(self.species, acc)

    def divide_linear(self, i: int, root) -> Tuple["Poly", "Poly"]:
        """Divide by ``(x_i - root)``; returns ``(quotient, remainder)``.

        The remainder is free of ``x_i`` and equals ``self`` with ``x_i = root``.
        """
        root = _as_coeff(root)
        coeffs = self.coefficients_in(i)
        deg = max(coeffs, default=0)
        unit = tuple(1 if j == i else 0 for j in range(len(self.species)))
        quotient = Poly.zero(self.species)
        carry = Poly.zero(self.species)
        # synthetic division from the top power down
        for p in range(deg, 0, -1):
            carry = carry * root + coeffs.get(p, Poly.zero(self.species))
            quotient = quotient + carry * Poly.monomial(self.species, tuple(u * (p - 1) for u in unit))
        remainder = carry * root + coeffs.get(0, Poly.zero(self.species))
        return quotient, remainder

    def shift(self, i: int, c) -> "Poly":
        """Substitute ``x_i -> x_i + c`` and expand."""
        c = _as_coeff(c)
        acc = Poly(self.species)
        for e, coef in self.terms.items():
            p = e[i]
            for k in range(p + 1):
                ek = e[:i] + (k,) + e[i + 1:]
                acc = acc + Poly(self.species, {ek: coef * math.comb(p, k) * c ** (p - k)})
        return acc

    def derivative(self, i: int) -> "Poly":
        acc: Dict[Exponents, RateCoeff] = {}
        for e, c in self.terms.items():
            if e[i]:
                ne = e[:i] + (e[i] - 1,) + e[i + 1:]
                acc[ne] = c * e[i]
        return Poly(self.species, acc)

    def evaluate(self, bindings: Mapping[str, float], x) -> float:
        total = []
        for e, c in self.terms.items():
            v = c.evaluate(bindings)
            for xi, p in zip(x, e):
                if p:
                    v *= xi ** p
            total.append(v)
        return math.fsum(total)

    def numeric_terms(self, bindings: Mapping[str, float]):
        """``[(float coefficient, exponents), ...]`` for compiled evaluation."""
        return [(c.evaluate(bindings), e) for e, c in sorted(self.terms.items())]

    def to_source(self, bindings: Mapping[str, float], var: str = "x") -> str:
        parts = []
        for coef, e in self.numeric_terms(bindings):
            if coef == 0.0:
                continue
            factors = [repr(coef)]
            for j, p in enumerate(e):
                if p == 1:
                    factors.append(f"{var}[{j}]")
                elif p > 1:
                    factors.append(f"{var}[{j}]**{p}")
            parts.append("*".join(factors))
        return " + ".join(parts) if parts else "0.0"

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, reverse=True):
            c = self.terms[e]
            mono = "*".join(s if p == 1 else f"{s}^{p}" for s, p in zip(self.species, e) if p)
            cs = str(c)
            if not mono:
                parts.append(cs)
            elif cs == "1":
                parts.append(mono)
            elif cs == "-1":
                parts.append("-" + mono)
            else:
                parts.append(f"({cs})*{mono}" if (" " in cs) else f"{cs}*{mono}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"Poly({str(self)!r})"

    def to_json(self) -> list:
        return [
            {"coeff": str(c), "powers": {s: p for s, p in zip(self.species, e) if p}}
            for e, c in sorted(self.terms.items(), reverse=True)
        ]


def rref(rows: Iterable[Iterable[Fraction]]):
    """Reduced row echelon form over the rationals; returns (rows, pivots)."""
    m = [[Fraction(v) for v in r] for r in rows]
    if not m:
        return [], []
    ncols = len(m[0])
    pivots = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        pv = m[r][col]
        m[r] = [v / pv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col] != 0:
                f = m[i][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(col)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def nullspace(rows, ncols: int):
    """Rational basis of ``{v : rows @ v = 0}``."""
    red, pivots = rref(rows) if rows else ([], [])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for row, pc in zip(red, pivots):
            v[pc] = -row[fc]
        basis.append(v)
    return basis


def integerize(v) -> Tuple[int, ...]:
    den = 1
    for x in v:
        den = den * Fraction(x).denominator // math.gcd(den, Fraction(x).denominator)
    ints = [int(Fraction(x) * den) for x in v]
    g = 0
    for x in ints:
        g = math.gcd(g, abs(x))
    g = g or 1
    ints = [x // g for x in ints]
    first = next((x for x in ints if x), 0)
    if first < 0:
        ints = [-x for x in ints]
    return tuple(ints)
