"""Time-expression language for inflow rates.

Expressions are small immutable ASTs over the single time variable ``t``,
named parameters, real constants, ``exp`` and ``log``.  The module provides
a recursive-descent parser, a printer whose output re-parses to the same
tree, evaluation (plain and log-domain), symbolic differentiation and a
growth classifier for the exp-poly class ``sum c * t^d * exp(lam*t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

__all__ = [
    "Constant", "TimeVar", "Param", "Add", "Mul", "Pow", "Exp", "Log",
    "TimeExpr", "GrowthClass", "ExprSyntaxError", "ExprEvalError",
    "ExprOverflow", "parse_expr", "print_expr", "eval_expr", "log_eval_expr",
    "diff_expr", "bind", "classify_growth", "exp_poly_terms", "ExpPolyTerm",
    "antiderivative_terms", "eval_terms", "terms_to_expr", "is_identically_zero",
    "validate_nonnegative", "compile_expr", "free_params", "NONNEG_SAMPLE_TIMES",
]

NONNEG_SAMPLE_TIMES = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0)
_LOG_DOMAIN_THRESHOLD = 1e300


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExprEvalError(ArithmeticError):
    pass


class ExprOverflow(ExprEvalError):
    """Raised when a value leaves the float range; use log_eval_expr instead."""


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class TimeVar:
    pass


@dataclass(frozen=True)
class Param:
    name: str
    value: Optional[float] = None


@dataclass(frozen=True)
class Add:
    args: tuple


@dataclass(frozen=True)
class Mul:
    args: tuple


@dataclass(frozen=True)
class Pow:
    base: "TimeExpr"
    exponent: float


@dataclass(frozen=True)
class Exp:
    arg: "TimeExpr"


@dataclass(frozen=True)
class Log:
    arg: "TimeExpr"


TimeExpr = Union[Constant, TimeVar, Param, Add, Mul, Pow, Exp, Log]

T = TimeVar()
ZERO = Constant(0.0)
ONE = Constant(1.0)


# ------------------------------------------------------------------------ parser


class _Parser:
    def __init__(self, text: str, base_offset: int = 0):
        self.text = text
        self.pos = 0
        self.base = base_offset

    def error(self, message: str, pos: Optional[int] = None):
        raise ExprSyntaxError(message, self.base + (self.pos if pos is None else pos))

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def number(self) -> float:
        self.skip_ws()
        start = self.pos
        text = self.text
        if self.pos < len(text) and text[self.pos] in "+-":
            self.pos += 1
        digits = 0
        while self.pos < len(text) and text[self.pos].isdigit():
            self.pos += 1
            digits += 1
        if self.pos < len(text) and text[self.pos] == ".":
            self.pos += 1
            while self.pos < len(text) and text[self.pos].isdigit():
                self.pos += 1
                digits += 1
        if digits == 0:
            self.error("expected number", start)
        if self.pos < len(text) and text[self.pos] in "eE":
            save = self.pos
            self.pos += 1
            if self.pos < len(text) and text[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(text) and text[self.pos].isdigit():
                while self.pos < len(text) and text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = save
        return float(text[start:self.pos])

    def parse(self) -> TimeExpr:
        node = self.expr()
        if self.peek():
            self.error(f"unexpected {self.peek()!r}")
        return node

    def expr(self) -> TimeExpr:
        terms = [self.term()]
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            rhs = self.term()
            terms.append(rhs if op == "+" else Mul((Constant(-1.0), rhs)))
        return terms[0] if len(terms) == 1 else Add(tuple(terms))

    def term(self) -> TimeExpr:
        factors = [self.factor()]
        while self.peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            start = self.pos
            rhs = self.factor()
            if op == "/":
                try:
                    den = eval_expr(rhs, 0.0, strict_params=False)
                except ExprEvalError:
                    den = float("nan")
                if den == 0.0:
                    self.error("division by an expression that is zero at t=0", start)
                rhs = Pow(rhs, -1.0)
            factors.append(rhs)
        return factors[0] if len(factors) == 1 else Mul(tuple(factors))

    def factor(self) -> TimeExpr:
        base = self.atom()
        if self.peek() == "^":
            self.pos += 1
            base = Pow(base, self.number())
        return base

    def atom(self) -> TimeExpr:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if ch.isdigit() or ch == "." or ch == "-":
            return Constant(self.number())
        if ch.isalpha() or ch == "_":
            start = self.pos
            while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
                self.pos += 1
            name = self.text[start:self.pos]
            if self.peek() == "(":
                if name not in ("exp", "log"):
                    self.error(f"unknown function {name!r}", start)
                self.pos += 1
                arg = self.expr()
                self.expect(")")
                return Exp(arg) if name == "exp" else Log(arg)
            if name == "t":
                return T
            if name in ("exp", "log"):
                self.error(f"function {name!r} needs an argument", start)
            return Param(name)
        if not ch:
            self.error("unexpected end of expression")
        self.error(f"unexpected {ch!r}")


def parse_expr(text: str, bindings: Optional[Mapping[str, float]] = None, *, _offset: int = 0) -> TimeExpr:
    """Parse ``text`` into a TimeExpr, optionally binding parameters.

    Subtraction ``a - b`` is represented as ``Add[a, Mul[-1, b]]`` and
    division ``a / b`` as ``Mul[a, Pow(b, -1)]``.
    """
    node = _Parser(text, _offset).parse()
    return bind(node, bindings) if bindings else node


# ----------------------------------------------------------------------- printer


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def print_expr(e: TimeExpr) -> str:
    """Render ``e`` so that ``parse_expr(print_expr(e)) == e``."""
    if isinstance(e, Constant):
        return _fmt_num(e.value)
    if isinstance(e, TimeVar):
        return "t"
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Add):
        return " + ".join(_wrap(a, (Add,)) for a in e.args)
    if isinstance(e, Mul):
        return "*".join(_wrap(a, (Add, Mul)) for a in e.args)
    if isinstance(e, Pow):
        return f"{_wrap(e.base, (Add, Mul, Pow), neg_const=True)}^{_fmt_num(e.exponent)}"
    if isinstance(e, Exp):
        return f"exp({print_expr(e.arg)})"
    if isinstance(e, Log):
        return f"log({print_expr(e.arg)})"
    raise TypeError(f"not a TimeExpr: {e!r}")


def _wrap(e: TimeExpr, kinds: tuple, neg_const: bool = False) -> str:
    s = print_expr(e)
    if isinstance(e, kinds) or (neg_const and isinstance(e, Constant) and e.value < 0):
        return f"({s})"
    return s


# -------------------------------------------------------------------- evaluation


def bind(e: TimeExpr, bindings: Mapping[str, float]) -> TimeExpr:
    if isinstance(e, Param):
        if e.name in bindings:
            return Param(e.name, float(bindings[e.name]))
        return e
    if isinstance(e, (Add, Mul)):
        return type(e)(tuple(bind(a, bindings) for a in e.args))
    if isinstance(e, Pow):
        return Pow(bind(e.base, bindings), e.exponent)
    if isinstance(e, (Exp, Log)):
        return type(e)(bind(e.arg, bindings))
    return e


def free_params(e: TimeExpr) -> set:
    if isinstance(e, Param):
        return {e.name} if e.value is None else set()
    if isinstance(e, (Add, Mul)):
        out = set()
        for a in e.args:
            out |= free_params(a)
        return out
    if isinstance(e, Pow):
        return free_params(e.base)
    if isinstance(e, (Exp, Log)):
        return free_params(e.arg)
    return set()


def _param_names(e: TimeExpr) -> set:
    if isinstance(e, Param):
        return {e.name}
    if isinstance(e, (Add, Mul)):
        return set().union(*(_param_names(a) for a in e.args))
    if isinstance(e, Pow):
        return _param_names(e.base)
    if isinstance(e, (Exp, Log)):
        return _param_names(e.arg)
    return set()


def _pow(base: float, p: float) -> float:
    if base == 0.0 and p < 0:
        raise ExprEvalError("division by zero")
    if base < 0 and p != int(p):
        raise ExprEvalError("fractional power of a negative value")
    try:
        return base ** p
    except OverflowError:
        raise ExprOverflow("power overflow") from None
    except ZeroDivisionError:
        raise ExprEvalError("division by zero") from None


def eval_expr(e: TimeExpr, t: float, *, strict_params: bool = True) -> float:
    """Evaluate ``e`` at time ``t``.

    Raises ExprOverflow when an intermediate exceeds the float range; callers
    that need such values should work with :func:`log_eval_expr`.
    """
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, TimeVar):
        return t
    if isinstance(e, Param):
        if e.value is None:
            if strict_params:
                raise ExprEvalError(f"unbound parameter {e.name!r}")
            return float("nan")
        return e.value
    if isinstance(e, Add):
        s = math.fsum(eval_expr(a, t, strict_params=strict_params) for a in e.args)
        if math.isinf(s):
            raise ExprOverflow("sum overflow")
        return s
    if isinstance(e, Mul):
        p = 1.0
        for a in e.args:
            p *= eval_expr(a, t, strict_params=strict_params)
        if math.isinf(p):
            raise ExprOverflow("product overflow")
        return p
    if isinstance(e, Pow):
        return _pow(eval_expr(e.base, t, strict_params=strict_params), e.exponent)
    if isinstance(e, Exp):
        try:
            return math.exp(eval_expr(e.arg, t, strict_params=strict_params))
        except OverflowError:
            raise ExprOverflow("exp overflow") from None
    if isinstance(e, Log):
        v = eval_expr(e.arg, t, strict_params=strict_params)
        if not v > 0:
            raise ExprEvalError("log of a nonpositive value")
        return math.log(v)
    raise TypeError(f"not a TimeExpr: {e!r}")


def log_eval_expr(e: TimeExpr, t: float) -> float:
    """Return ``log(e(t))`` without forming ``e(t)``; -inf for zero.

    Only defined where every sub-sum and product is nonnegative, which covers
    inflow rates such as ``exp(exp(t))`` whose values exceed the float range.
    """
    if isinstance(e, Exp):
        return eval_expr(e.arg, t) if not isinstance(e.arg, Exp) else _exp_of_log(log_eval_expr(e.arg, t))
    if isinstance(e, Mul):
        return math.fsum(log_eval_expr(a, t) for a in e.args)
    if isinstance(e, Pow):
        lb = log_eval_expr(e.base, t)
        if lb == -math.inf:
            if e.exponent < 0:
                raise ExprEvalError("division by zero")
            return -math.inf
        return e.exponent * lb
    if isinstance(e, Add):
        logs = [log_eval_expr(a, t) for a in e.args]
        m = max(logs)
        if m == -math.inf:
            return m
        return m + math.log(math.fsum(math.exp(v - m) for v in logs))
    v = eval_expr(e, t)
    if v < 0:
        raise ExprEvalError("log-domain evaluation of a negative value")
    return math.log(v) if v > 0 else -math.inf


def _exp_of_log(lv: float) -> float:
    try:
        return math.exp(lv)
    except OverflowError:
        raise ExprOverflow("log-domain value beyond float range") from None


def validate_nonnegative(e: TimeExpr, times: Sequence[float] = NONNEG_SAMPLE_TIMES) -> None:
    """Check ``e(t) >= 0`` on the sample grid; overflowing values count as positive."""
    for t in times:
        try:
            v = eval_expr(e, t)
        except ExprOverflow:
            if log_eval_expr(e, t) > 0:
                continue
            raise
        if not v >= 0:
            raise ExprEvalError(f"expression {print_expr(e)!r} is negative at t={t}")


_PY_HELPERS = {"exp": math.exp, "log": math.log}


def _to_py(e: TimeExpr) -> str:
    if isinstance(e, Constant):
        return repr(e.value)
    if isinstance(e, TimeVar):
        return "t"
    if isinstance(e, Param):
        if e.value is None:
            raise ExprEvalError(f"unbound parameter {e.name!r}")
        return repr(e.value)
    if isinstance(e, Add):
        return "(" + " + ".join(_to_py(a) for a in e.args) + ")"
    if isinstance(e, Mul):
        return "(" + " * ".join(_to_py(a) for a in e.args) + ")"
    if isinstance(e, Pow):
        p = e.exponent
        if p == int(p) and p >= 0:
            return f"({_to_py(e.base)} ** {int(p)})"
        return f"_pow({_to_py(e.base)}, {p!r})"
    if isinstance(e, Exp):
        return f"exp({_to_py(e.arg)})"
    if isinstance(e, Log):
        return f"log({_to_py(e.arg)})"
    raise TypeError(f"not a TimeExpr: {e!r}")


def compile_expr(e: TimeExpr):
    """Compile a bound expression into a fast ``t -> float`` callable.

    The callable raises OverflowError (not ExprOverflow) on overflow.
    """
    src = f"lambda t: {_to_py(e)}"
    return eval(src, {"exp": math.exp, "log": math.log, "_pow": _pow})


# ----------------------------------------------------------------- differentiation


def _mk_add(args) -> TimeExpr:
    out = []
    const = 0.0
    for a in args:
        if isinstance(a, Add):
            for b in a.args:
                if isinstance(b, Constant):
                    const += b.value
                else:
                    out.append(b)
        elif isinstance(a, Constant):
            const += a.value
        else:
            out.append(a)
    if const != 0.0 or not out:
        out.append(Constant(const))
    return out[0] if len(out) == 1 else Add(tuple(out))


def _mk_mul(args) -> TimeExpr:
    out = []
    const = 1.0
    for a in args:
        items = a.args if isinstance(a, Mul) else (a,)
        for b in items:
            if isinstance(b, Constant):
                const *= b.value
            else:
                out.append(b)
    if const == 0.0:
        return ZERO
    if const != 1.0 or not out:
        out.insert(0, Constant(const))
    return out[0] if len(out) == 1 else Mul(tuple(out))


def _mk_pow(base: TimeExpr, p: float) -> TimeExpr:
    if p == 0.0:
        return ONE
    if p == 1.0:
        return base
    if isinstance(base, Constant):
        return Constant(_pow(base.value, p))
    return Pow(base, p)


def diff_expr(e: TimeExpr) -> TimeExpr:
    """Symbolic d/dt with light constant folding."""
    if isinstance(e, (Constant, Param)):
        return ZERO
    if isinstance(e, TimeVar):
        return ONE
    if isinstance(e, Add):
        return _mk_add(diff_expr(a) for a in e.args)
    if isinstance(e, Mul):
        terms = []
        for i, a in enumerate(e.args):
            da = diff_expr(a)
            if da == ZERO:
                continue
            terms.append(_mk_mul([da] + [b for j, b in enumerate(e.args) if j != i]))
        return _mk_add(terms) if terms else ZERO
    if isinstance(e, Pow):
        db = diff_expr(e.base)
        if db == ZERO:
            return ZERO
        return _mk_mul([Constant(e.exponent), _mk_pow(e.base, e.exponent - 1.0), db])
    if isinstance(e, Exp):
        da = diff_expr(e.arg)
        return ZERO if da == ZERO else _mk_mul([da, e])
    if isinstance(e, Log):
        da = diff_expr(e.arg)
        return ZERO if da == ZERO else _mk_mul([da, Pow(e.arg, -1.0)])
    raise TypeError(f"not a TimeExpr: {e!r}")


# ----------------------------------------------------------- exp-poly machinery


@dataclass(frozen=True)
class ExpPolyTerm:
    """One term ``coef * t**degree * exp(rate * t)``."""

    coef: float
    degree: float
    rate: float


def _combine(terms) -> list:
    acc: dict = {}
    for tm in terms:
        key = (round(tm.degree, 12), round(tm.rate, 12))
        acc[key] = acc.get(key, 0.0) + tm.coef
    out = [ExpPolyTerm(c, d, r) for (d, r), c in acc.items() if c != 0.0]
    out.sort(key=lambda tm: (tm.rate, tm.degree))
    return out


def _param_value(e: Param) -> Optional[float]:
    return e.value


def exp_poly_terms(e: TimeExpr) -> Optional[list]:
    """Expand ``e`` into exp-poly terms, or return None outside the class.

    Terms are combined and sorted by growth order (rate, then degree).
    """
    if isinstance(e, Constant):
        return _combine([ExpPolyTerm(e.value, 0.0, 0.0)])
    if isinstance(e, Param):
        v = _param_value(e)
        return None if v is None else _combine([ExpPolyTerm(v, 0.0, 0.0)])
    if isinstance(e, TimeVar):
        return [ExpPolyTerm(1.0, 1.0, 0.0)]
    if isinstance(e, Add):
        out = []
        for a in e.args:
            ta = exp_poly_terms(a)
            if ta is None:
                return None
            out.extend(ta)
        return _combine(out)
    if isinstance(e, Mul):
        acc = [ExpPolyTerm(1.0, 0.0, 0.0)]
        for a in e.args:
            ta = exp_poly_terms(a)
            if ta is None:
                return None
            acc = _combine(ExpPolyTerm(x.coef * y.coef, x.degree + y.degree, x.rate + y.rate)
                           for x in acc for y in ta)
        return acc
    if isinstance(e, Pow):
        tb = exp_poly_terms(e.base)
        if tb is None:
            return None
        if len(tb) == 0:
            return [] if e.exponent > 0 else None
        if len(tb) == 1:
            (b,) = tb
            if b.coef < 0 and e.exponent != int(e.exponent):
                return None
            return [ExpPolyTerm(b.coef ** e.exponent, b.degree * e.exponent, b.rate * e.exponent)]
        p = e.exponent
        if p == int(p) and 0 <= p <= 8:
            acc = [ExpPolyTerm(1.0, 0.0, 0.0)]
            for _ in range(int(p)):
                acc = _combine(ExpPolyTerm(x.coef * y.coef, x.degree + y.degree, x.rate + y.rate)
                               for x in acc for y in tb)
            return acc
        return None
    if isinstance(e, Exp):
        ta = exp_poly_terms(e.arg)
        if ta is None:
            return None
        const = 0.0
        rate = 0.0
        for tm in ta:
            if tm.rate == 0.0 and tm.degree == 0.0:
                const += tm.coef
            elif tm.rate == 0.0 and tm.degree == 1.0:
                rate += tm.coef
            else:
                return None
        return [ExpPolyTerm(math.exp(const), 0.0, rate)]
    return None


def eval_terms(terms, t: float) -> float:
    return math.fsum(tm.coef * (t ** tm.degree if tm.degree else 1.0) * math.exp(tm.rate * t) for tm in terms)


def terms_to_expr(terms) -> TimeExpr:
    parts = []
    for tm in terms:
        factors = [Constant(tm.coef)]
        if tm.degree:
            factors.append(_mk_pow(T, tm.degree))
        if tm.rate:
            factors.append(Exp(_mk_mul([Constant(tm.rate), T])))
        parts.append(_mk_mul(factors))
    return _mk_add(parts) if parts else ZERO


def antiderivative_terms(terms) -> Optional[list]:
    """Exp-poly terms of ``t -> int_0^t e(s) ds``, or None when not closed-form.

    Supports ``t^d`` with real ``d > -1`` and ``t^n exp(lam t)`` with integer
    ``n >= 0``.
    """
    out = []
    const = 0.0
    for tm in terms:
        c, d, lam = tm.coef, tm.degree, tm.rate
        if lam == 0.0:
            if d <= -1.0:
                return None
            out.append(ExpPolyTerm(c / (d + 1.0), d + 1.0, 0.0))
            continue
        if d < 0 or d != int(d):
            return None
        n = int(d)
        # int s^n e^{lam s} ds = e^{lam t} sum_k (-1)^k n!/(n-k)! t^{n-k} / lam^{k+1}
        for k in range(n + 1):
            coef = c * (-1) ** k * math.factorial(n) / math.factorial(n - k) / lam ** (k + 1)
            out.append(ExpPolyTerm(coef, float(n - k), lam))
        const -= c * (-1) ** n * math.factorial(n) / lam ** (n + 1)
    if const:
        out.append(ExpPolyTerm(const, 0.0, 0.0))
    return _combine(out)


# ------------------------------------------------------------ growth classifier


@dataclass(frozen=True)
class GrowthClass:
    tag: str
    degree: float = 0.0
    rate: float = 0.0

    def __str__(self) -> str:
        if self.tag == "PolyGrowth":
            return f"PolyGrowth({_fmt_num(self.degree)})"
        if self.tag == "ExpGrowth":
            return f"ExpGrowth({_fmt_num(self.rate)}, {_fmt_num(self.degree)})"
        return self.tag


def _grows_to_infinity(terms) -> bool:
    if not terms:
        return False
    lead = terms[-1]
    return lead.coef > 0 and (lead.rate > 0 or (lead.rate == 0 and lead.degree > 0))


def classify_growth(e: TimeExpr) -> GrowthClass:
    """Classify the long-time growth of ``e``.

    Exact on the exp-poly class with nonnegative coefficients and on
    ``exp(u)`` with ``u`` an exp-poly tending to infinity faster than
    linearly (``DoubleExp``); anything else is ``Unclassified``.
    """
    terms = exp_poly_terms(e)
    if terms is None:
        if isinstance(e, Exp):
            inner = exp_poly_terms(e.arg)
            if inner is not None and _grows_to_infinity(inner) and inner[-1].rate > 0:
                return GrowthClass("DoubleExp")
        return GrowthClass("Unclassified")
    if any(tm.coef < 0 for tm in terms):
        return GrowthClass("Unclassified")
    if not terms:
        return GrowthClass("Zero")
    lead = terms[-1]
    if lead.rate != 0.0:
        return GrowthClass("ExpGrowth", degree=lead.degree, rate=lead.rate)
    if lead.degree != 0.0:
        return GrowthClass("PolyGrowth", degree=lead.degree)
    return GrowthClass("BoundedNonzero")


def is_identically_zero(e: TimeExpr) -> bool:
    terms = exp_poly_terms(e)
    return terms is not None and not terms
