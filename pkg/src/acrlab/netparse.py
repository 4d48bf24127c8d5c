"""Reaction-network DSL.

Statements are ``;``-terminated, ``#`` starts a line comment::

    species A, B;
    A + B -> 2 B @ k1 = 1.0;
    B -> A @ k2 = 2.0;
    inflow A @ t^2 + 1;
    outflow A @ 0.3;
    param alpha = 0.3;

``0`` denotes the zero complex.  ``param`` statements bind names used in
inflow expressions (rate-constant names may be used there too).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

from .exprlang import (
    ExprEvalError, ExprSyntaxError, TimeExpr, bind, free_params, parse_expr, print_expr,
    validate_nonnegative,
)

__all__ = ["Complex", "Reaction", "Network", "NetworkSyntaxError", "NetworkValidationError",
           "parse_network", "print_network", "MAX_STOICH"]

MAX_STOICH = 99
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\Z")


class NetworkSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class NetworkValidationError(NetworkSyntaxError):
    pass


@dataclass(frozen=True)
class Complex:
    """Stoichiometric coefficients, stored as a sorted tuple of (species, coeff)."""

    coefficients: Tuple[Tuple[str, int], ...] = ()

    @classmethod
    def from_dict(cls, d: Mapping[str, int]) -> "Complex":
        return cls(tuple(sorted((s, int(c)) for s, c in d.items() if c)))

    def as_dict(self) -> Dict[str, int]:
        return dict(self.coefficients)

    def __str__(self) -> str:
        if not self.coefficients:
            return "0"
        return " + ".join(s if c == 1 else f"{c} {s}" for s, c in self.coefficients)


@dataclass(frozen=True)
class Reaction:
    reactant: Complex
    product: Complex
    rate_name: str
    rate_value: float

    def net_change(self, species: str) -> int:
        return self.product.as_dict().get(species, 0) - self.reactant.as_dict().get(species, 0)


@dataclass(frozen=True)
class Network:
    species: Tuple[str, ...]
    reactions: Tuple[Reaction, ...]
    inflows: Tuple[Tuple[str, TimeExpr], ...] = ()
    outflows: Tuple[Tuple[str, float], ...] = ()
    params: Tuple[Tuple[str, float], ...] = ()

    @property
    def inflow_map(self) -> Dict[str, TimeExpr]:
        return dict(self.inflows)

    @property
    def outflow_map(self) -> Dict[str, float]:
        return dict(self.outflows)

    def rate_constants(self) -> Dict[str, float]:
        return {r.rate_name: r.rate_value for r in self.reactions}

    def bindings(self, overrides: Optional[Mapping[str, float]] = None) -> Dict[str, float]:
        out = dict(self.params)
        out.update(self.rate_constants())
        if overrides:
            out.update(overrides)
        return out

    def index(self, name: str) -> int:
        try:
            return self.species.index(name)
        except ValueError:
            raise KeyError(f"unknown species {name!r}") from None

    def bound_inflows(self, overrides: Optional[Mapping[str, float]] = None) -> Dict[str, TimeExpr]:
        b = self.bindings(overrides)
        return {s: bind(e, b) for s, e in self.inflows}


class _Source:
    def __init__(self, text: str):
        self.text = text
        self.line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def position(self, offset: int) -> Tuple[int, int]:
        lo, hi = 0, len(self.line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.line_starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, offset - self.line_starts[lo] + 1

    def error(self, message: str, offset: int, cls=NetworkSyntaxError):
        line, col = self.position(offset)
        raise cls(message, line, col)


def _strip_comments(text: str) -> str:
    # blank out comments so offsets stay valid
    return re.sub(r"#[^\n]*", lambda m: " " * len(m.group()), text)


def _statements(text: str):
    """Yield ``(offset, body, terminated)`` for each ``;``-separated chunk."""
    start = 0
    for i, ch in enumerate(text):
        if ch == ";":
            yield start, text[start:i], True
            start = i + 1
    yield start, text[start:], False


def _lead(chunk: str) -> int:
    return len(chunk) - len(chunk.lstrip())


def parse_network(text: str) -> Network:
    """Parse and validate the DSL into a :class:`Network`."""
    src = _Source(text)
    clean = _strip_comments(text)
    species: List[str] = []
    species_pos: Dict[str, int] = {}
    reactions: List[Tuple[Reaction, int]] = []
    inflows: Dict[str, Tuple[TimeExpr, int]] = {}
    outflows: Dict[str, Tuple[float, int]] = {}
    params: Dict[str, float] = {}
    names_seen: Dict[str, int] = {}

    for start, stmt, terminated in _statements(clean):
        if not stmt.strip():
            continue
        off = start + _lead(stmt)
        if not terminated:
            src.error("missing ';' at end of statement", start + len(stmt.rstrip()))
        body = stmt.strip()
        head = body.split(None, 1)[0] if body.split() else ""
        if head == "species":
            rest = body[len("species"):]
            base = off + len("species")
            pos = 0
            for part in rest.split(","):
                name = part.strip()
                p = base + pos + _lead(part)
                pos += len(part) + 1
                if not _IDENT.match(name):
                    src.error(f"invalid species name {name!r}", p)
                if name in species_pos:
                    src.error(f"duplicate species {name!r}", p, NetworkValidationError)
                species_pos[name] = p
                species.append(name)
        elif head in ("inflow", "outflow", "param"):
            _flow_or_param(src, head, body, off, species_pos, inflows, outflows, params, names_seen)
        elif "->" in body:
            reactions.append((_reaction(src, body, off, species_pos, names_seen), off))
        else:
            src.error(f"unrecognised statement {body[:20]!r}", off)

    if not species:
        src.error("no species declared", 0, NetworkValidationError)
    _validate(src, species, reactions, inflows, outflows, params)
    return Network(
        species=tuple(species),
        reactions=tuple(r for r, _ in reactions),
        inflows=tuple((s, e) for s, (e, _) in inflows.items()),
        outflows=tuple((s, v) for s, (v, _) in outflows.items()),
        params=tuple(params.items()),
    )


def _parse_number(src: _Source, text: str, offset: int) -> float:
    s = text.strip()
    if not _NUMBER.match(s):
        src.error(f"expected a number, got {s!r}", offset + _lead(text))
    return float(s)


def _flow_or_param(src, head, body, off, species_pos, inflows, outflows, params, names_seen):
    rest = body[len(head):]
    if "@" not in rest and head != "param":
        src.error(f"{head} needs '@'", off)
    if head == "param":
        if "=" not in rest:
            src.error("param needs '='", off)
        name, value = rest.split("=", 1)
        name_s = name.strip()
        if not _IDENT.match(name_s):
            src.error(f"invalid parameter name {name_s!r}", off + len(head) + _lead(name))
        if name_s in names_seen:
            src.error(f"duplicate constant name {name_s!r}", off, NetworkValidationError)
        names_seen[name_s] = off
        params[name_s] = _parse_number(src, value, off + len(head) + len(name) + 1)
        return
    target, expr_text = rest.split("@", 1)
    sp = target.strip()
    sp_off = off + len(head) + _lead(target)
    if sp not in species_pos:
        src.error(f"undeclared species {sp!r}", sp_off, NetworkValidationError)
    expr_off = off + len(head) + len(target) + 1
    if head == "inflow":
        if sp in inflows:
            src.error(f"duplicate inflow for {sp!r}", sp_off, NetworkValidationError)
        try:
            e = parse_expr(expr_text, _offset=expr_off)
        except ExprSyntaxError as exc:
            src.error(str(exc).rsplit(" at offset", 1)[0], exc.offset)
        inflows[sp] = (e, expr_off)
    else:
        if sp in outflows:
            src.error(f"duplicate outflow for {sp!r}", sp_off, NetworkValidationError)
        v = _parse_number(src, expr_text, expr_off)
        if not v > 0:
            src.error("outflow rate must be positive", expr_off, NetworkValidationError)
        outflows[sp] = (v, expr_off)


def _complex(src: _Source, text: str, offset: int, species_pos) -> Complex:
    s = text.strip()
    if s == "0":
        return Complex()
    coeffs: Dict[str, int] = {}
    pos = 0
    for part in text.split("+"):
        p = offset + pos + _lead(part)
        pos += len(part) + 1
        tok = part.split()
        if not tok:
            src.error("empty term in complex", p)
        if len(tok) == 1:
            m = re.match(r"(\d*)([A-Za-z_][A-Za-z0-9_]*)\Z", tok[0])
            if not m:
                src.error(f"invalid complex term {part.strip()!r}", p)
            c = int(m.group(1)) if m.group(1) else 1
            name = m.group(2)
        elif len(tok) == 2 and tok[0].isdigit():
            c, name = int(tok[0]), tok[1]
        else:
            src.error(f"invalid complex term {part.strip()!r}", p)
        if not 1 <= c <= MAX_STOICH:
            src.error(f"stoichiometric coefficient {c} outside 1..{MAX_STOICH}", p, NetworkValidationError)
        if name not in species_pos:
            src.error(f"undeclared species {name!r}", p, NetworkValidationError)
        coeffs[name] = coeffs.get(name, 0) + c
    return Complex.from_dict(coeffs)


def _reaction(src, body, off, species_pos, names_seen) -> Reaction:
    if "@" not in body:
        src.error("reaction needs '@ name = value'", off)
    arrow_part, rate_part = body.split("@", 1)
    lhs, rhs = arrow_part.split("->", 1)
    if "->" in rhs:
        src.error("only one '->' per reaction", off + len(lhs) + 2 + rhs.index("->"))
    reactant = _complex(src, lhs, off, species_pos)
    product = _complex(src, rhs, off + len(lhs) + 2, species_pos)
    rate_off = off + len(arrow_part) + 1
    if "=" not in rate_part:
        src.error("rate constant needs 'name = value'", rate_off)
    name, value = rate_part.split("=", 1)
    name_s = name.strip()
    if not _IDENT.match(name_s):
        src.error(f"invalid rate-constant name {name_s!r}", rate_off + _lead(name))
    if name_s in names_seen:
        src.error(f"duplicate constant name {name_s!r}", rate_off + _lead(name), NetworkValidationError)
    v = _parse_number(src, value, rate_off + len(name) + 1)
    if not v > 0:
        src.error(f"rate constant {name_s} must be positive", rate_off + len(name) + 1, NetworkValidationError)
    if reactant == product:
        src.error("reactant and product complexes are identical", off, NetworkValidationError)
    names_seen[name_s] = rate_off
    return Reaction(reactant, product, name_s, v)


def _validate(src, species, reactions, inflows, outflows, params):
    seen: Dict[Tuple[Complex, Complex], int] = {}
    used = set(inflows) | set(outflows)
    for r, off in reactions:
        key = (r.reactant, r.product)
        if key in seen:
            src.error(f"duplicate reaction {r.reactant} -> {r.product}", off, NetworkValidationError)
        seen[key] = off
        used |= set(r.reactant.as_dict()) | set(r.product.as_dict())
    for s in species:
        if s not in used:
            src.error(f"species {s!r} appears in no reaction, inflow or outflow", 0, NetworkValidationError)
    constants = dict(params)
    constants.update({r.rate_name: r.rate_value for r, _ in reactions})
    for s, (e, off) in inflows.items():
        bound = bind(e, constants)
        missing = free_params(bound)
        if missing:
            src.error(f"unknown name(s) {sorted(missing)} in inflow of {s!r}", off, NetworkValidationError)
        try:
            validate_nonnegative(bound)
        except ExprEvalError as exc:
            src.error(f"inflow of {s!r} fails nonnegativity check: {exc}", off, NetworkValidationError)


def _fmt(v: float) -> str:
    return repr(float(v))


def print_network(n: Network) -> str:
    """Canonical DSL text; ``parse_network(print_network(n)) == n``."""
    lines = [f"species {', '.join(n.species)};"]
    for name, v in n.params:
        lines.append(f"param {name} = {_fmt(v)};")
    for r in n.reactions:
        lines.append(f"{r.reactant} -> {r.product} @ {r.rate_name} = {_fmt(r.rate_value)};")
    for s, e in n.inflows:
        lines.append(f"inflow {s} @ {print_expr(e)};")
    for s, v in n.outflows:
        lines.append(f"outflow {s} @ {_fmt(v)};")
    return "\n".join(lines) + "\n"
