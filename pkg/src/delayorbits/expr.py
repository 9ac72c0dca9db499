"""Formula parsing and exact differentiation for the two defining scalar functions.

User-supplied formulas for the angular function f and the radial function g are
parsed into small expression trees that evaluate the value together with exact
first and second derivatives (a second-order forward-mode jet). No numerical
differencing is involved; every rule is the textbook chain/product rule, so the
derivatives are exact up to roundoff and bit-deterministic.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' ['-'] INTEGER)?
    atom   := NUMBER | 'pi' | VARIABLE | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := sin | cos | exp | sqrt | abs | arcsin | arccos

Exponents must be integer literals. Error positions are 0-based byte offsets.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import (
    DomainError,
    FormulaSyntaxError,
    InvalidGError,
    PeriodicityWarning,
    UnknownIdentifierError,
)

__all__ = ["Jet2", "ScalarFunction", "parse", "eval_jet2", "g_tilde"]

_G_ZERO_TOL = 1e-12
_PERIOD_CHECK_POINTS = 64


@dataclass(frozen=True)
class Jet2:
    """Value with exact first and second derivative at a point."""

    value: float
    d1: float
    d2: float


# ---------------------------------------------------------------------------
# AST nodes.  Each node evaluates either a plain value (cheap path for scans
# and bisection) or a full second-order jet.
# ---------------------------------------------------------------------------


class Node:
    __slots__ = ()

    def eval(self, x: float) -> float:
        raise NotImplementedError

    def jet(self, x: float) -> tuple[float, float, float]:
        """Return (value, d1, d2) at x."""
        raise NotImplementedError

    def to_source(self) -> str:
        raise NotImplementedError


class Num(Node):
    __slots__ = ("v",)

    def __init__(self, v: float):
        self.v = v

    def eval(self, x):
        return self.v

    def jet(self, x):
        return (self.v, 0.0, 0.0)

    def to_source(self):
        return repr(self.v)


class Var(Node):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def eval(self, x):
        return x

    def jet(self, x):
        return (x, 1.0, 0.0)

    def to_source(self):
        return self.name


class Add(Node):
    __slots__ = ("a", "b")

    def __init__(self, a: Node, b: Node):
        self.a, self.b = a, b

    def eval(self, x):
        return self.a.eval(x) + self.b.eval(x)

    def jet(self, x):
        av, a1, a2 = self.a.jet(x)
        bv, b1, b2 = self.b.jet(x)
        return (av + bv, a1 + b1, a2 + b2)

    def to_source(self):
        return f"({self.a.to_source()} + {self.b.to_source()})"


class Sub(Node):
    __slots__ = ("a", "b")

    def __init__(self, a: Node, b: Node):
        self.a, self.b = a, b

    def eval(self, x):
        return self.a.eval(x) - self.b.eval(x)

    def jet(self, x):
        av, a1, a2 = self.a.jet(x)
        bv, b1, b2 = self.b.jet(x)
        return (av - bv, a1 - b1, a2 - b2)

    def to_source(self):
        return f"({self.a.to_source()} - {self.b.to_source()})"


class Mul(Node):
    __slots__ = ("a", "b")

    def __init__(self, a: Node, b: Node):
        self.a, self.b = a, b

    def eval(self, x):
        return self.a.eval(x) * self.b.eval(x)

    def jet(self, x):
        av, a1, a2 = self.a.jet(x)
        bv, b1, b2 = self.b.jet(x)
        return (av * bv, a1 * bv + av * b1, a2 * bv + 2.0 * a1 * b1 + av * b2)

    def to_source(self):
        return f"({self.a.to_source()} * {self.b.to_source()})"


class Div(Node):
    __slots__ = ("a", "b")

    def __init__(self, a: Node, b: Node):
        self.a, self.b = a, b

    def eval(self, x):
        return self.a.eval(x) / self.b.eval(x)

    def jet(self, x):
        av, a1, a2 = self.a.jet(x)
        bv, b1, b2 = self.b.jet(x)
        q = av / bv
        q1 = (a1 - q * b1) / bv
        q2 = (a2 - 2.0 * q1 * b1 - q * b2) / bv
        return (q, q1, q2)

    def to_source(self):
        return f"({self.a.to_source()} / {self.b.to_source()})"


class Neg(Node):
    __slots__ = ("a",)

    def __init__(self, a: Node):
        self.a = a

    def eval(self, x):
        return -self.a.eval(x)

    def jet(self, x):
        av, a1, a2 = self.a.jet(x)
        return (-av, -a1, -a2)

    def to_source(self):
        return f"(-{self.a.to_source()})"


class IntPow(Node):
    __slots__ = ("a", "n")

    def __init__(self, a: Node, n: int):
        self.a, self.n = a, n

    def eval(self, x):
        return self.a.eval(x) ** self.n

    def jet(self, x):
        av, a1, a2 = self.a.jet(x)
        n = self.n
        v = av**n
        p1 = n * av ** (n - 1)
        p2 = n * (n - 1) * av ** (n - 2)
        return (v, p1 * a1, p2 * a1 * a1 + p1 * a2)

    def to_source(self):
        return f"({self.a.to_source()} ^ {self.n})"


class Call(Node):
    __slots__ = ("fname", "a")

    def __init__(self, fname: str, a: Node):
        self.fname, self.a = fname, a

    def eval(self, x):
        return _FUNC_VALUE[self.fname](self.a.eval(x), x)

    def jet(self, x):
        av, a1, a2 = self.a.jet(x)
        v, h1, h2 = _FUNC_JET[self.fname](av, x)
        return (v, h1 * a1, h2 * a1 * a1 + h1 * a2)

    def to_source(self):
        return f"{self.fname}({self.a.to_source()})"


def _val_sqrt(u: float, x: float) -> float:
    if u < 0.0:
        raise DomainError("sqrt of a negative value", x)
    return math.sqrt(u)


def _val_arcsin(u: float, x: float) -> float:
    if u < -1.0 or u > 1.0:
        raise DomainError("arcsin argument outside [-1, 1]", x)
    return math.asin(u)


def _val_arccos(u: float, x: float) -> float:
    if u < -1.0 or u > 1.0:
        raise DomainError("arccos argument outside [-1, 1]", x)
    return math.acos(u)


def _jet_sin(u, x):
    s, c = math.sin(u), math.cos(u)
    return (s, c, -s)


def _jet_cos(u, x):
    s, c = math.sin(u), math.cos(u)
    return (c, -s, -c)


def _jet_exp(u, x):
    e = math.exp(u)
    return (e, e, e)


def _jet_sqrt(u, x):
    v = _val_sqrt(u, x)
    if u == 0.0:
        # boundary of the open domain: value exists, derivatives blow up
        return (v, math.inf, -math.inf)
    return (v, 0.5 / v, -0.25 / (u * v))


def _jet_abs(u, x):
    # derivative at 0 taken as 0 by convention
    s = 1.0 if u > 0.0 else (-1.0 if u < 0.0 else 0.0)
    return (abs(u), s, 0.0)


def _jet_arcsin(u, x):
    v = _val_arcsin(u, x)
    w = 1.0 - u * u
    if w == 0.0:
        return (v, math.inf, math.inf)
    d = 1.0 / math.sqrt(w)
    return (v, d, u * d / w)


def _jet_arccos(u, x):
    v = _val_arccos(u, x)
    w = 1.0 - u * u
    if w == 0.0:
        return (v, -math.inf, -math.inf)
    d = -1.0 / math.sqrt(w)
    return (v, d, u * d / w)


_FUNC_VALUE = {
    "sin": lambda u, x: math.sin(u),
    "cos": lambda u, x: math.cos(u),
    "exp": lambda u, x: math.exp(u),
    "sqrt": _val_sqrt,
    "abs": lambda u, x: abs(u),
    "arcsin": _val_arcsin,
    "arccos": _val_arccos,
}

_FUNC_JET = {
    "sin": _jet_sin,
    "cos": _jet_cos,
    "exp": _jet_exp,
    "sqrt": _jet_sqrt,
    "abs": _jet_abs,
    "arcsin": _jet_arcsin,
    "arccos": _jet_arccos,
}


# ---------------------------------------------------------------------------
# Tokenizer / recursive-descent parser
# ---------------------------------------------------------------------------

_OPS = set("+-*/^()")


def _tokenize(source: str) -> list[tuple[str, object, int]]:
    """Return (kind, payload, offset) triples; kinds: num, ident, op, end."""
    tokens: list[tuple[str, object, int]] = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                if source[j] == ".":
                    seen_dot = True
                j += 1
            # exponent part like 1e-3
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    while k < n and source[k].isdigit():
                        k += 1
                    j = k
            text = source[i:j]
            try:
                value = float(text)
            except ValueError:
                raise FormulaSyntaxError(f"bad number literal {text!r}", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("ident", source[i:j], i))
            i = j
            continue
        raise FormulaSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, object, int]], variable: str):
        self.tokens = tokens
        self.pos = 0
        self.variable = variable

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, payload, off = self.peek()
        if kind != "op" or payload != op:
            raise FormulaSyntaxError(f"expected {op!r}", off)
        return self.advance()

    def parse_expr(self) -> Node:
        node = self.parse_term()
        while True:
            kind, payload, _ = self.peek()
            if kind == "op" and payload in "+-":
                self.advance()
                rhs = self.parse_term()
                node = Add(node, rhs) if payload == "+" else Sub(node, rhs)
            else:
                return node

    def parse_term(self) -> Node:
        node = self.parse_unary()
        while True:
            kind, payload, _ = self.peek()
            if kind == "op" and payload in "*/":
                self.advance()
                rhs = self.parse_unary()
                node = Mul(node, rhs) if payload == "*" else Div(node, rhs)
            else:
                return node

    def parse_unary(self) -> Node:
        kind, payload, _ = self.peek()
        if kind == "op" and payload == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Node:
        base = self.parse_atom()
        kind, payload, _ = self.peek()
        if kind == "op" and payload == "^":
            self.advance()
            sign = 1
            kind, payload, off = self.peek()
            if kind == "op" and payload == "-":
                self.advance()
                sign = -1
                kind, payload, off = self.peek()
            if kind != "num":
                raise FormulaSyntaxError("exponent must be an integer literal", off)
            self.advance()
            if payload != int(payload):
                raise FormulaSyntaxError("exponent must be an integer", off)
            return IntPow(base, sign * int(payload))
        return base

    def parse_atom(self) -> Node:
        kind, payload, off = self.advance()
        if kind == "num":
            return Num(payload)
        if kind == "op" and payload == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        if kind == "ident":
            name = payload
            if name == "pi":
                return Num(math.pi)
            if name == self.variable:
                return Var(name)
            if name in _FUNC_JET:
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return Call(name, arg)
            raise UnknownIdentifierError(name, off)
        raise FormulaSyntaxError("expected a number, identifier or '('", off)


# ---------------------------------------------------------------------------
# ScalarFunction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarFunction:
    """A parsed one-variable formula with exact jet evaluation.

    When ``period`` is set the argument is folded into [0, period) before
    evaluation, so the function genuinely lives on the circle even if the
    source formula is only periodic by restriction. ``periodic_source``
    records whether the raw formula passed the parse-time periodicity check.
    """

    source: str
    variable: str
    ast: Node
    period: float | None = None
    periodic_source: bool = True

    def _fold(self, x: float) -> float:
        if self.period is None:
            return x
        p = self.period
        y = x - p * math.floor(x / p)
        return y if y < p else 0.0

    def value(self, x: float) -> float:
        return self.ast.eval(self._fold(x))

    __call__ = value

    def jet(self, x: float) -> Jet2:
        v, d1, d2 = self.ast.jet(self._fold(x))
        return Jet2(v, d1, d2)

    def d1(self, x: float) -> float:
        return self.ast.jet(self._fold(x))[1]

    def d2(self, x: float) -> float:
        return self.ast.jet(self._fold(x))[2]

    def to_source(self) -> str:
        return self.ast.to_source()


def parse(source: str, variable: str, period: float | None = None) -> ScalarFunction:
    """Parse ``source`` into a :class:`ScalarFunction` of ``variable``.

    Raises :class:`FormulaSyntaxError` (with a 0-based offset) on malformed
    input and :class:`UnknownIdentifierError` for stray names. If ``period``
    is given, periodicity of the raw formula is checked on a sample grid and a
    :class:`PeriodicityWarning` is emitted on violation; the function is then
    made periodic by argument folding rather than rejected, matching how the
    non-periodic example formulas are used on [0, 1].
    """
    tokens = _tokenize(source)
    parser = _Parser(tokens, variable)
    ast = parser.parse_expr()
    kind, _, off = parser.peek()
    if kind != "end":
        raise FormulaSyntaxError("unexpected trailing input", off)
    periodic_source = True
    if period is not None:
        periodic_source = _check_periodicity(ast, source, period)
    return ScalarFunction(
        source=source, variable=variable, ast=ast, period=period, periodic_source=periodic_source
    )


def _check_periodicity(ast: Node, source: str, period: float) -> bool:
    worst = 0.0
    for i in range(_PERIOD_CHECK_POINTS):
        x = period * i / _PERIOD_CHECK_POINTS
        try:
            a = ast.eval(x)
            b = ast.eval(x + period)
        except DomainError:
            continue
        worst = max(worst, abs(a - b) / (1.0 + abs(a)))
    if worst > 1e-9:
        warnings.warn(
            f"formula {source!r} is not {period}-periodic (relative deviation {worst:.3g}); "
            "the argument will be folded into one period",
            PeriodicityWarning,
            stacklevel=3,
        )
        return False
    return True


def eval_jet2(fn: ScalarFunction, x: float) -> Jet2:
    """Exact (value, d1, d2) of ``fn`` at ``x`` by forward differentiation rules."""
    return fn.jet(x)


# ---------------------------------------------------------------------------
# The ratio g(r)/r with its smooth extension to r = 0
# ---------------------------------------------------------------------------

_SERIES_SWITCH_R = 1e-5


@dataclass(frozen=True)
class RatioFunction:
    """r -> g(r)/r with the limit value g'(0) at r = 0.

    Jets for r away from 0 follow from g = r * q:
    q' = (g' - q)/r and q'' = (g'' - 2 q')/r. Below the series switch radius
    the value and first derivative come from the second-order Taylor data of
    g at 0; the second derivative of the ratio would need g''' there, so it
    is approximated by the exact formula evaluated at the switch boundary
    (error O(switch radius), used only to classify zero-radius contacts).
    """

    g: ScalarFunction
    source: str
    variable: str = "r"
    period: float | None = None

    def value(self, x: float) -> float:
        if abs(x) < _SERIES_SWITCH_R:
            _, g1, g2 = self.g.ast.jet(0.0)
            return g1 + 0.5 * g2 * x
        return self.g.ast.eval(x) / x

    __call__ = value

    def jet(self, x: float) -> Jet2:
        if abs(x) < _SERIES_SWITCH_R:
            _, g1, g2 = self.g.ast.jet(0.0)
            xb = _SERIES_SWITCH_R if x >= 0.0 else -_SERIES_SWITCH_R
            try:
                q2 = self.jet(xb).d2
            except DomainError:
                q2 = 0.0
            return Jet2(g1 + 0.5 * g2 * x, 0.5 * g2, q2)
        gv, g1, g2 = self.g.ast.jet(x)
        q = gv / x
        q1 = (g1 - q) / x
        q2 = (g2 - 2.0 * q1) / x
        return Jet2(q, q1, q2)

    def d1(self, x: float) -> float:
        return self.jet(x).d1

    def d2(self, x: float) -> float:
        return self.jet(x).d2

    def to_source(self) -> str:
        return self.source


def g_tilde(g: ScalarFunction) -> RatioFunction:
    """Return the radial ratio r -> g(r)/r, extended by g'(0) at r = 0.

    Raises :class:`InvalidGError` when |g(0)| exceeds 1e-12, i.e. when the
    standing assumption g(0) = 0 is violated.
    """
    g0 = g.ast.eval(0.0)
    if abs(g0) > _G_ZERO_TOL:
        raise InvalidGError(f"g(0) = {g0!r} violates the required g(0) = 0")
    return RatioFunction(g=g, source=f"({g.source}) / r")
