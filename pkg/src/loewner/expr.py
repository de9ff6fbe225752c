"""A small language of holomorphic expressions in ``z`` and ``t``.

Grammar (ASCII, whitespace insensitive)::

    expr   := term { ("+" | "-") term }
    term   := factor { ("*" | "/") factor }
    factor := "-" factor | power
    power  := atom [ "^" integer ]
    atom   := number | "i" | "z" | "t" | ident "(" expr ")" | "(" expr ")"
    ident  := "exp" | "log" | "sqrt"

Unary minus binds looser than ``^``, so ``-z^2`` is ``-(z^2)``. ``log`` and
``sqrt`` use principal branches with the cut on the negative real axis.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
import re
from typing import Callable, Union

import numpy as np

FUNCTIONS = ("exp", "log", "sqrt")
VARIABLES = ("z", "t")
ATOM_START = frozenset({"number", "i", "z", "t", "(", "-", *FUNCTIONS})


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, offset, expected=(), source=""):
        self.offset = offset
        self.expected = frozenset(expected)
        self.source = source
        exp = ", ".join(sorted(self.expected))
        text = f"{message} at offset {offset}"
        if exp:
            text += f" (expected one of: {exp})"
        super().__init__(text)


class UnknownIdentifierError(ExprSyntaxError):
    pass


class DomainError(ExprError):
    """Evaluation left the domain of definition (pole or branch point)."""

    def __init__(self, subexpr: "Node", z=None, t=None, reason=""):
        self.subexpr = subexpr
        self.z = z
        self.t = t
        self.reason = reason
        where = "" if z is None else f" at z={z!r}, t={t!r}"
        super().__init__(f"{reason or 'domain error'} in '{to_source(subexpr)}'{where}")


# --------------------------------------------------------------------------- nodes


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Imag:
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    arg: "Node"
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"
    offset: int = field(default=-1, compare=False, repr=False)


Node = Union[Num, Imag, Var, Neg, BinOp, Pow, Call]
ExprNode = Node
NODE_TYPES = (Num, Imag, Var, Neg, BinOp, Pow, Call)


def is_node(x) -> bool:
    return isinstance(x, NODE_TYPES)


def constant_node(c: complex) -> Node:
    """Expression node for a complex constant."""
    c = complex(c)
    re_part, im_part = Num(c.real), BinOp("*", Num(abs(c.imag)), Imag())
    if c.imag == 0:
        return re_part
    im_node = im_part if c.imag > 0 else Neg(im_part)
    if c.real == 0:
        return im_node
    return BinOp("+", re_part, im_node)


# --------------------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    for k, ch in enumerate(src):
        if ord(ch) > 127:
            raise ExprSyntaxError(f"non-ASCII character {ch!r}", len(src[:k].encode()), source=src)
    toks = []
    pos = 0
    n = len(src)
    while True:
        while pos < n and src[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos, ATOM_START, src)
        if m.group("number") is not None:
            toks.append(_Tok("number", m.group("number"), m.start("number")))
        elif m.group("name") is not None:
            name = m.group("name")
            kind = name if name in FUNCTIONS + VARIABLES + ("i",) else "ident"
            toks.append(_Tok(kind, name, m.start("name")))
        else:
            op = m.group("op")
            toks.append(_Tok(op, op, m.start("op")))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


# --------------------------------------------------------------------------- parser


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.k = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.k]

    def _fail(self, expected, message=None):
        tok = self.tok
        if message is None:
            message = "unexpected end of input" if tok.kind == "end" else f"unexpected token {tok.text!r}"
        raise ExprSyntaxError(message, tok.offset, expected, self.src)

    def _take(self, kind):
        if self.tok.kind != kind:
            self._fail({kind})
        tok = self.tok
        self.k += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            self._fail({"end of input", "+", "-", "*", "/", "^"})
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind in ("+", "-"):
            tok = self.tok
            self.k += 1
            node = BinOp(tok.kind, node, self.term(), tok.offset)
        return node

    def term(self):
        node = self.factor()
        while self.tok.kind in ("*", "/"):
            tok = self.tok
            self.k += 1
            node = BinOp(tok.kind, node, self.factor(), tok.offset)
        return node

    def factor(self):
        if self.tok.kind == "-":
            tok = self.tok
            self.k += 1
            return Neg(self.factor(), tok.offset)
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "^":
            tok = self.tok
            self.k += 1
            if self.tok.kind != "number" or not self.tok.text.isdigit():
                self._fail({"integer"})
            exponent = int(self.tok.text)
            self.k += 1
            return Pow(base, exponent, tok.offset)
        return base

    def atom(self):
        tok = self.tok
        kind = tok.kind
        if kind == "number":
            self.k += 1
            value = float(tok.text)
            if not np.isfinite(value):
                raise ExprSyntaxError(f"numeric literal {tok.text!r} overflows", tok.offset, source=self.src)
            return Num(value, tok.offset)
        if kind == "i":
            self.k += 1
            return Imag(tok.offset)
        if kind in VARIABLES:
            self.k += 1
            return Var(kind, tok.offset)
        if kind in FUNCTIONS:
            self.k += 1
            self._take("(")
            arg = self.expr()
            self._take(")")
            return Call(kind, arg, tok.offset)
        if kind == "(":
            self.k += 1
            node = self.expr()
            self._take(")")
            return node
        if kind == "ident":
            raise UnknownIdentifierError(
                f"unknown identifier {tok.text!r}", tok.offset, set(FUNCTIONS + VARIABLES + ("i",)), self.src
            )
        self._fail(ATOM_START)


def parse(source: str) -> Node:
    return _Parser(source).parse()


# --------------------------------------------------------------------------- printing


def to_source(e: Node) -> str:
    """Fully parenthesized source; ``parse(to_source(e)) == e``."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Imag):
        return "i"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Pow):
        base = to_source(e.base)
        if isinstance(e.base, (Num, Pow)):
            base = f"({base})"
        return f"{base}^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.fn}({to_source(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------- evaluation


def _branch_point(arg) -> bool:
    return arg == 0


def evaluate(e: Node, z, t: float = 0.0) -> complex:
    """Evaluate at one point; raises DomainError at poles and branch points."""
    z = complex(z)
    t = float(t)

    def ev(n):
        if isinstance(n, Num):
            return complex(n.value)
        if isinstance(n, Imag):
            return 1j
        if isinstance(n, Var):
            return z if n.name == "z" else complex(t)
        if isinstance(n, Neg):
            return -ev(n.arg)
        if isinstance(n, BinOp):
            a = ev(n.left)
            b = ev(n.right)
            if n.op == "+":
                return a + b
            if n.op == "-":
                return a - b
            if n.op == "*":
                return a * b
            if b == 0:
                raise DomainError(n, z, t, "division by zero")
            return a / b
        if isinstance(n, Pow):
            return ev(n.base) ** n.exponent
        if isinstance(n, Call):
            a = ev(n.arg)
            if n.fn != "exp" and _branch_point(a):
                raise DomainError(n, z, t, f"{n.fn} at its branch point 0")
            try:
                return getattr(cmath, n.fn)(a)
            except (OverflowError, ValueError) as exc:
                raise DomainError(n, z, t, str(exc)) from None
        raise TypeError(f"not an expression node: {n!r}")

    try:
        value = ev(e)
    except OverflowError as exc:
        raise DomainError(e, z, t, str(exc)) from None
    if not cmath.isfinite(value):
        raise DomainError(e, z, t, "non-finite result")
    return value


_NP_FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt}


def _build(n: Node) -> Callable:
    if isinstance(n, Num):
        c = complex(n.value)
        return lambda z, t: c
    if isinstance(n, Imag):
        return lambda z, t: 1j
    if isinstance(n, Var):
        if n.name == "z":
            return lambda z, t: z
        return lambda z, t: t + 0j
    if isinstance(n, Neg):
        f = _build(n.arg)
        return lambda z, t: -f(z, t)
    if isinstance(n, BinOp):
        f, g = _build(n.left), _build(n.right)
        if n.op == "+":
            return lambda z, t: f(z, t) + g(z, t)
        if n.op == "-":
            return lambda z, t: f(z, t) - g(z, t)
        if n.op == "*":
            return lambda z, t: f(z, t) * g(z, t)
        return lambda z, t: f(z, t) / g(z, t)
    if isinstance(n, Pow):
        f = _build(n.base)
        k = n.exponent
        return lambda z, t: f(z, t) ** k
    if isinstance(n, Call):
        f = _build(n.arg)
        fn = _NP_FUNCS[n.fn]
        return lambda z, t: fn(f(z, t))
    raise TypeError(f"not an expression node: {n!r}")


def compile_expr(e: Node) -> Callable:
    """Vectorized evaluator ``(z, t) -> complex | ndarray`` with numpy semantics.

    Non-finite results are re-evaluated pointwise with :func:`evaluate` so the
    DomainError names the offending subexpression.
    """
    raw = _build(e)

    def fn(z, t):
        with np.errstate(all="ignore"):
            out = raw(z, t)
        out = np.asarray(out, dtype=complex)
        if out.shape != np.shape(z):
            out = np.broadcast_to(out, np.shape(z)).copy()
        if not np.all(np.isfinite(out)):
            zs = np.broadcast_to(np.asarray(z, dtype=complex), out.shape)
            bad = np.flatnonzero(~np.isfinite(out))[0]
            evaluate(e, zs.flat[bad], t)
            raise DomainError(e, complex(zs.flat[bad]), t, "non-finite result")
        return out if out.ndim else complex(out)

    fn.node = e
    return fn


# --------------------------------------------------------------------------- calculus

ZERO = Num(0.0)
ONE = Num(1.0)


def _is_num(n, v):
    return isinstance(n, Num) and n.value == v


def _add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return BinOp("+", a, b)


def _sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return Neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    return BinOp("*", a, b)


def _div(a, b):
    if _is_num(a, 0.0):
        return ZERO
    if _is_num(b, 1.0):
        return a
    return BinOp("/", a, b)


def _neg(a):
    return ZERO if _is_num(a, 0.0) else Neg(a)


def differentiate_z(e: Node) -> Node:
    """Symbolic d/dz, treating ``t`` as a constant."""
    if isinstance(e, (Num, Imag)):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == "z" else ZERO
    if isinstance(e, Neg):
        return _neg(differentiate_z(e.arg))
    if isinstance(e, BinOp):
        u, v = e.left, e.right
        du, dv = differentiate_z(u), differentiate_z(v)
        if e.op == "+":
            return _add(du, dv)
        if e.op == "-":
            return _sub(du, dv)
        if e.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        if _is_num(dv, 0.0):
            return _div(du, v)
        return _div(_sub(_mul(du, v), _mul(u, dv)), Pow(v, 2))
    if isinstance(e, Pow):
        n = e.exponent
        db = differentiate_z(e.base)
        if n == 0 or _is_num(db, 0.0):
            return ZERO
        if n == 1:
            return db
        inner = e.base if n == 2 else Pow(e.base, n - 1)
        return _mul(_mul(Num(float(n)), inner), db)
    if isinstance(e, Call):
        du = differentiate_z(e.arg)
        if _is_num(du, 0.0):
            return ZERO
        if e.fn == "exp":
            return _mul(Call("exp", e.arg), du)
        if e.fn == "log":
            return _div(du, e.arg)
        return _div(du, _mul(Num(2.0), Call("sqrt", e.arg)))
    raise TypeError(f"not an expression node: {e!r}")


def free_variables(e: Node) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Num, Imag)):
        return set()
    if isinstance(e, (Neg, Call)):
        return free_variables(e.arg)
    if isinstance(e, Pow):
        return free_variables(e.base)
    return free_variables(e.left) | free_variables(e.right)
