"""A small arithmetic expression language for user charts and curvature functions.

Grammar (lowest to highest precedence)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom (("^" | "**") unary)?        # right associative
    atom   := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Variables are ``x1 .. xn`` plus optional aliases; other names must be bound
as constants when parsing.  There is no implicit multiplication.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .jets import Jet, JetDomainError, exp, ipow, log, power, sqrt, variables
from .jets import cos as _cos
from .jets import sin as _sin

# integer exponents above this are evaluated as real powers
MAX_INT_EXPONENT = 64

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1}
BUILTIN_CONSTANTS = {"pi": math.pi}


class ParseError(GeometryError, ValueError):
    """Syntax error; ``offset`` is the 1-based character position."""

    def __init__(self, message: str, offset: int, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        exp_txt = f", expected {' or '.join(repr(e) for e in self.expected)}" if expected else ""
        super().__init__(f"{message} at offset {offset}{exp_txt}")


class UnknownIdentifierError(ParseError):
    pass


class ArityError(ParseError):
    pass


class EvalDomainError(GeometryError, ValueError):
    """Evaluation left the domain of an operation; ``node`` locates it."""

    def __init__(self, message: str, node):
        self.node = node
        super().__init__(f"{message} in '{to_string(node)}'")


# -- AST -----------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Const:
    name: str
    value: float


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Num | Var | Const | Neg | BinOp | Pow | Call


# -- tokenizer -----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(src: str):
    pos = 0
    out = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            stripped = len(src[pos:]) - len(src[pos:].lstrip())
            raise ParseError(f"unexpected character {src[pos + stripped]!r}", pos + stripped + 1)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start + 1))
        pos = m.end()
    out.append(("end", "", len(src) + 1))
    return out


class _Parser:
    def __init__(self, src, constants, dim, aliases):
        self.toks = _tokenize(src)
        self.i = 0
        self.constants = {**BUILTIN_CONSTANTS, **(constants or {})}
        self.dim = dim
        self.aliases = aliases or {}

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, off = self.peek()
        if val != text or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"found {found}", off, {text})
        return self.take()

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            arg = self.unary()
            return Neg(arg) if val == "-" else arg
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val in ("^", "**"):
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(val, off)
            return self.name(val, off)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"found {found}", off, {"number", "name", "("})

    def call(self, fname, off):
        if fname not in FUNCTIONS:
            if fname in self.aliases or fname in self.constants or re.fullmatch(r"x[1-9]\d*", fname):
                raise ParseError("implicit multiplication is not supported",
                                 self.peek()[2], {"operator"})
            raise UnknownIdentifierError(f"unknown function {fname!r}", off)
        self.take()
        args = [self.expr()]
        while self.peek()[1] == "," and self.peek()[0] == "op":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if len(args) != FUNCTIONS[fname]:
            raise ArityError(f"{fname} takes {FUNCTIONS[fname]} argument(s), got {len(args)}", off)
        return Call(fname, tuple(args))

    def name(self, val, off):
        if val in self.aliases:
            return Var(self.aliases[val], val)
        m = re.fullmatch(r"x([1-9]\d*)", val)
        if m:
            idx = int(m.group(1)) - 1
            if self.dim is not None and idx >= self.dim:
                raise UnknownIdentifierError(f"variable {val} exceeds dimension {self.dim}", off)
            return Var(idx, val)
        if val in self.constants:
            return Const(val, float(self.constants[val]))
        if val in FUNCTIONS:
            raise ParseError(f"function {val!r} needs an argument list", off + len(val), {"("})
        raise UnknownIdentifierError(f"unknown identifier {val!r}", off)


def parse(src: str, constants: dict | None = None, dim: int | None = None,
          aliases: dict | None = None) -> Expr:
    """Parse ``src`` into an immutable expression tree.

    ``constants`` binds extra names to numbers, ``dim`` bounds the variable
    index, and ``aliases`` maps extra variable names to 0-based indices.
    """
    p = _Parser(src, constants, dim, aliases)
    node = p.expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {val!r}", off, {"operator", "end of input"})
    return node


# -- printing ------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def to_string(node) -> str:
    """Render with the minimum parentheses needed to re-parse the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_string(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = to_string(node.arg)
        return f"-({inner})" if _prec(node.arg) < 3 else f"-{inner}"
    if isinstance(node, Pow):
        base = to_string(node.base)
        if _prec(node.base) <= 4:
            base = f"({base})"
        ex = to_string(node.exponent)
        if _prec(node.exponent) < 3:
            ex = f"({ex})"
        return f"{base}^{ex}"
    p = _PREC[node.op]
    left = to_string(node.left)
    if _prec(node.left) < p:
        left = f"({left})"
    right = to_string(node.right)
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def variables_used(node) -> set:
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, (Num, Const)):
        return set()
    if isinstance(node, Neg):
        return variables_used(node.arg)
    if isinstance(node, Call):
        return set().union(*(variables_used(a) for a in node.args))
    if isinstance(node, Pow):
        return variables_used(node.base) | variables_used(node.exponent)
    return variables_used(node.left) | variables_used(node.right)


# -- evaluation ----------------------------------------------------------------

def _is_constant(node) -> bool:
    return not variables_used(node)


def _check(value, node):
    arr = value.c if isinstance(value, Jet) else np.asarray(value)
    if not np.all(np.isfinite(arr)):
        raise EvalDomainError("non-finite result", node)
    return value


def _value(v) -> float:
    return float(v.value) if isinstance(v, Jet) else float(v)


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        if node.index >= len(env):
            raise EvalDomainError(f"variable {node.name} is not bound", node)
        return env[node.index]
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    try:
        if isinstance(node, BinOp):
            a, b = _eval(node.left, env), _eval(node.right, env)
            if node.op == "+":
                out = a + b
            elif node.op == "-":
                out = a - b
            elif node.op == "*":
                out = a * b
            else:
                if _value(b) == 0.0:
                    raise EvalDomainError("division by zero", node)
                out = a / b
            return _check(out, node)
        if isinstance(node, Call):
            a = _eval(node.args[0], env)
            f = node.func
            if f == "log" and _value(a) <= 0:
                raise EvalDomainError("log of a nonpositive value", node)
            if f == "sqrt" and (_value(a) < 0 or (isinstance(a, Jet) and _value(a) == 0)):
                raise EvalDomainError("sqrt outside its domain", node)
            fn = {"sin": _sin, "cos": _cos, "exp": exp, "log": log, "sqrt": sqrt}[f]
            return _check(fn(a), node)
        # power
        base = _eval(node.base, env)
        if _is_constant(node.exponent):
            e = _value(_eval(node.exponent, env))
            if e.is_integer() and abs(e) <= MAX_INT_EXPONENT:
                if e < 0 and _value(base) == 0.0:
                    raise EvalDomainError("zero to a negative power", node)
                return _check(ipow(base, int(e)), node)
            if _value(base) <= 0:
                raise EvalDomainError("real power of a nonpositive base", node)
            return _check(power(base, e), node)
        if _value(base) <= 0:
            raise EvalDomainError("variable power of a nonpositive base", node)
        return _check(exp(_eval(node.exponent, env) * log(base)), node)
    except (JetDomainError, FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        raise EvalDomainError(str(exc), node) from exc


def evaluate(node, point) -> float:
    """Evaluate at a real point (sequence of variable values)."""
    env = [float(v) for v in np.atleast_1d(np.asarray(point, dtype=float))]
    with np.errstate(all="ignore"):
        return float(_eval(node, env))


def eval_jet(node, bindings, order: int | None = None):
    """Evaluate over truncated Taylor arithmetic.

    ``bindings`` is either a jet vector of the variables or a real point, in
    which case ``order`` gives the truncation order of fresh coordinate jets.
    The result is always a :class:`Jet`.
    """
    if not isinstance(bindings, Jet):
        if order is None:
            raise ValueError("order is required when binding a real point")
        bindings = variables(np.atleast_1d(np.asarray(bindings, dtype=float)), order)
    env = [bindings[i] for i in range(bindings.shape[0])]
    with np.errstate(all="ignore"):
        out = _eval(node, env)
    if not isinstance(out, Jet):
        out = Jet.constant(out, bindings.order, bindings.nvars)
    return out


def eval_any(node, env):
    """Evaluate against a list of floats or jets (as chart closures receive them)."""
    with np.errstate(all="ignore"):
        return _eval(node, list(env))
