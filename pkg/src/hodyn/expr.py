"""Small expression language for Lagrangians and potentials.

Expressions are immutable trees built from constants, named parameters,
jet variables (``r<n>`` or ``r<n>_<x|y|z>``), the time ``t`` and a handful of
operators and functions.  Derivatives are exact and symbolic; the simplifier
only folds constants and applies 0/1 identities.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Union

import numpy as np

__all__ = [
    "Expression",
    "Const",
    "Param",
    "JetVar",
    "Time",
    "BinOp",
    "Neg",
    "Func",
    "ExprSyntaxError",
    "ExprDomainError",
    "UnboundVariableError",
    "FUNCTIONS",
    "parse",
    "render",
    "evaluate",
    "compile_expr",
    "partial_derivative",
    "total_time_derivative",
    "free_names",
    "jet_variables",
    "max_jet_order",
    "variable",
    "const",
    "add",
    "sub",
    "mul",
    "div",
    "power",
    "neg",
    "func",
    "substitute",
]

COMPONENTS = ("x", "y", "z")
FUNCTIONS = ("exp", "sin", "cos", "ln", "sqrt")

_JET_RE = re.compile(r"^r(\d+)(?:_([xyz]))?$")


class ExprSyntaxError(ValueError):
    """Malformed expression text; ``offset`` is the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExprDomainError(ArithmeticError):
    pass


class UnboundVariableError(KeyError):
    pass


# --------------------------------------------------------------------- nodes


class Expression:
    """Base class of all expression nodes."""

    __slots__ = ()

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class Const(Expression):
    value: float


@dataclass(frozen=True)
class Param(Expression):
    name: str


@dataclass(frozen=True)
class JetVar(Expression):
    order: int
    comp: str | None = None

    @property
    def name(self) -> str:
        return f"r{self.order}" if self.comp is None else f"r{self.order}_{self.comp}"

    def shifted(self, k: int = 1) -> "JetVar":
        return JetVar(self.order + k, self.comp)


@dataclass(frozen=True)
class Time(Expression):
    @property
    def name(self) -> str:
        return "t"


@dataclass(frozen=True)
class BinOp(Expression):
    op: str
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Neg(Expression):
    arg: Expression


@dataclass(frozen=True)
class Func(Expression):
    name: str
    arg: Expression


Variable = Union[Param, JetVar, Time]


def variable(name: str) -> Variable:
    """Resolve an identifier to the variable node it denotes."""
    if name == "t":
        return Time()
    m = _JET_RE.match(name)
    if m:
        return JetVar(int(m.group(1)), m.group(2))
    return Param(name)


# ------------------------------------------------------ simplifying builders

ZERO = Const(0.0)
ONE = Const(1.0)


def const(value: float) -> Const:
    return Const(float(value))


def _is(e: Expression, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    if isinstance(a, Neg):
        return sub(b, a.arg)
    return BinOp("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    if a == b:
        return Const(0.0)
    return BinOp("-", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    if isinstance(b, Const):
        a, b = b, a
    if isinstance(a, Const) and isinstance(b, BinOp) and b.op == "*" and isinstance(b.left, Const):
        return mul(Const(a.value * b.left.value), b.right)
    return BinOp("*", a, b)


def div(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    if isinstance(a, Neg):
        return neg(div(a.arg, b))
    return BinOp("/", a, b)


def power(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            value = _pow(a.value, b.value)
        except ExprDomainError:
            return BinOp("^", a, b)
        return Const(value)
    if _is(b, 1.0):
        return a
    if _is(b, 0.0):
        return ONE
    return BinOp("^", a, b)


def neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def func(name: str, a: Expression) -> Expression:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if isinstance(a, Const):
        try:
            return Const(_FUNC_IMPL[name](a.value))
        except ExprDomainError:
            pass
    return Func(name, a)


_BUILD = {"+": add, "-": sub, "*": mul, "/": div, "^": power}

# ------------------------------------------------------------------- numbers


def _pow(base: float, exponent: float) -> float:
    if not float(exponent).is_integer() and base <= 0.0:
        if base == 0.0 and exponent > 0:
            return 0.0
        raise ExprDomainError(f"non-integer power of non-positive base {base!r}")
    if base == 0.0 and exponent < 0:
        raise ExprDomainError("division by zero in power")
    try:
        return math.pow(base, exponent)
    except OverflowError as exc:
        raise ExprDomainError("overflow in power") from exc


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise ExprDomainError("division by zero")
    return a / b


def _ln(x: float) -> float:
    if x <= 0.0:
        raise ExprDomainError(f"ln of non-positive value {x!r}")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise ExprDomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError as exc:
        raise ExprDomainError("overflow in exp") from exc


_FUNC_IMPL: dict[str, Callable[[float], float]] = {
    "exp": _exp,
    "sin": math.sin,
    "cos": math.cos,
    "ln": _ln,
    "sqrt": _sqrt,
}

# -------------------------------------------------------------------- parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        kind, text, pos = self.take()
        if text != value or kind != "op":
            what = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {what}", pos)

    def parse(self) -> Expression:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return e

    def expr(self) -> Expression:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expression:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expression:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            arg = self.unary()
            # folded so that rendered negative constants reparse to themselves
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Neg(arg)
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expression:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            return variable(text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {what}", pos)


def parse(text: str) -> Expression:
    """Parse DSL text into an expression tree.

    >>> render(parse("b*r1^2 - a*r0^2"))
    '((b * (r1 ^ 2)) - (a * (r0 ^ 2)))'
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text).parse()


def _fmt_number(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"cannot render non-finite constant {value!r}")
    if value.is_integer() and abs(value) < 1e16:
        text = str(int(value))
    else:
        text = repr(value)
    return f"({text})" if value < 0 or text.startswith("-") else text


def render(e: Expression) -> str:
    """Canonical, fully parenthesized text that reparses to an equal tree."""
    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, (Param, JetVar, Time)):
        return e.name
    if isinstance(e, BinOp):
        return f"({render(e.left)} {e.op} {render(e.right)})"
    if isinstance(e, Neg):
        return f"(-{render(e.arg)})"
    if isinstance(e, Func):
        return f"{e.name}({render(e.arg)})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------- inspection


def _walk(e: Expression) -> Iterator[Expression]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, BinOp):
            stack.extend((node.left, node.right))
        elif isinstance(node, (Neg, Func)):
            stack.append(node.arg)


def free_names(e: Expression) -> set[str]:
    return {n.name for n in _walk(e) if isinstance(n, (Param, JetVar, Time))}


def jet_variables(e: Expression) -> set[JetVar]:
    return {n for n in _walk(e) if isinstance(n, JetVar)}


def max_jet_order(e: Expression) -> int:
    """Highest derivative order appearing in ``e`` (-1 if none)."""
    return max((v.order for v in jet_variables(e)), default=-1)


def _depends_on(e: Expression, var: Expression) -> bool:
    return any(n == var for n in _walk(e))


def substitute(e: Expression, mapping: Mapping[Expression, Expression]) -> Expression:
    """Replace variable nodes, re-simplifying on the way up."""
    if e in mapping:
        return mapping[e]
    if isinstance(e, BinOp):
        return _BUILD[e.op](substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Neg):
        return neg(substitute(e.arg, mapping))
    if isinstance(e, Func):
        return func(e.name, substitute(e.arg, mapping))
    return e


# ---------------------------------------------------------------- evaluation


def evaluate(e: Expression, bindings: Mapping[str, float]) -> float:
    """Evaluate ``e`` with IEEE doubles.

    ``bindings`` maps variable names (parameters, ``r<n>[_c]``, ``t``) to values;
    :class:`hodyn.jet.Bindings` produces such a mapping from a jet.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, (Param, JetVar, Time)):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, bindings)
    if isinstance(e, Func):
        return _FUNC_IMPL[e.name](evaluate(e.arg, bindings))
    if isinstance(e, BinOp):
        a = evaluate(e.left, bindings)
        b = evaluate(e.right, bindings)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            return _div(a, b)
        return _pow(a, b)
    raise TypeError(f"not an expression: {e!r}")


def _codegen(e: Expression, names: dict[str, str]) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, (Param, JetVar, Time)):
        if e.name not in names:
            names[e.name] = f"_v{len(names)}"
        return names[e.name]
    if isinstance(e, Neg):
        return f"(-{_codegen(e.arg, names)})"
    if isinstance(e, Func):
        return f"_f_{e.name}({_codegen(e.arg, names)})"
    a, b = _codegen(e.left, names), _codegen(e.right, names)
    if e.op in "+-*":
        return f"({a} {e.op} {b})"
    if e.op == "/":
        return f"_div({a}, {b})"
    if isinstance(e.right, Const) and e.right.value.is_integer() and 0 < e.right.value <= 4:
        return f"({a} ** {int(e.right.value)})"
    return f"_pow({a}, {b})"


def _np_div(a, b):
    return np.divide(a, b)


def _np_pow(a, b):
    return np.power(a, b)


_NUMPY_NS = {
    "_div": _np_div,
    "_pow": _np_pow,
    "_f_exp": np.exp,
    "_f_sin": np.sin,
    "_f_cos": np.cos,
    "_f_ln": np.log,
    "_f_sqrt": np.sqrt,
}
_MATH_NS = {"_div": _div, "_pow": _pow, **{f"_f_{k}": v for k, v in _FUNC_IMPL.items()}}


def compile_expr(e: Expression, backend: str = "math") -> Callable[[Mapping[str, float]], float]:
    """Compile ``e`` into a Python callable taking a bindings mapping.

    The ``"numpy"`` backend accepts array-valued bindings and follows numpy's
    floating point semantics instead of raising :class:`ExprDomainError`.
    """
    if backend not in ("math", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    names: dict[str, str] = {}
    body = _codegen(e, names)
    ns = dict(_NUMPY_NS if backend == "numpy" else _MATH_NS)
    fn = eval(f"lambda {', '.join(names.values())}: {body}", ns)  # noqa: S307
    keys = tuple(names)

    def call(bindings: Mapping[str, float]):
        try:
            vals = [bindings[k] for k in keys]
        except KeyError as exc:
            raise UnboundVariableError(exc.args[0]) from None
        try:
            return fn(*vals)
        except (ZeroDivisionError, OverflowError) as exc:
            raise ExprDomainError(str(exc)) from None

    call.names = keys  # type: ignore[attr-defined]
    return call


# ----------------------------------------------------------- differentiation


def _as_var(var: Union[str, Expression]) -> Expression:
    if isinstance(var, str):
        return variable(var)
    if not isinstance(var, (Param, JetVar, Time)):
        raise TypeError(f"cannot differentiate with respect to {var!r}")
    return var


def partial_derivative(e: Expression, var: Union[str, Expression]) -> Expression:
    """Exact symbolic derivative of ``e`` with respect to one variable."""
    return _diff(e, _as_var(var))


def _diff(e: Expression, v: Expression) -> Expression:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, (Param, JetVar, Time)):
        return ONE if e == v else ZERO
    if isinstance(e, Neg):
        return neg(_diff(e.arg, v))
    if isinstance(e, Func):
        du = _diff(e.arg, v)
        if _is(du, 0.0):
            return ZERO
        u = e.arg
        if e.name == "exp":
            outer = e
        elif e.name == "sin":
            outer = func("cos", u)
        elif e.name == "cos":
            outer = neg(func("sin", u))
        elif e.name == "ln":
            return div(du, u)
        else:  # sqrt
            return div(du, mul(Const(2.0), e))
        return mul(du, outer)
    a, b = e.left, e.right
    if e.op == "+":
        return add(_diff(a, v), _diff(b, v))
    if e.op == "-":
        return sub(_diff(a, v), _diff(b, v))
    if e.op == "*":
        return add(mul(_diff(a, v), b), mul(a, _diff(b, v)))
    if e.op == "/":
        da, db = _diff(a, v), _diff(b, v)
        return sub(div(da, b), div(mul(a, db), power(b, Const(2.0))))
    # power
    da = _diff(a, v)
    if not _depends_on(b, v):
        if _is(da, 0.0):
            return ZERO
        if isinstance(b, Const):
            return mul(mul(b, power(a, Const(b.value - 1.0))), da)
        return mul(mul(b, power(a, sub(b, ONE))), da)
    # ln-based rule: d(a^b) = a^b (b' ln a + b a'/a)
    db = _diff(b, v)
    return mul(e, add(mul(db, func("ln", a)), div(mul(b, da), a)))


def total_time_derivative(e: Expression, max_order: int | None = None) -> Expression:
    """d/dt through the jet: de/dt = de/dt|explicit + sum_n (de/drn) * r(n+1).

    ``max_order`` asserts the highest jet order ``e`` may contain.
    """
    jv = jet_variables(e)
    if max_order is not None and any(v.order > max_order for v in jv):
        raise ValueError(
            f"expression contains jet order {max_jet_order(e)} > max_order {max_order}"
        )
    out = _diff(e, Time())
    for v in sorted(jv, key=lambda j: (j.comp or "", j.order)):
        out = add(out, mul(_diff(e, v), v.shifted()))
    return out
