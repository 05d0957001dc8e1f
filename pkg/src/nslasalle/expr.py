"""Smooth scalar expressions over state variables, time and parameters.

Expressions are immutable trees.  They are built by :func:`parse` from infix
text or with the Python operators, evaluated with :func:`evaluate` (or a
compiled callable from :meth:`Expression.compile`) and differentiated exactly
with :func:`differentiate`.

Grammar, loosest to tightest binding::

    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom (('^' | '**') integer)?
    atom    := number | name | name '(' sum ')' | '(' sum ')'

Names are ``x1`` .. ``xn``, ``t`` and declared parameters.  Functions are
``sin``, ``cos``, ``exp``, ``tanh`` and ``sqrt``.  There is deliberately no
``abs``/``sign``/``min``/``max``: nonsmoothness is expressed by regions.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "tanh", "sqrt")


class EvaluationError(ArithmeticError):
    """Raised when an expression cannot be evaluated to a finite real."""


@dataclass(frozen=True)
class ParseDiagnostic:
    offset: int
    message: str
    token: str

    def __str__(self):
        return f"offset {self.offset}: {self.message} (at {self.token!r})"


class ParseError(ValueError):
    def __init__(self, diagnostic: ParseDiagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


class UnknownIdentifierError(ParseError):
    pass


class VariableIndexError(ParseError):
    pass


# --------------------------------------------------------------------------
# Nodes
# --------------------------------------------------------------------------

# precedence used when printing
_P_SUM, _P_PRODUCT, _P_UNARY, _P_POWER, _P_ATOM = 1, 2, 3, 4, 5


class Expression:
    """Base class of all expression nodes."""

    __slots__ = ()
    precedence = _P_ATOM

    # ---- construction sugar (with constant folding) ----
    def __add__(self, other):
        return add(self, as_expression(other))

    def __radd__(self, other):
        return add(as_expression(other), self)

    def __sub__(self, other):
        return sub(self, as_expression(other))

    def __rsub__(self, other):
        return sub(as_expression(other), self)

    def __mul__(self, other):
        return mul(self, as_expression(other))

    def __rmul__(self, other):
        return mul(as_expression(other), self)

    def __truediv__(self, other):
        return div(self, as_expression(other))

    def __rtruediv__(self, other):
        return div(as_expression(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        if not isinstance(exponent, int):
            raise TypeError("only integer powers are supported")
        return power(self, exponent)

    # ---- interface implemented by nodes ----
    def children(self) -> tuple[Expression, ...]:
        return ()

    def _eval(self, x, t, params):
        raise NotImplementedError

    def _diff(self, wrt: Expression) -> Expression:
        raise NotImplementedError

    def _source(self) -> str:
        raise NotImplementedError

    def __str__(self):
        raise NotImplementedError

    # ---- shared helpers ----
    def _wrap(self, child: Expression, strict: bool = False) -> str:
        text = str(child)
        if child.precedence < self.precedence or (strict and child.precedence == self.precedence):
            return f"({text})"
        return text

    def walk(self):
        yield self
        for child in self.children():
            yield from child.walk()

    def free_symbols(self) -> set[str]:
        names = set()
        for node in self.walk():
            if isinstance(node, (Var, Time, Param)):
                names.add(str(node))
        return names

    def parameters(self) -> set[str]:
        return {node.name for node in self.walk() if isinstance(node, Param)}

    def max_index(self) -> int:
        """Largest 1-based state index referenced (0 if none)."""
        return max((node.index + 1 for node in self.walk() if isinstance(node, Var)), default=0)

    def depends_on_time(self) -> bool:
        return any(isinstance(node, Time) for node in self.walk())

    def compile(self, params: Mapping[str, float] | None = None, backend: str = "math") -> Callable:
        """Return ``fn(x, t)`` evaluating this expression with bound parameters.

        ``backend="math"`` gives a scalar function raising
        :class:`EvaluationError` on domain errors.  ``backend="numpy"`` is
        vectorised over the trailing axes of ``x`` (shape ``(n, ...)``) and
        follows IEEE semantics (inf/nan instead of exceptions).
        """
        params = dict(params or {})
        missing = self.parameters() - params.keys()
        if missing:
            raise EvaluationError(f"unbound parameter(s): {', '.join(sorted(missing))}")
        namespace = {"_p": params}
        if backend == "math":
            namespace.update(sin=math.sin, cos=math.cos, exp=math.exp, tanh=math.tanh, sqrt=math.sqrt)
        elif backend == "numpy":
            namespace.update(sin=np.sin, cos=np.cos, exp=np.exp, tanh=np.tanh, sqrt=np.sqrt)
        else:
            raise ValueError(f"unknown backend {backend!r}")
        raw = eval(f"lambda x, t: {self._source()}", namespace)  # noqa: S307 - generated from the tree
        if backend == "numpy":
            def vectorised(x, t=0.0, _raw=raw):
                x = np.asarray(x, dtype=float)
                with np.errstate(all="ignore"):
                    value = _raw(x, t)
                return np.broadcast_to(np.asarray(value, dtype=float), x.shape[1:]).copy()
            return vectorised

        def scalar(x, t=0.0, _raw=raw):
            try:
                value = _raw(x, t)
            except ZeroDivisionError:
                raise EvaluationError("division by zero") from None
            except ValueError:
                raise EvaluationError("sqrt of negative argument") from None
            except OverflowError:
                raise EvaluationError("overflow") from None
            return float(value)
        return scalar


def compile_vector(expressions, params: Mapping[str, float] | None = None) -> Callable:
    """Compile several expressions into one ``fn(x, t) -> ndarray`` (math backend)."""
    params = dict(params or {})
    expressions = list(expressions)
    if not expressions:
        return lambda x, t=0.0: np.zeros(0)
    missing = set().union(*(e.parameters() for e in expressions)) - params.keys()
    if missing:
        raise EvaluationError(f"unbound parameter(s): {', '.join(sorted(missing))}")
    namespace = {"_p": params, "sin": math.sin, "cos": math.cos, "exp": math.exp,
                 "tanh": math.tanh, "sqrt": math.sqrt, "_array": np.array}
    body = ", ".join(e._source() for e in expressions)
    raw = eval(f"lambda x, t: _array(({body},), dtype=float)", namespace)  # noqa: S307

    def vector(x, t=0.0, _raw=raw):
        try:
            return _raw(x, t)
        except ZeroDivisionError:
            raise EvaluationError("division by zero") from None
        except ValueError:
            raise EvaluationError("sqrt of negative argument") from None
        except OverflowError:
            raise EvaluationError("overflow") from None
    return vector


def as_expression(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Const(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to Expression")


@dataclass(frozen=True, eq=True)
class Const(Expression):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("constants must be finite")

    @property
    def precedence(self):
        return _P_UNARY if self.value < 0 or (self.value == 0 and math.copysign(1, self.value) < 0) else _P_ATOM

    def _eval(self, x, t, params):
        return self.value

    def _diff(self, wrt):
        return ZERO

    def _source(self):
        return f"({self.value!r})"

    def __str__(self):
        if self.value == int(self.value) and abs(self.value) < 1e15:
            text = str(int(self.value))
            if self.value == 0 and math.copysign(1, self.value) < 0:
                text = "-0.0"
        else:
            text = repr(self.value)
        return text


@dataclass(frozen=True, eq=True)
class Var(Expression):
    index: int  # zero-based

    def _eval(self, x, t, params):
        try:
            return float(x[self.index])
        except IndexError:
            raise ValueError(f"state has no component x{self.index + 1}") from None

    def _diff(self, wrt):
        return ONE if wrt == self else ZERO

    def _source(self):
        return f"x[{self.index}]"

    def __str__(self):
        return f"x{self.index + 1}"


@dataclass(frozen=True, eq=True)
class Time(Expression):
    def _eval(self, x, t, params):
        return float(t)

    def _diff(self, wrt):
        return ONE if isinstance(wrt, Time) else ZERO

    def _source(self):
        return "t"

    def __str__(self):
        return "t"


@dataclass(frozen=True, eq=True)
class Param(Expression):
    name: str

    def _eval(self, x, t, params):
        try:
            return float(params[self.name])
        except (KeyError, TypeError):
            raise EvaluationError(f"unbound parameter {self.name!r}") from None

    def _diff(self, wrt):
        return ZERO

    def _source(self):
        return f"_p[{self.name!r}]"

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Neg(Expression):
    arg: Expression
    precedence = _P_UNARY

    def children(self):
        return (self.arg,)

    def _eval(self, x, t, params):
        return -self.arg._eval(x, t, params)

    def _diff(self, wrt):
        return neg(self.arg._diff(wrt))

    def _source(self):
        return f"(-{self.arg._source()})"

    def __str__(self):
        return f"-{self._wrap(self.arg)}"


@dataclass(frozen=True, eq=True)
class Func(Expression):
    name: str
    arg: Expression

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")

    def children(self):
        return (self.arg,)

    def _eval(self, x, t, params):
        a = self.arg._eval(x, t, params)
        if self.name == "sqrt":
            if a < 0:
                raise EvaluationError("sqrt of negative argument")
            return math.sqrt(a)
        try:
            return getattr(math, self.name)(a)
        except OverflowError:
            raise EvaluationError("overflow") from None

    def _diff(self, wrt):
        a = self.arg
        da = a._diff(wrt)
        if is_zero(da):
            return ZERO
        if self.name == "sin":
            outer = Func("cos", a)
        elif self.name == "cos":
            outer = neg(Func("sin", a))
        elif self.name == "exp":
            outer = self
        elif self.name == "tanh":
            outer = sub(ONE, power(self, 2))
        else:  # sqrt
            return div(da, mul(Const(2.0), self))
        return mul(outer, da)

    def _source(self):
        return f"{self.name}({self.arg._source()})"

    def __str__(self):
        return f"{self.name}({self.arg})"


@dataclass(frozen=True, eq=True)
class Add(Expression):
    left: Expression
    right: Expression
    precedence = _P_SUM

    def children(self):
        return (self.left, self.right)

    def _eval(self, x, t, params):
        return self.left._eval(x, t, params) + self.right._eval(x, t, params)

    def _diff(self, wrt):
        return add(self.left._diff(wrt), self.right._diff(wrt))

    def _source(self):
        return f"({self.left._source()} + {self.right._source()})"

    def __str__(self):
        return f"{self._wrap(self.left)} + {self._wrap(self.right, strict=True)}"


@dataclass(frozen=True, eq=True)
class Sub(Expression):
    left: Expression
    right: Expression
    precedence = _P_SUM

    def children(self):
        return (self.left, self.right)

    def _eval(self, x, t, params):
        return self.left._eval(x, t, params) - self.right._eval(x, t, params)

    def _diff(self, wrt):
        return sub(self.left._diff(wrt), self.right._diff(wrt))

    def _source(self):
        return f"({self.left._source()} - {self.right._source()})"

    def __str__(self):
        return f"{self._wrap(self.left)} - {self._wrap(self.right, strict=True)}"


@dataclass(frozen=True, eq=True)
class Mul(Expression):
    left: Expression
    right: Expression
    precedence = _P_PRODUCT

    def children(self):
        return (self.left, self.right)

    def _eval(self, x, t, params):
        return self.left._eval(x, t, params) * self.right._eval(x, t, params)

    def _diff(self, wrt):
        return add(mul(self.left._diff(wrt), self.right), mul(self.left, self.right._diff(wrt)))

    def _source(self):
        return f"({self.left._source()} * {self.right._source()})"

    def __str__(self):
        return f"{self._wrap(self.left)}*{self._wrap(self.right, strict=True)}"


@dataclass(frozen=True, eq=True)
class Div(Expression):
    left: Expression
    right: Expression
    precedence = _P_PRODUCT

    def children(self):
        return (self.left, self.right)

    def _eval(self, x, t, params):
        denominator = self.right._eval(x, t, params)
        if denominator == 0:
            raise EvaluationError("division by zero")
        return self.left._eval(x, t, params) / denominator

    def _diff(self, wrt):
        da, db = self.left._diff(wrt), self.right._diff(wrt)
        if is_zero(db):
            return div(da, self.right)
        numerator = sub(mul(da, self.right), mul(self.left, db))
        return div(numerator, power(self.right, 2))

    def _source(self):
        return f"({self.left._source()} / {self.right._source()})"

    def __str__(self):
        return f"{self._wrap(self.left)}/{self._wrap(self.right, strict=True)}"


@dataclass(frozen=True, eq=True)
class Pow(Expression):
    base: Expression
    exponent: int
    precedence = _P_POWER

    def children(self):
        return (self.base,)

    def _eval(self, x, t, params):
        b = self.base._eval(x, t, params)
        if b == 0 and self.exponent < 0:
            raise EvaluationError("division by zero")
        try:
            return b ** self.exponent
        except OverflowError:
            raise EvaluationError("overflow") from None

    def _diff(self, wrt):
        db = self.base._diff(wrt)
        if is_zero(db) or self.exponent == 0:
            return ZERO
        return mul(mul(Const(float(self.exponent)), power(self.base, self.exponent - 1)), db)

    def _source(self):
        return f"({self.base._source()} ** {self.exponent})"

    def __str__(self):
        exponent = str(self.exponent) if self.exponent >= 0 else f"({self.exponent})"
        return f"{self._wrap(self.base, strict=True)}^{exponent}"


ZERO = Const(0.0)
ONE = Const(1.0)
T = Time()


def x(index: int) -> Var:
    """State variable ``x{index}`` (1-based, as written in text)."""
    if index < 1:
        raise ValueError("state variables are numbered from 1")
    return Var(index - 1)


# --------------------------------------------------------------------------
# Folding constructors
# --------------------------------------------------------------------------

def is_zero(e: Expression) -> bool:
    return isinstance(e, Const) and e.value == 0


def is_one(e: Expression) -> bool:
    return isinstance(e, Const) and e.value == 1


def neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value) if a.value != 0 else ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    return Add(a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if is_zero(b):
        return a
    if is_zero(a):
        return neg(b)
    return Sub(a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if is_zero(a) or is_zero(b):
        return ZERO
    if is_one(a):
        return b
    if is_one(b):
        return a
    return Mul(a, b)


def div(a: Expression, b: Expression) -> Expression:
    if isinstance(b, Const) and b.value == 0:
        return Div(a, b)  # left in place so evaluation reports it
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    if is_zero(a):
        return ZERO
    if is_one(b):
        return a
    return Div(a, b)


def power(base: Expression, exponent: int) -> Expression:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const) and not (base.value == 0 and exponent < 0):
        return Const(base.value ** exponent)
    return Pow(base, exponent)


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()])"
    r")"
)
_STATE_NAME = re.compile(r"x(\d+)$")


@dataclass
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(ParseDiagnostic(start, "unexpected character", text[start]))
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, dimension, parameter_names):
        self.text = text
        self.dimension = dimension
        self.parameter_names = set(parameter_names)
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def error(self, message, token=None, cls=ParseError):
        token = token or self.current
        raise cls(ParseDiagnostic(token.offset, message, token.text))

    def expect(self, text):
        if self.current.text != text:
            found = "end of input" if self.current.kind == "end" else repr(self.current.text)
            self.error(f"expected {text!r}, found {found}")
        return self.advance()

    def parse(self) -> Expression:
        if self.current.kind == "end":
            self.error("empty expression")
        expression = self.sum()
        if self.current.kind != "end":
            self.error(f"unexpected token {self.current.text!r}")
        return expression

    def sum(self):
        left = self.product()
        while self.current.text in ("+", "-"):
            op = self.advance().text
            right = self.product()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def product(self):
        left = self.unary()
        while self.current.text in ("*", "/"):
            op = self.advance().text
            right = self.unary()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def unary(self):
        if self.current.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.current.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.current.text in ("^", "**"):
            self.advance()
            return Pow(base, self.integer_exponent())
        return base

    def integer_exponent(self) -> int:
        parenthesised = self.current.text == "("
        if parenthesised:
            self.advance()
        sign = 1
        if self.current.text in ("-", "+"):
            sign = -1 if self.advance().text == "-" else 1
        token = self.current
        if token.kind != "number" or not token.text.isdigit():
            self.error("integer exponent required")
        self.advance()
        if parenthesised:
            self.expect(")")
        return sign * int(token.text)

    def atom(self):
        token = self.current
        if token.kind == "number":
            self.advance()
            return Const(float(token.text))
        if token.text == "(":
            self.advance()
            inner = self.sum()
            self.expect(")")
            return inner
        if token.kind == "name":
            self.advance()
            return self.name(token)
        if token.kind == "end":
            self.error("unexpected end of input")
        self.error(f"unexpected token {token.text!r}")

    def name(self, token):
        name = token.text
        if name in FUNCTIONS:
            if self.current.text != "(":
                self.error(f"function {name!r} requires an argument in parentheses")
            self.advance()
            arg = self.sum()
            self.expect(")")
            return Func(name, arg)
        if self.current.text == "(":
            self.error(f"unknown function {name!r}", token, UnknownIdentifierError)
        if name in self.parameter_names:
            return Param(name)
        if name == "t":
            return T
        m = _STATE_NAME.match(name)
        if m:
            index = int(m.group(1))
            if not 1 <= index <= self.dimension:
                self.error(f"state variable {name} out of range for dimension {self.dimension}",
                           token, VariableIndexError)
            return Var(index - 1)
        self.error(f"unknown identifier {name!r}", token, UnknownIdentifierError)


def parse(text: str, dimension: int, parameter_names: Sequence[str] = ()) -> Expression:
    """Parse infix ``text`` into an :class:`Expression`.

    >>> str(parse("-x1 + 2*x2", 2))
    '-x1 + 2*x2'
    """
    if dimension < 1:
        raise ValueError("dimension must be positive")
    for name in parameter_names:
        if name == "t" or name in FUNCTIONS or _STATE_NAME.match(name):
            raise ValueError(f"parameter name {name!r} clashes with a reserved name")
    if not text or not text.strip():
        raise ParseError(ParseDiagnostic(0, "empty expression", text or ""))
    return _Parser(text, dimension, parameter_names).parse()


# --------------------------------------------------------------------------
# Evaluation and differentiation
# --------------------------------------------------------------------------

def evaluate(e: Expression, x: Sequence[float], t: float = 0.0,
             params: Mapping[str, float] | None = None) -> float:
    """Recursive evaluation; raises :class:`EvaluationError` on domain errors."""
    value = e._eval(x, t, params or {})
    if not math.isfinite(value):
        raise EvaluationError("non-finite result")
    return value


def _resolve_symbol(wrt) -> Expression:
    if isinstance(wrt, (Var, Time)):
        return wrt
    if isinstance(wrt, str):
        if wrt == "t":
            return T
        m = _STATE_NAME.match(wrt)
        if m and int(m.group(1)) >= 1:
            return Var(int(m.group(1)) - 1)
    raise ValueError(f"can only differentiate with respect to a state variable or t, not {wrt!r}")


def differentiate(e: Expression, wrt) -> Expression:
    """Exact derivative of ``e`` with respect to ``"x<i>"``, ``"t"`` or a node."""
    return e._diff(_resolve_symbol(wrt))


def gradient(e: Expression, dimension: int) -> tuple[Expression, ...]:
    return tuple(differentiate(e, Var(i)) for i in range(dimension))
