"""Scalar expressions over named chart coordinates.

Coefficient functions (anchors, structure functions, bivector and 3-form
components) are written as small arithmetic expressions, parsed once into an
immutable tree and evaluated vectorially with numpy.  Derivatives are taken by
a fourth-order central finite-difference stencil; there is no symbolic
differentiation.

The grammar is documented in ``docs/expressions.md``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

DEFAULT_STEP = 1e-4

FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "tanh": np.tanh,
}
CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, source: str, position: int):
        self.source = source
        self.position = position
        caret = " " * position + "^"
        super().__init__(f"{message} at position {position}\n  {source}\n  {caret}")


class UndeclaredVariableError(ExprError):
    pass


class ArityError(ExprError):
    pass


class DomainError(ExprError, ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# Tree nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


@dataclass(frozen=True)
class Partial:
    """Finite-difference derivative of ``child`` along variable ``var``."""

    child: object
    var: str
    step: float


@dataclass(frozen=True)
class Let:
    """Evaluate ``body`` with some variables bound to sub-expressions."""

    bindings: tuple  # tuple[tuple[str, node], ...]
    body: object


@dataclass(frozen=True, eq=False)
class Native:
    """Opaque vectorized callable of named variables (used by numeric oracles)."""

    func: Callable[..., np.ndarray]
    names: tuple
    label: str = "native"


# ---------------------------------------------------------------------------
# Tokenizer and parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "name" | "op" | "end"
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", source, pos)
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            if text == "**":
                text = "^"
            tokens.append(_Token(kind, text, pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


class _Parser:
    # expr     := term (("+" | "-") term)*
    # term     := unary (("*" | "/") unary)*
    # unary    := ("-" | "+") unary | power
    # power    := primary ("^" exponent)*
    # exponent := ["-"] INT | "(" ["-"] INT ")"
    # primary  := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

    def __init__(self, source: str, variables: Sequence[str]):
        self.source = source
        self.variables = set(variables)
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.tok
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"{message}: unexpected {what}", self.source, tok.pos)

    def advance(self) -> _Token:
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        if self.tok.text != text or self.tok.kind != "op":
            self.error(f"expected {text!r}")
        return self.advance()

    def parse(self):
        if self.tok.kind == "end":
            self.error("empty expression")
        node = self.expr()
        if self.tok.kind != "end":
            self.error("trailing input")
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        node = self.primary()
        while self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            node = Pow(node, self.exponent())
        return node

    def exponent(self) -> int:
        paren = self.tok.kind == "op" and self.tok.text == "("
        if paren:
            self.advance()
        sign = 1
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            sign = -1
        tok = self.tok
        if tok.kind != "num" or not tok.text.isdigit():
            self.error("exponent must be an integer literal")
        self.advance()
        if paren:
            self.expect(")")
        return sign * int(tok.text)

    def primary(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(tok)
            if tok.text in self.variables:
                return Var(tok.text)
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text])
            if tok.text in FUNCTIONS:
                self.error(f"function {tok.text!r} used without arguments", tok)
            raise UndeclaredVariableError(
                f"undeclared variable {tok.text!r} at position {tok.pos} in {self.source!r}"
            )
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.error("expected a number, variable, function call or '('")

    def call(self, name_tok: _Token):
        name = name_tok.text
        if name not in FUNCTIONS:
            raise ExprSyntaxError(f"unknown function {name!r}", self.source, name_tok.pos)
        self.expect("(")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        if len(args) != 1:
            raise ArityError(
                f"function {name!r} takes 1 argument, got {len(args)} "
                f"(position {name_tok.pos} in {self.source!r})"
            )
        return Call(name, tuple(args))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _free_vars(node) -> frozenset:
    if isinstance(node, Num):
        return frozenset()
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, Neg):
        return _free_vars(node.operand)
    if isinstance(node, BinOp):
        return _free_vars(node.left) | _free_vars(node.right)
    if isinstance(node, Pow):
        return _free_vars(node.base)
    if isinstance(node, Call):
        return frozenset().union(*(_free_vars(a) for a in node.args))
    if isinstance(node, Partial):
        return _free_vars(node.child)
    if isinstance(node, Let):
        bound = {name for name, _ in node.bindings}
        inner = _free_vars(node.body)
        out = inner - bound
        for name, sub in node.bindings:
            if name in inner:
                out |= _free_vars(sub)
        return frozenset(out)
    if isinstance(node, Native):
        return frozenset(node.names)
    raise TypeError(f"unknown node {node!r}")


def _eval(node, env: Mapping[str, np.ndarray]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        left = _eval(node.left, env)
        right = _eval(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if np.any(np.asarray(right) == 0):
            raise DomainError("division by zero")
        return left / right
    if isinstance(node, Pow):
        base = _eval(node.base, env)
        if node.exponent < 0:
            if np.any(np.asarray(base) == 0):
                raise DomainError("zero raised to a negative power")
            return 1.0 / base ** (-node.exponent)
        return base**node.exponent
    if isinstance(node, Call):
        arg = _eval(node.args[0], env)
        if node.func == "log" and np.any(np.asarray(arg) <= 0):
            raise DomainError("log of a nonpositive number")
        if node.func == "sqrt" and np.any(np.asarray(arg) < 0):
            raise DomainError("sqrt of a negative number")
        return FUNCTIONS[node.func](arg)
    if isinstance(node, Partial):
        if node.var not in _free_vars(node.child):
            return 0.0
        h = node.step
        x = env[node.var]
        vals = []
        for k in (-2, -1, 1, 2):
            shifted = dict(env)
            shifted[node.var] = x + k * h
            vals.append(_eval(node.child, shifted))
        return (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * h)
    if isinstance(node, Let):
        inner = dict(env)
        for name, sub in node.bindings:
            inner[name] = _eval(sub, env)
        return _eval(node.body, inner)
    if isinstance(node, Native):
        return node.func(*(env[n] for n in node.names))
    raise TypeError(f"unknown node {node!r}")


def _to_source(node) -> str:
    if isinstance(node, Num):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_to_source(node.left)} {node.op} {_to_source(node.right)})"
    if isinstance(node, Pow):
        exp = str(node.exponent) if node.exponent >= 0 else f"({node.exponent})"
        return f"({_to_source(node.base)}^{exp})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(_to_source(a) for a in node.args)})"
    if isinstance(node, Partial):
        return f"D[{node.var}]({_to_source(node.child)})"
    if isinstance(node, Let):
        binds = ", ".join(f"{n}={_to_source(s)}" for n, s in node.bindings)
        return f"({_to_source(node.body)})|{{{binds}}}"
    if isinstance(node, Native):
        return f"<{node.label}>"
    raise TypeError(f"unknown node {node!r}")


class ScalarField:
    """An immutable scalar function of the coordinates ``variables``.

    ``field(x)`` evaluates at a single point; ``field.evaluate_many(points)``
    evaluates on an ``(..., n)`` array of points.
    """

    __slots__ = ("source", "variables", "ast", "_constant", "_index")

    def __init__(self, source: str, variables: Sequence[str], ast):
        variables = tuple(variables)
        missing = _free_vars(ast) - set(variables)
        if missing:
            raise UndeclaredVariableError(
                f"expression references undeclared variable(s) {sorted(missing)}"
            )
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "ast", ast)
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(variables)})
        constant = None
        if not _free_vars(ast):
            constant = float(_eval(ast, {}))
        object.__setattr__(self, "_constant", constant)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    def __repr__(self) -> str:
        return f"ScalarField({self.source!r}, {list(self.variables)})"

    @property
    def is_constant(self) -> bool:
        return self._constant is not None

    @property
    def is_zero(self) -> bool:
        return self._constant == 0.0

    def depends_on(self, name: str) -> bool:
        return name in _free_vars(self.ast)

    def evaluate_many(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != len(self.variables):
            raise ValueError(
                f"point dimension {points.shape[-1]} does not match "
                f"{len(self.variables)} variables"
            )
        shape = points.shape[:-1]
        if self._constant is not None:
            return np.full(shape, self._constant)
        env = {name: points[..., i] for i, name in enumerate(self.variables)}
        with np.errstate(all="ignore"):
            value = np.broadcast_to(np.asarray(_eval(self.ast, env), dtype=float), shape)
        if not np.all(np.isfinite(value)):
            raise DomainError(f"non-finite value of {self.source!r}")
        return np.array(value)

    def __call__(self, point) -> float:
        point = np.asarray(point, dtype=float)
        if point.ndim != 1:
            raise ValueError("expected a single point; use evaluate_many for batches")
        return float(self.evaluate_many(point))

    def to_source(self) -> str:
        return _to_source(self.ast)

    def with_variables(self, variables: Sequence[str]) -> "ScalarField":
        """Same expression viewed as a function of a (larger) variable list."""
        return ScalarField(self.source, variables, self.ast)

    # arithmetic builders (used to assemble derived coefficient fields)

    def _coerce(self, other) -> "ScalarField":
        if isinstance(other, ScalarField):
            if other.variables != self.variables:
                raise ValueError("cannot combine fields over different variables")
            return other
        return constant(float(other), self.variables)

    def _combine(self, op: str, other, reflected=False) -> "ScalarField":
        other = self._coerce(other)
        left, right = (other, self) if reflected else (self, other)
        return ScalarField(
            f"({left.source}) {op} ({right.source})",
            self.variables,
            _simplify_binop(op, left.ast, right.ast),
        )

    def __add__(self, other):
        return self._combine("+", other)

    def __radd__(self, other):
        return self._combine("+", other, reflected=True)

    def __sub__(self, other):
        return self._combine("-", other)

    def __rsub__(self, other):
        return self._combine("-", other, reflected=True)

    def __mul__(self, other):
        return self._combine("*", other)

    def __rmul__(self, other):
        return self._combine("*", other, reflected=True)

    def __truediv__(self, other):
        return self._combine("/", other)

    def __neg__(self):
        if self.is_zero:
            return self
        return ScalarField(f"-({self.source})", self.variables, Neg(self.ast))


def _is_num(node, value=None) -> bool:
    return isinstance(node, Num) and (value is None or node.value == value)


def _simplify_binop(op: str, left, right):
    # only drops exact zeros and ones; keeps generated trees small
    if op == "+":
        if _is_num(left, 0.0):
            return right
        if _is_num(right, 0.0):
            return left
    elif op == "-":
        if _is_num(right, 0.0):
            return left
        if _is_num(left, 0.0):
            return Neg(right)
    elif op == "*":
        if _is_num(left, 0.0) or _is_num(right, 0.0):
            return Num(0.0)
        if _is_num(left, 1.0):
            return right
        if _is_num(right, 1.0):
            return left
    elif op == "/" and _is_num(right, 1.0):
        return left
    return BinOp(op, left, right)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def _check_variables(variables: Sequence[str]) -> tuple[str, ...]:
    variables = tuple(variables)
    if not variables:
        raise ValueError("at least one variable is required")
    for name in variables:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
            raise ValueError(f"invalid variable name {name!r}")
        if name in FUNCTIONS:
            raise ValueError(f"variable name {name!r} shadows a function")
    if len(set(variables)) != len(variables):
        raise ValueError(f"duplicate variable names in {list(variables)}")
    return variables


def parse_expr(source: str, variables: Sequence[str]) -> ScalarField:
    """Parse ``source`` into a field over ``variables``.

    >>> parse_expr("x1*x2 + 3", ["x1", "x2"])([2, 5])
    13.0
    """
    variables = _check_variables(variables)
    if not isinstance(source, str):
        source = repr(float(source))
    ast = _Parser(source, variables).parse()
    return ScalarField(source, variables, ast)


def constant(value: float, variables: Sequence[str]) -> ScalarField:
    return ScalarField(repr(float(value)), variables, Num(float(value)))


def evaluate(field: ScalarField, point) -> float:
    return field(point)


def partial(field: ScalarField, index: int, point, step: float = DEFAULT_STEP) -> float:
    """Fourth-order central difference of ``field`` along coordinate ``index``."""
    if step <= 0:
        raise ValueError("step must be positive")
    return float(gradient_component(field, index, np.asarray(point, dtype=float), step))


def gradient_component(field: ScalarField, index: int, points, step: float = DEFAULT_STEP):
    """Vectorized :func:`partial` on an ``(..., n)`` array of points."""
    points = np.asarray(points, dtype=float)
    if not field.depends_on(field.variables[index]):
        return np.zeros(points.shape[:-1])
    vals = []
    for k in (-2, -1, 1, 2):
        shifted = points.copy()
        shifted[..., index] += k * step
        vals.append(field.evaluate_many(shifted))
    return (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * step)


def derivative_field(field: ScalarField, index: int, step: float = DEFAULT_STEP) -> ScalarField:
    """A field whose value is the finite-difference partial of ``field``."""
    var = field.variables[index]
    if not field.depends_on(var):
        return constant(0.0, field.variables)
    return ScalarField(f"D[{var}]({field.source})", field.variables, Partial(field.ast, var, step))


def restrict(field: ScalarField, fixed: Mapping[str, float], variables: Sequence[str]) -> ScalarField:
    """Pull ``field`` back to the slice where the ``fixed`` coordinates are held constant.

    The result is a field over ``variables``; derivatives inside ``field``
    along fixed coordinates are still taken in the ambient space.
    """
    relevant = tuple((name, Num(float(v))) for name, v in fixed.items() if field.depends_on(name))
    ast = Let(relevant, field.ast) if relevant else field.ast
    return ScalarField(f"({field.source})|{dict(fixed)}", variables, ast)


def native(func: Callable[..., np.ndarray], variables: Sequence[str], label: str = "native") -> ScalarField:
    """Wrap a vectorized callable ``func(x1, x2, ...)`` as a field."""
    variables = tuple(variables)
    return ScalarField(f"<{label}>", variables, Native(func, variables, label))
