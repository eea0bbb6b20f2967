"""
Expression language for sections and embeddings.

Grammar (whitespace is ignored)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" ["-"] integer)?
    atom   := integer | "x" index | function "(" expr ")" | "(" expr ")"
    function := "sinpi" | "cospi" | "step" | "step" order

step is the quintic smoothstep, 0 below 0 and 1 above 1; stepK is its K-th
derivative. Rational literals are written p/q and parse as a quotient of integers. Printing a
parsed tree reproduces the canonical text exactly.
"""
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from kuranishi_atlas.config import DENOMINATOR_BOUND
from kuranishi_atlas.errors import DimensionError, EvalError, ExprSyntaxError

Value = Union[Fraction, float]

# sin(k*pi/6) for k = 0..11 when rational, None when it involves sqrt(3)
_SIN_SIXTHS = [Fraction(0), Fraction(1, 2), None, Fraction(1), None, Fraction(1, 2),
               Fraction(0), Fraction(-1, 2), None, Fraction(-1), None, Fraction(-1, 2)]


def sinpi(q: Value) -> Value:
    """sin(pi*q), exact at rational multiples of 1/6 with rational value."""
    if isinstance(q, Fraction) and (6 * q).denominator == 1:
        exact = _SIN_SIXTHS[int(6 * q) % 12]
        if exact is not None:
            return exact
    return math.sin(math.pi * float(q))


def cospi(q: Value) -> Value:
    if isinstance(q, Fraction):
        return sinpi(q + Fraction(1, 2))
    return math.cos(math.pi * q)


class Expr:
    """Base node. Subclasses are immutable dataclasses."""
    precedence = 5

    def evaluate(self, x: Sequence[Value]) -> Value:
        raise NotImplementedError

    def evaluate_array(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def diff(self, axis: int) -> "Expr":
        raise NotImplementedError

    def to_sympy(self):
        raise NotImplementedError

    def variables(self) -> set:
        return set()

    def substitute(self, mapping: Sequence["Expr"]) -> "Expr":
        raise NotImplementedError

    def text(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.text()

    def wrap(self, minimum: int) -> str:
        return self.text() if self.precedence >= minimum else f"({self.text()})"

    def __add__(self, other) -> "Expr":
        return add(self, lift(other))

    def __radd__(self, other) -> "Expr":
        return add(lift(other), self)

    def __sub__(self, other) -> "Expr":
        return sub(self, lift(other))

    def __rsub__(self, other) -> "Expr":
        return sub(lift(other), self)

    def __mul__(self, other) -> "Expr":
        return mul(self, lift(other))

    def __rmul__(self, other) -> "Expr":
        return mul(lift(other), self)

    def __truediv__(self, other) -> "Expr":
        return div(self, lift(other))

    def __neg__(self) -> "Expr":
        return neg(self)

    def __pow__(self, exponent: int) -> "Expr":
        return power(self, exponent)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: Fraction

    @property
    def precedence(self) -> int:
        if self.value < 0:
            return 3
        return 5 if self.value.denominator == 1 else 2

    def evaluate(self, x):
        return self.value

    def evaluate_array(self, points):
        return np.full(len(points), float(self.value))

    def diff(self, axis):
        return ZERO

    def to_sympy(self):
        return sympy.Rational(self.value.numerator, self.value.denominator)

    def substitute(self, mapping):
        return self

    def text(self):
        if self.value < 0:
            return "-" + Const(-self.value).wrap(3)
        if self.value.denominator == 1:
            return str(self.value.numerator)
        return f"{self.value.numerator}/{self.value.denominator}"


@dataclass(frozen=True, eq=True)
class Var(Expr):
    index: int

    def evaluate(self, x):
        if self.index >= len(x):
            raise DimensionError(f"x{self.index + 1} used with a point of dimension {len(x)}")
        return x[self.index]

    def evaluate_array(self, points):
        return np.asarray(points[:, self.index], dtype=float)

    def diff(self, axis):
        return ONE if axis == self.index else ZERO

    def to_sympy(self):
        return sympy.Symbol(f"x{self.index + 1}")

    def variables(self):
        return {self.index}

    def substitute(self, mapping):
        return mapping[self.index]

    def text(self):
        return f"x{self.index + 1}"


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr
    precedence = 3

    def evaluate(self, x):
        return -self.arg.evaluate(x)

    def evaluate_array(self, points):
        return -self.arg.evaluate_array(points)

    def diff(self, axis):
        return neg(self.arg.diff(axis))

    def to_sympy(self):
        return -self.arg.to_sympy()

    def variables(self):
        return self.arg.variables()

    def substitute(self, mapping):
        return neg(self.arg.substitute(mapping))

    def text(self):
        return "-" + self.arg.wrap(3)


@dataclass(frozen=True, eq=True)
class Binary(Expr):
    left: Expr
    right: Expr
    symbol = "?"

    def variables(self):
        return self.left.variables() | self.right.variables()

    def text(self):
        spaced = f" {self.symbol} " if self.precedence == 1 else self.symbol
        return self.left.wrap(self.precedence) + spaced + self.right.wrap(self.precedence + 1)


class Add(Binary):
    precedence = 1
    symbol = "+"

    def evaluate(self, x):
        return self.left.evaluate(x) + self.right.evaluate(x)

    def evaluate_array(self, points):
        return self.left.evaluate_array(points) + self.right.evaluate_array(points)

    def diff(self, axis):
        return add(self.left.diff(axis), self.right.diff(axis))

    def to_sympy(self):
        return self.left.to_sympy() + self.right.to_sympy()

    def substitute(self, mapping):
        return add(self.left.substitute(mapping), self.right.substitute(mapping))


class Sub(Binary):
    precedence = 1
    symbol = "-"

    def evaluate(self, x):
        return self.left.evaluate(x) - self.right.evaluate(x)

    def evaluate_array(self, points):
        return self.left.evaluate_array(points) - self.right.evaluate_array(points)

    def diff(self, axis):
        return sub(self.left.diff(axis), self.right.diff(axis))

    def to_sympy(self):
        return self.left.to_sympy() - self.right.to_sympy()

    def substitute(self, mapping):
        return sub(self.left.substitute(mapping), self.right.substitute(mapping))


class Mul(Binary):
    precedence = 2
    symbol = "*"

    def evaluate(self, x):
        return self.left.evaluate(x) * self.right.evaluate(x)

    def evaluate_array(self, points):
        return self.left.evaluate_array(points) * self.right.evaluate_array(points)

    def diff(self, axis):
        return add(mul(self.left.diff(axis), self.right), mul(self.left, self.right.diff(axis)))

    def to_sympy(self):
        return self.left.to_sympy() * self.right.to_sympy()

    def substitute(self, mapping):
        return mul(self.left.substitute(mapping), self.right.substitute(mapping))


class Div(Binary):
    precedence = 2
    symbol = "/"

    def evaluate(self, x):
        denominator = self.right.evaluate(x)
        if denominator == 0:
            raise EvalError("division by zero", f"{self.text()} with x = {tuple(str(v) for v in x)}")
        return self.left.evaluate(x) / denominator

    def evaluate_array(self, points):
        denominator = self.right.evaluate_array(points)
        if np.any(denominator == 0):
            raise EvalError("division by zero", self.text())
        return self.left.evaluate_array(points) / denominator

    def diff(self, axis):
        numerator = sub(mul(self.left.diff(axis), self.right), mul(self.left, self.right.diff(axis)))
        return div(numerator, power(self.right, 2))

    def to_sympy(self):
        return self.left.to_sympy() / self.right.to_sympy()

    def substitute(self, mapping):
        return div(self.left.substitute(mapping), self.right.substitute(mapping))


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: int
    precedence = 4

    def evaluate(self, x):
        value = self.base.evaluate(x)
        if value == 0 and self.exponent < 0:
            raise EvalError("division by zero", self.text())
        return value ** self.exponent

    def evaluate_array(self, points):
        return self.base.evaluate_array(points) ** float(self.exponent)

    def diff(self, axis):
        inner = self.base.diff(axis)
        return mul(mul(Const(Fraction(self.exponent)), power(self.base, self.exponent - 1)), inner)

    def to_sympy(self):
        return self.base.to_sympy() ** self.exponent

    def variables(self):
        return self.base.variables()

    def substitute(self, mapping):
        return power(self.base.substitute(mapping), self.exponent)

    def text(self):
        return f"{self.base.wrap(5)}^{self.exponent}"


@dataclass(frozen=True, eq=True)
class Call(Expr):
    name: str
    arg: Expr

    def evaluate(self, x):
        value = self.arg.evaluate(x)
        return sinpi(value) if self.name == "sinpi" else cospi(value)

    def evaluate_array(self, points):
        inner = np.pi * self.arg.evaluate_array(points)
        return np.sin(inner) if self.name == "sinpi" else np.cos(inner)

    def diff(self, axis):
        inner = self.arg.diff(axis)
        if inner == ZERO:
            return ZERO
        if self.name == "sinpi":
            outer = mul(PI, Call("cospi", self.arg))
        else:
            outer = neg(mul(PI, Call("sinpi", self.arg)))
        return mul(outer, inner)

    def to_sympy(self):
        function = sympy.sin if self.name == "sinpi" else sympy.cos
        return function(sympy.pi * self.arg.to_sympy())

    def variables(self):
        return self.arg.variables()

    def substitute(self, mapping):
        return Call(self.name, self.arg.substitute(mapping))

    def text(self):
        return f"{self.name}({self.arg.text()})"


@dataclass(frozen=True, eq=True)
class PiConst(Expr):
    """The constant pi, produced only by differentiating sinpi and cospi."""

    def evaluate(self, x):
        return math.pi

    def evaluate_array(self, points):
        return np.full(len(points), math.pi)

    def diff(self, axis):
        return ZERO

    def to_sympy(self):
        return sympy.pi

    def substitute(self, mapping):
        return self

    def text(self):
        return "pi"


_SMOOTHSTEP = np.polynomial.Polynomial([0, 0, 0, 10, -15, 6])


def _step_coefficients(order: int) -> List[int]:
    return [int(round(c)) for c in _SMOOTHSTEP.deriv(order).coef] if order < 6 else [0]


def smoothstep(t: Value, order: int = 0) -> Value:
    """Quintic smoothstep 6t^5 - 15t^4 + 10t^3 clamped to [0, 1], or its derivative."""
    if t <= 0:
        return Fraction(0) if isinstance(t, Fraction) else 0.0
    if t >= 1:
        one = 1 if order == 0 else 0
        return Fraction(one) if isinstance(t, Fraction) else float(one)
    result = Fraction(0) if isinstance(t, Fraction) else 0.0
    for c in reversed(_step_coefficients(order)):
        result = result * t + c
    return result


@dataclass(frozen=True, eq=True)
class Step(Expr):
    """The C^2 transition step(t) and its derivatives; used for bump functions."""
    arg: Expr
    order: int = 0

    def evaluate(self, x):
        return smoothstep(self.arg.evaluate(x), self.order)

    def evaluate_array(self, points):
        t = self.arg.evaluate_array(points)
        inner = np.polynomial.Polynomial(_step_coefficients(self.order))(np.clip(t, 0.0, 1.0))
        outside = 1.0 if self.order == 0 else 0.0
        return np.where(t <= 0, 0.0, np.where(t >= 1, outside, inner))

    def diff(self, axis):
        inner = self.arg.diff(axis)
        if inner == ZERO or self.order >= 5:
            return ZERO
        return mul(Step(self.arg, self.order + 1), inner)

    def to_sympy(self):
        t = self.arg.to_sympy()
        symbol = sympy.Symbol("t")
        body = sympy.Poly(list(reversed(_step_coefficients(self.order))), symbol).as_expr().subs(symbol, t)
        return sympy.Piecewise((0, t <= 0), (1 if self.order == 0 else 0, t >= 1), (body, True))

    def variables(self):
        return self.arg.variables()

    def substitute(self, mapping):
        return Step(self.arg.substitute(mapping), self.order)

    def text(self):
        name = "step" if self.order == 0 else f"step{self.order}"
        return f"{name}({self.arg.text()})"


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))
PI = PiConst()


def lift(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(Fraction(value))


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(b, Const) and b.value < 0:
        return Sub(a, Const(-b.value))
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    if a == b:
        return ZERO
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(b, Const) and not isinstance(a, Const):
        return Mul(b, a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    if a == ZERO and b != ZERO:
        return ZERO
    if b == ONE:
        return a
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a: Expr, exponent: int) -> Expr:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return a
    if isinstance(a, Const) and (a.value != 0 or exponent > 0):
        return Const(a.value ** exponent)
    return Pow(a, exponent)


_TOKEN = re.compile(r"\s*(?:(\d+)|(x)(\d+)|(sinpi|cospi|step\d*)|(\^|\*|/|\+|-|\(|\)))")


class _Parser:
    def __init__(self, text: str, dim: Optional[int]) -> None:
        self.text = text
        self.dim = dim
        self.tokens: List[Tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            match = _TOKEN.match(text, pos)
            if not match:
                raise ExprSyntaxError(f"unexpected character {text[pos:].lstrip()[:1]!r}", pos)
            start = match.start() + (len(match.group(0)) - len(match.group(0).lstrip()))
            if match.group(1):
                self.tokens.append(("int", match.group(1), start))
            elif match.group(2):
                self.tokens.append(("var", match.group(3), start))
            elif match.group(4):
                self.tokens.append(("func", match.group(4), start))
            else:
                self.tokens.append(("op", match.group(5), start))
            pos = match.end()
        self.index = 0

    def peek(self) -> Optional[Tuple[str, str, int]]:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def take(self, value: Optional[str] = None) -> Tuple[str, str, int]:
        token = self.peek()
        if token is None:
            raise ExprSyntaxError("unexpected end of expression", len(self.text))
        if value is not None and token[1] != value:
            raise ExprSyntaxError(f"expected {value!r}", token[2])
        self.index += 1
        return token

    def parse(self) -> Expr:
        node = self.expr()
        token = self.peek()
        if token is not None:
            raise ExprSyntaxError(f"unexpected {token[1]!r}", token[2])
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek() is not None and self.peek()[1] in ("+", "-"):
            symbol = self.take()[1]
            right = self.term()
            node = Add(node, right) if symbol == "+" else Sub(node, right)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek() is not None and self.peek()[1] in ("*", "/"):
            symbol = self.take()[1]
            right = self.unary()
            node = Mul(node, right) if symbol == "*" else Div(node, right)
        return node

    def unary(self) -> Expr:
        token = self.peek()
        if token is not None and token[1] == "-":
            self.take()
            inner = self.unary()
            if isinstance(inner, Const) and inner.value.denominator == 1 and inner.value >= 0:
                return Const(-inner.value)
            return Neg(inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        token = self.peek()
        if token is not None and token[1] == "^":
            self.take()
            sign = 1
            if self.peek() is not None and self.peek()[1] == "-":
                self.take()
                sign = -1
            exponent = self.take()
            if exponent[0] != "int":
                raise ExprSyntaxError("exponent must be an integer literal", exponent[2])
            return Pow(base, sign * int(exponent[1]))
        return base

    def atom(self) -> Expr:
        token = self.take()
        kind, value, position = token
        if kind == "int":
            return Const(Fraction(int(value)))
        if kind == "var":
            index = int(value) - 1
            if index < 0 or (self.dim is not None and index >= self.dim):
                raise ExprSyntaxError(f"variable x{value} outside dimension {self.dim}", position)
            return Var(index)
        if kind == "func":
            self.take("(")
            inner = self.expr()
            self.take(")")
            if value.startswith("step"):
                return Step(inner, int(value[4:] or 0))
            return Call(value, inner)
        if value == "(":
            inner = self.expr()
            self.take(")")
            return inner
        raise ExprSyntaxError(f"unexpected {value!r}", position)


def parse(text: str, dim: Optional[int] = None) -> Expr:
    """
    Parse expression text.

    :param text: canonical or free-form expression text.
    :param dim: number of declared variables, or None to accept any.
    :return: the expression tree.
    :raises ExprSyntaxError: on malformed text, with the character position.
    """
    return _Parser(text, dim).parse()


def rationalize(value: Value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(float(value)).limit_denominator(DENOMINATOR_BOUND)


@dataclass(frozen=True)
class ExprMap:
    """A map R^in_dim -> R^out_dim given by component expressions."""
    in_dim: int
    components: Tuple[Expr, ...]

    def __post_init__(self):
        for component in self.components:
            if any(v >= self.in_dim for v in component.variables()):
                raise DimensionError(f"component {component} uses variables beyond x{self.in_dim}")

    @property
    def out_dim(self) -> int:
        return len(self.components)

    @staticmethod
    def parse(texts: Sequence[str], in_dim: int) -> "ExprMap":
        return ExprMap(in_dim, tuple(parse(t, in_dim) for t in texts))

    @staticmethod
    def identity(dim: int) -> "ExprMap":
        return ExprMap(dim, tuple(Var(k) for k in range(dim)))

    @staticmethod
    def zero(in_dim: int, out_dim: int) -> "ExprMap":
        return ExprMap(in_dim, tuple(ZERO for _ in range(out_dim)))

    def texts(self) -> List[str]:
        return [c.text() for c in self.components]

    def evaluate(self, x: Sequence) -> Tuple[Value, ...]:
        if len(x) != self.in_dim:
            raise DimensionError(f"point of dimension {len(x)} for a map from R^{self.in_dim}")
        return tuple(c.evaluate(x) for c in self.components)

    def evaluate_array(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.out_dim == 0:
            return np.zeros((len(points), 0))
        return np.stack([c.evaluate_array(points) for c in self.components], axis=1)

    def derivative_map(self) -> List[List[Expr]]:
        return [[c.diff(k) for k in range(self.in_dim)] for c in self.components]

    def jacobian(self, x: Sequence):
        """
        Exact Jacobian at x; non-rational entries are rationalized with the
        configured denominator bound.
        """
        from kuranishi_atlas.exterior import RationalMatrix

        entries = [[rationalize(d.evaluate(x)) for d in row] for row in self.derivative_map()]
        return RationalMatrix.from_rows(entries, self.out_dim, self.in_dim)

    def jacobian_array(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        result = np.zeros((len(points), self.out_dim, self.in_dim))
        for i, row in enumerate(self.derivative_map()):
            for k, d in enumerate(row):
                result[:, i, k] = d.evaluate_array(points)
        return result

    def finite_difference_error(self, points: np.ndarray, step: float = 1e-5) -> float:
        """Largest relative deviation between the symbolic and central-difference Jacobians."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        symbolic = self.jacobian_array(points)
        numeric = np.zeros_like(symbolic)
        for k in range(self.in_dim):
            shift = np.zeros(self.in_dim)
            shift[k] = step
            numeric[:, :, k] = (self.evaluate_array(points + shift) - self.evaluate_array(points - shift)) / (2 * step)
        scale = np.maximum(1.0, np.abs(symbolic))
        return float(np.max(np.abs(symbolic - numeric) / scale)) if symbolic.size else 0.0

    def compose(self, inner: "ExprMap") -> "ExprMap":
        """self after inner."""
        if inner.out_dim != self.in_dim:
            raise DimensionError(f"cannot compose R^{self.in_dim} map after a map into R^{inner.out_dim}")
        return ExprMap(inner.in_dim, tuple(c.substitute(inner.components) for c in self.components))

    def linear_combination(self, matrix) -> "ExprMap":
        """The map x -> matrix * self(x) for a RationalMatrix ``matrix``."""
        if matrix.cols != self.out_dim:
            raise DimensionError(f"matrix with {matrix.cols} columns applied to a map into R^{self.out_dim}")
        components = []
        for i in range(matrix.rows):
            total: Expr = ZERO
            for k in range(matrix.cols):
                total = add(total, mul(Const(matrix.entry(i, k)), self.components[k]))
            components.append(total)
        return ExprMap(self.in_dim, tuple(components))

    def to_sympy(self) -> List:
        return [c.to_sympy() for c in self.components]

    def axis_affine(self) -> Optional[List[Tuple[Optional[int], Fraction, Fraction]]]:
        """
        Describe the map as y_j = a_j * x_{k_j} + b_j when every component is affine in
        at most one variable; None otherwise.
        """
        symbols = [sympy.Symbol(f"x{k + 1}") for k in range(self.in_dim)]
        result = []
        for component in self.components:
            expression = sympy.expand(component.to_sympy())
            if expression.has(sympy.sin, sympy.cos, sympy.pi, sympy.Piecewise):
                return None
            try:
                poly = sympy.Poly(expression, *symbols) if symbols else None
            except sympy.PolynomialError:
                return None
            if poly is None:
                result.append((None, Fraction(0), _to_fraction(expression)))
                continue
            if poly.total_degree() > 1:
                return None
            used = [k for k, s in enumerate(symbols) if poly.coeff_monomial(s) != 0]
            if len(used) > 1:
                return None
            constant = _to_fraction(poly.coeff_monomial(1))
            if not used:
                result.append((None, Fraction(0), constant))
            else:
                result.append((used[0], _to_fraction(poly.coeff_monomial(symbols[used[0]])), constant))
        return result

    def __str__(self) -> str:
        return "(" + ", ".join(self.texts()) + ")"


def _to_fraction(value) -> Fraction:
    rational = sympy.Rational(value)
    return Fraction(int(rational.p), int(rational.q))
