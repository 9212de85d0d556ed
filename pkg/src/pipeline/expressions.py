"""
Block expressions: a small arithmetic language over the variables x1, x2, ...

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := number | var | func '(' expr (',' expr)* ')' | '(' expr ')' | '-' factor
    func   := pow | exp | ln | cos | abs

The parser produces a tree of nodes. One tree is evaluated three ways by
swapping the backend: on numpy point batches (the reference semantics), on
interval cells, and on interval duals for gradient enclosures.
"""
from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass

import numpy as np

from .intervals import Dual, Interval, SingularityError

FUNCTIONS = {"pow": 2, "exp": 1, "ln": 1, "cos": 1, "abs": 1}

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/(),]))"
)
_VARIABLE = re.compile(r"x([1-9]\d*)")


class ExpressionError(ValueError):
    def __init__(self, message: str, column: int | None = None):
        self.column = column
        if column is not None:
            message = f"{message} at column {column}"
        super().__init__(message)


# --- Tree ---
class ExprNode:
    """Base class for all expression tree nodes."""

    def eval(self, backend):
        raise NotImplementedError

    def constant_value(self) -> float | None:
        return None

    def integer_value(self) -> int | None:
        value = self.constant_value()
        if value is None or not math.isfinite(value) or not float(value).is_integer():
            return None
        return int(value)

    def variables(self) -> set[int]:
        return set()


class LiteralNode(ExprNode):
    def __init__(self, value: float):
        self.value = value

    def eval(self, backend):
        return backend.constant(self.value)

    def constant_value(self):
        return float(self.value)

    def __repr__(self):
        return repr(self.value)


class VariableNode(ExprNode):
    """x_(index+1); `index` is 0-based."""

    def __init__(self, index: int):
        self.index = index

    def eval(self, backend):
        return backend.variable(self.index)

    def variables(self):
        return {self.index}

    def __repr__(self):
        return f"x{self.index + 1}"


class UnaryOpNode(ExprNode):
    def __init__(self, op: str, operand: ExprNode):
        self.op = op
        self.operand = operand

    def eval(self, backend):
        return -self.operand.eval(backend)

    def constant_value(self):
        inner = self.operand.constant_value()
        return None if inner is None else -inner

    def variables(self):
        return self.operand.variables()

    def __repr__(self):
        return f"-{self.operand}"


_BINARY = {"+": operator.add, "-": operator.sub, "*": operator.mul}


class BinaryOpNode(ExprNode):
    def __init__(self, op: str, left: ExprNode, right: ExprNode):
        self.op = op
        self.left = left
        self.right = right

    def eval(self, backend):
        left, right = self.left.eval(backend), self.right.eval(backend)
        if self.op == "/":
            return backend.divide(left, right)
        return _BINARY[self.op](left, right)

    def constant_value(self):
        left, right = self.left.constant_value(), self.right.constant_value()
        if left is None or right is None:
            return None
        if self.op == "/":
            return left / right if right != 0 else None
        return float(_BINARY[self.op](left, right))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __repr__(self):
        return f"({self.left} {self.op} {self.right})"


class CallNode(ExprNode):
    def __init__(self, func: str, args: list[ExprNode]):
        self.func = func
        self.args = args

    def eval(self, backend):
        if self.func == "pow":
            base = self.args[0].eval(backend)
            n = self.args[1].integer_value()
            if n is not None:
                return backend.ipow(base, n)
            return backend.power(base, self.args[1].eval(backend))
        return getattr(backend, self.func)(self.args[0].eval(backend))

    def variables(self):
        return set().union(*(arg.variables() for arg in self.args))

    def __repr__(self):
        return f"{self.func}({', '.join(map(repr, self.args))})"


# --- Parser ---
class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = self._tokenize(text)
        self.pos = 0

    @staticmethod
    def _tokenize(text: str) -> list[tuple[str, str, int]]:
        tokens, at = [], 0
        while at < len(text):
            if text[at:].strip() == "":
                break
            match = _TOKEN.match(text, at)
            if not match:
                column = at + len(text[at:]) - len(text[at:].lstrip()) + 1
                raise ExpressionError(f"unexpected character {text[column - 1]!r}", column)
            kind = match.lastgroup
            tokens.append((kind, match.group(kind), match.start(kind) + 1))
            at = match.end()
        tokens.append(("end", "", len(text) + 1))
        return tokens

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def take(self) -> tuple[str, str, int]:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, value: str):
        kind, text, column = self.take()
        if text != value or kind == "end":
            found = "end of expression" if kind == "end" else repr(text)
            raise ExpressionError(f"expected {value!r}, found {found}", column)

    def parse(self) -> ExprNode:
        node = self.expr()
        kind, text, column = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {text!r}", column)
        return node

    def expr(self) -> ExprNode:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinaryOpNode(op, node, self.term())
        return node

    def term(self) -> ExprNode:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinaryOpNode(op, node, self.factor())
        return node

    def factor(self) -> ExprNode:
        kind, text, column = self.take()
        if kind == "number":
            return LiteralNode(float(text))
        if kind == "op" and text == "-":
            return UnaryOpNode("-", self.factor())
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if text in FUNCTIONS:
                return self.call(text, column)
            match = _VARIABLE.fullmatch(text)
            if match:
                return VariableNode(int(match.group(1)) - 1)
            raise ExpressionError(f"unknown identifier {text!r}", column)
        found = "end of expression" if kind == "end" else repr(text)
        raise ExpressionError(f"unexpected {found}", column)

    def call(self, func: str, column: int) -> ExprNode:
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == "," and self.peek()[0] == "op":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if len(args) != FUNCTIONS[func]:
            raise ExpressionError(f"{func} takes {FUNCTIONS[func]} argument(s), got {len(args)}", column)
        return CallNode(func, args)


# --- Backends ---
class _ArrayBackend:
    """Reference float64 semantics on a batch of points."""

    def __init__(self, points: np.ndarray):
        self.points = points

    def variable(self, index):
        return self.points[:, index]

    def constant(self, value):
        return np.float64(value)

    def divide(self, a, b):
        if np.any(b == 0):
            raise SingularityError("division by zero")
        return a / b

    def ipow(self, a, n):
        if n < 0 and np.any(a == 0):
            raise SingularityError("negative power of zero")
        return np.power(a, float(n))

    def power(self, a, b):
        if np.any(a <= 0):
            raise SingularityError("pow with a non-integer exponent needs a positive base")
        return np.power(a, b)

    def exp(self, a):
        return np.exp(a)

    def ln(self, a):
        if np.any(a <= 0):
            raise SingularityError("ln of a non-positive value")
        return np.log(a)

    def cos(self, a):
        return np.cos(a)

    def abs(self, a):
        return np.abs(a)


class _EnclosureBackend:
    """Shared operations of the Interval and Dual backends."""

    def divide(self, a, b):
        return a / b

    def ipow(self, a, n):
        return self.lift(a).ipow(n)

    def power(self, a, b):
        return self.lift(a).power(b)

    def exp(self, a):
        return self.lift(a).exp()

    def ln(self, a):
        return self.lift(a).ln()

    def cos(self, a):
        return self.lift(a).cos()

    def abs(self, a):
        return self.lift(a).abs()


class _IntervalBackend(_EnclosureBackend):
    def __init__(self, lower: np.ndarray, upper: np.ndarray):
        self.lower, self.upper = lower, upper

    def variable(self, index):
        return Interval(self.lower[:, index], self.upper[:, index])

    def constant(self, value):
        return Interval(value)

    def lift(self, a):
        return Interval.lift(a)


class _DualBackend(_EnclosureBackend):
    def __init__(self, lower: np.ndarray, upper: np.ndarray):
        self.lower, self.upper = lower, upper
        self.n = lower.shape[1]

    def variable(self, index):
        return Dual.variable(Interval(self.lower[:, index], self.upper[:, index]), index, self.n)

    def constant(self, value):
        return Dual.constant(value, self.n)

    def lift(self, a):
        return Dual.lift(a, self.n)


# --- Public wrapper ---
@dataclass(frozen=True, eq=False)
class Expression:
    text: str
    root: ExprNode

    @property
    def arity(self) -> int:
        """Highest variable number used (0 for a constant)."""
        used = self.root.variables()
        return max(used) + 1 if used else 0

    @property
    def is_variable(self) -> bool:
        return isinstance(self.root, VariableNode)

    def evaluate(self, points) -> np.ndarray:
        arr = np.asarray(points, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] < self.arity:
            raise ValueError(f"{self.text} needs points with at least {self.arity} coordinates, got shape {arr.shape}")
        with np.errstate(all="ignore"):
            out = np.broadcast_to(self.root.eval(_ArrayBackend(arr)), (len(arr),)).astype(np.float64)
        if not np.isfinite(out).all():
            where = arr[np.argmax(~np.isfinite(out))]
            raise SingularityError(f"{self.text} is not finite at {where.tolist()}")
        return out

    def enclose(self, lower: np.ndarray, upper: np.ndarray) -> Interval:
        with np.errstate(all="ignore"):
            return Interval.lift(self.root.eval(_IntervalBackend(lower, upper)))

    def enclose_gradient(self, lower: np.ndarray, upper: np.ndarray) -> list[Interval]:
        with np.errstate(all="ignore"):
            dual = Dual.lift(self.root.eval(_DualBackend(lower, upper)), lower.shape[1])
        return dual.grad

    def __call__(self, points) -> np.ndarray:
        return self.evaluate(points)

    def __str__(self):
        return self.text


def parse_expression(text: str, dim: int | None = None) -> Expression:
    """Parse `text`; with `dim`, variables beyond x<dim> are rejected."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression is empty")
    expression = Expression(text.strip(), _Parser(text).parse())
    if dim is not None and expression.arity > dim:
        raise ExpressionError(f"uses x{expression.arity} but the block has dimension {dim}")
    return expression
