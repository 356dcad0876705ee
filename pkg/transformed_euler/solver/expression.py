"""A small expression language in one variable `x`, used to write branch formulas.

Supported are real literals, `x`, the binary operators `+ - * / ^`, unary minus,
parentheses and the functions `sign`, `abs`, `exp`, `sin`, `cos`, `sqrt`. `^` is
right-associative and binds tighter than unary minus, so `-x^2` is `-(x^2)`.

Expressions are parsed with lark into an immutable tree of nodes which evaluate on
floats or numpy arrays alike.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from lark import Lark, Transformer, v_args
from lark.exceptions import (
    UnexpectedCharacters,
    UnexpectedEOF,
    UnexpectedInput,
    UnexpectedToken,
    VisitError,
)

from .errors import ExpressionError


grammar = r"""
    ?start: expr

    ?expr: term
         | expr "+" term        -> add
         | expr "-" term        -> sub

    ?term: factor
         | term "*" factor      -> mul
         | term "/" factor      -> div

    ?factor: power
           | "-" factor         -> neg

    ?power: atom
          | atom "^" factor     -> pow

    ?atom: NUMBER               -> number
         | NAME                 -> name
         | NAME "(" [arguments] ")" -> call
         | "(" expr ")"

    arguments: expr ("," expr)*

    NAME: /[A-Za-z_][A-Za-z0-9_]*/

    %import common.NUMBER
    %import common.WS
    %ignore WS
"""

parser = Lark(grammar, parser="lalr", maybe_placeholders=True)

# sign(0) is 0, as for numpy
FUNCTIONS = {
    "sign": np.sign,
    "abs": np.abs,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
}

BINARY_OPERATORS = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}

# Readable names for lark's anonymous terminals, for error messages
TERMINAL_NAMES = {
    "NUMBER": "number",
    "NAME": "identifier",
    "LPAR": "'('",
    "RPAR": "')'",
    "PLUS": "'+'",
    "MINUS": "'-'",
    "STAR": "'*'",
    "SLASH": "'/'",
    "CIRCUMFLEX": "'^'",
    "COMMA": "','",
    "$END": "end of input",
}


class Node(ABC):
    """A node of an expression tree."""

    @abstractmethod
    def evaluate(self, x):
        """Evaluate at `x`, which may be a float or a numpy array."""

    @abstractmethod
    def to_source(self) -> str:
        """Print as (fully parenthesized) source text that parses back to this node."""

    def __str__(self):
        return self.to_source()

    def __call__(self, x):
        return self.evaluate(x)


@dataclass(frozen=True)
class Number(Node):
    value: float

    def evaluate(self, x):
        if isinstance(x, np.ndarray):
            return np.full(x.shape, self.value)
        return np.float64(self.value)

    def to_source(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Variable(Node):
    def evaluate(self, x):
        return np.asarray(x, dtype=float) if isinstance(x, np.ndarray) else np.float64(x)

    def to_source(self):
        return "x"


@dataclass(frozen=True)
class Negate(Node):
    operand: Node

    def evaluate(self, x):
        return np.negative(self.operand.evaluate(x))

    def to_source(self):
        return f"(-{self.operand.to_source()})"


@dataclass(frozen=True)
class BinaryOp(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, x):
        return BINARY_OPERATORS[self.op](self.left.evaluate(x), self.right.evaluate(x))

    def to_source(self):
        return f"({self.left.to_source()} {self.op} {self.right.to_source()})"


@dataclass(frozen=True)
class Call(Node):
    name: str
    argument: Node

    def evaluate(self, x):
        return FUNCTIONS[self.name](self.argument.evaluate(x))

    def to_source(self):
        return f"{self.name}({self.argument.to_source()})"


def _byte_offset(src: str, char_pos: int) -> int:
    return len(src[:char_pos].encode("utf-8"))


@v_args(inline=True)
class ASTBuilder(Transformer):
    """Turns lark's parse tree into `Node` objects, checking identifiers and arity."""

    def __init__(self, src: str):
        super().__init__()
        self.src = src

    def number(self, token):
        return Number(float(token))

    def name(self, token):
        if token == "x":
            return Variable()
        raise ExpressionError(
            f"unknown identifier '{token}' (the only variable is 'x')",
            _byte_offset(self.src, token.start_pos),
            kind="unknown identifier",
            source=self.src,
        )

    def arguments(self, *exprs):
        return list(exprs)

    def call(self, token, arguments):
        position = _byte_offset(self.src, token.start_pos)
        if str(token) not in FUNCTIONS:
            raise ExpressionError(
                f"unknown function '{token}', expected one of {', '.join(FUNCTIONS)}",
                position,
                kind="unknown identifier",
                source=self.src,
            )
        arguments = arguments or []
        if len(arguments) != 1:
            raise ExpressionError(
                f"{token}() takes exactly 1 argument ({len(arguments)} given)",
                position,
                kind="arity",
                source=self.src,
            )
        return Call(str(token), arguments[0])

    def neg(self, operand):
        return Negate(operand)

    def add(self, left, right):
        return BinaryOp("+", left, right)

    def sub(self, left, right):
        return BinaryOp("-", left, right)

    def mul(self, left, right):
        return BinaryOp("*", left, right)

    def div(self, left, right):
        return BinaryOp("/", left, right)

    def pow(self, left, right):
        return BinaryOp("^", left, right)


def _expected(names) -> tuple[str, ...]:
    return tuple(sorted({TERMINAL_NAMES.get(n, n) for n in names}))


def parse_expression(src: str) -> Node:
    """Parse `src` into an expression tree.

    Raises `ExpressionError` with the byte offset of the problem and, for syntax
    errors, the tokens that would have been accepted there.
    """
    try:
        tree = parser.parse(src)
    except UnexpectedInput as error:
        if isinstance(error, UnexpectedToken):
            if error.token.type == "$END":
                char_pos = len(src)
                found = "end of input"
            else:
                char_pos = error.token.start_pos
                found = repr(str(error.token))
            expected = _expected(error.expected)
        elif isinstance(error, UnexpectedCharacters):
            char_pos = error.pos_in_stream
            found = repr(src[char_pos])
            expected = _expected(error.allowed or ())
        elif isinstance(error, UnexpectedEOF):
            char_pos = len(src)
            found = "end of input"
            expected = _expected(error.expected)
        else:
            char_pos = max(getattr(error, "pos_in_stream", 0) or 0, 0)
            found = "input"
            expected = ()
        message = f"unexpected {found}"
        if expected:
            message += f", expected {' or '.join(expected)}"
        raise ExpressionError(
            message,
            _byte_offset(src, char_pos),
            kind="syntax",
            expected=expected,
            source=src,
        ) from None
    try:
        return ASTBuilder(src).transform(tree)
    except VisitError as error:
        if isinstance(error.orig_exc, ExpressionError):
            raise error.orig_exc from None
        raise
