"""
Expression AST for the Hamiltonian language.

Nodes are immutable; structural equality is dataclass equality.
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple, Union

from rigidlab.phase import Regularity

FUNCTION_ARITY: Dict[str, Optional[int]] = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "abs": 1,
    "sqrt": 1,
    "tanh": 1,
    "bump": 1,
    # variadic, at least two arguments
    "min": None,
    "max": None,
}

NONSMOOTH_FUNCTIONS = frozenset({"abs", "min", "max"})

VARIABLE_PATTERN = re.compile(r"^(q|p|xi)([0-9]+)$")


class Layout(str, Enum):
    """Coordinate layout of evaluation points."""

    # (q1..qd, p1..pd, xi1..xik)
    PHASE = "phase"
    # (q1..qn, xi1..xik), generating-function cores
    GENERATING = "generating"


@dataclass(frozen=True)
class Number:
    value: float

    @property
    def children(self) -> Tuple["Node", ...]:
        return ()


@dataclass(frozen=True)
class Variable:
    kind: str  # "q", "p", "xi" or "t"
    index: int = 0

    @property
    def name(self) -> str:
        return "t" if self.kind == "t" else f"{self.kind}{self.index}"

    @property
    def children(self) -> Tuple["Node", ...]:
        return ()


@dataclass(frozen=True)
class Negate:
    operand: "Node"

    @property
    def children(self) -> Tuple["Node", ...]:
        return (self.operand,)


@dataclass(frozen=True)
class BinaryOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"

    @property
    def children(self) -> Tuple["Node", ...]:
        return (self.left, self.right)


@dataclass(frozen=True)
class Power:
    base: "Node"
    exponent: int

    @property
    def children(self) -> Tuple["Node", ...]:
        return (self.base,)


@dataclass(frozen=True)
class Call:
    func: str
    args: Tuple["Node", ...]

    @property
    def children(self) -> Tuple["Node", ...]:
        return self.args


Node = Union[Number, Variable, Negate, BinaryOp, Power, Call]


def node_depth(node: Node) -> int:
    """Leaves have depth 0."""
    kids = node.children
    if not kids:
        return 0
    return 1 + max(node_depth(child) for child in kids)


def uses_nonsmooth(node: Node) -> bool:
    if isinstance(node, Call) and node.func in NONSMOOTH_FUNCTIONS:
        return True
    return any(uses_nonsmooth(child) for child in node.children)


def _atom(node: Node) -> str:
    text = to_source(node)
    if isinstance(node, (Variable, Call)):
        return text
    if isinstance(node, Number) and node.value >= 0:
        return text
    if isinstance(node, (BinaryOp,)):
        return text  # already parenthesized
    return f"({text})"


def to_source(node: Node) -> str:
    """Canonical, fully parenthesized source text."""
    if isinstance(node, Number):
        text = repr(float(node.value))
        return text if node.value >= 0 else f"({text})"
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Negate):
        return "-" + _atom(node.operand)
    if isinstance(node, BinaryOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Power):
        return f"{_atom(node.base)}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}(" + ", ".join(to_source(a) for a in node.args) + ")"
    raise TypeError(f"unknown node {node!r}")


@dataclass(frozen=True)
class Expression:
    """A parsed expression with its coordinate declaration."""

    root: Node
    d: int
    k: int = 0
    layout: Layout = Layout.PHASE
    regularity: Regularity = Regularity.SMOOTH
    source: str = field(default="", compare=False)

    @property
    def dims(self) -> Tuple[int, int]:
        return (self.d, self.k)

    @property
    def depth(self) -> int:
        return node_depth(self.root)

    @property
    def n_coords(self) -> int:
        if self.layout is Layout.PHASE:
            return 2 * self.d + self.k
        return self.d + self.k

    def coordinate_index(self, var: Variable) -> int:
        """Column of a variable in evaluation points."""
        if var.kind == "q":
            return var.index - 1
        if self.layout is Layout.PHASE:
            if var.kind == "p":
                return self.d + var.index - 1
            return 2 * self.d + var.index - 1
        return self.d + var.index - 1

    def canonical(self) -> str:
        return to_source(self.root)

    def __str__(self) -> str:
        return self.canonical()
