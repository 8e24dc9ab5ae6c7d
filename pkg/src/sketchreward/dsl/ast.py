"""AST node types for reward-sketch expressions.

A sketch is a per-step reward expression evaluated over a trajectory
prefix.  Numeric holes (``?1``, ``?2``, ...) are free variables filled in
later by a hole assignment.  All nodes are immutable and hashable so
sketches and residuals can be shared freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

ARITH_OPS = ("+", "-", "*", "neg")
CMP_OPS = ("<=", "<", ">=", ">", "==")

# Default event vocabulary; environments may register supersets.
DEFAULT_VOCAB = (
    "reach_goal",
    "unlock_door",
    "close_door",
    "pickup_key",
    "drop_key",
    "open_door",
    "open_box",
    "pickup_ball",
    "drop_ball",
    "other",
)


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Hole:
    id: int


@dataclass(frozen=True)
class StepIndex:
    pass


@dataclass(frozen=True)
class Len:
    pass


@dataclass(frozen=True)
class Count:
    token: str
    inclusive: bool = False


@dataclass(frozen=True)
class Arith:
    op: str
    operands: tuple

    def __post_init__(self):
        if self.op not in ARITH_OPS:
            raise ValueError(f"unknown arithmetic op {self.op!r}")
        n = 1 if self.op == "neg" else 2
        if len(self.operands) != n:
            raise ValueError(f"op {self.op!r} expects {n} operands")


@dataclass(frozen=True)
class Cmp:
    lhs: "SketchExpr"
    op: str
    rhs: "SketchExpr"

    def __post_init__(self):
        if self.op not in CMP_OPS:
            raise ValueError(f"unknown comparison op {self.op!r}")


@dataclass(frozen=True)
class If:
    guard: Cmp
    then: "SketchExpr"
    orelse: "SketchExpr"


@dataclass(frozen=True)
class TokenMatch:
    arms: tuple  # ((token_name, expr), ...) in source order
    default: "SketchExpr"


SketchExpr = Union[Const, Hole, StepIndex, Len, Count, Arith, If, TokenMatch]


def _walk(expr):
    """Yield nodes in source (pre-)order, descending into guards first."""
    yield expr
    if isinstance(expr, Arith):
        for sub in expr.operands:
            yield from _walk(sub)
    elif isinstance(expr, If):
        yield from _walk(expr.guard.lhs)
        yield from _walk(expr.guard.rhs)
        yield from _walk(expr.then)
        yield from _walk(expr.orelse)
    elif isinstance(expr, TokenMatch):
        for _, sub in expr.arms:
            yield from _walk(sub)
        yield from _walk(expr.default)


def holes_of(expr) -> list[int]:
    """Hole ids in order of first appearance.

    For a well-formed sketch this is ``[1..n]`` with no gaps; holes inside
    guards count.
    """
    seen = []
    for node in _walk(expr):
        if isinstance(node, Hole) and node.id not in seen:
            seen.append(node.id)
    return seen


def check_hole_order(expr) -> None:
    ids = holes_of(expr)
    if ids != list(range(1, len(ids) + 1)):
        raise SketchError(
            f"holes must be numbered 1..n in order of first appearance, got {ids}"
        )


def tokens_of(expr) -> set[str]:
    """All token names referenced by match arms or count primitives."""
    out = set()
    for node in _walk(expr):
        if isinstance(node, Count):
            out.add(node.token)
        elif isinstance(node, TokenMatch):
            out.update(tok for tok, _ in node.arms)
    return out


class SketchError(ValueError):
    """Raised for malformed sketch sources or ASTs."""


def _fmt_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


# Precedence levels for printing: additive=1, multiplicative=2, unary=3.
def _prec(expr) -> int:
    if isinstance(expr, Arith):
        if expr.op in ("+", "-"):
            return 1
        if expr.op == "*":
            return 2
        return 3
    if isinstance(expr, (If, TokenMatch)):
        return 0
    return 4


def print_expr(expr, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(expr, Const):
        return _fmt_number(expr.value)
    if isinstance(expr, Hole):
        return f"?{expr.id}"
    if isinstance(expr, StepIndex):
        return "step"
    if isinstance(expr, Len):
        return "len"
    if isinstance(expr, Count):
        fn = "count_inclusive" if expr.inclusive else "count"
        return f"{fn}({expr.token})"
    if isinstance(expr, Arith):
        if expr.op == "neg":
            (operand,) = expr.operands
            inner = print_expr(operand, indent)
            # parenthesized literals keep an explicit negation node
            if _prec(operand) < 3 or isinstance(operand, Const):
                inner = f"({inner})"
            return f"-{inner}"
        lhs, rhs = expr.operands
        me = _prec(expr)
        ls = print_expr(lhs, indent)
        rs = print_expr(rhs, indent)
        if _prec(lhs) < me:
            ls = f"({ls})"
        # - and * are left-associative; parenthesize right operands of
        # equal precedence to keep the parse stable
        if _prec(rhs) <= me:
            rs = f"({rs})"
        return f"{ls} {expr.op} {rs}"
    if isinstance(expr, If):
        g = expr.guard
        gl = print_expr(g.lhs, indent)
        gr = print_expr(g.rhs, indent)
        if _prec(g.lhs) == 0:
            gl = f"({gl})"
        if _prec(g.rhs) == 0:
            gr = f"({gr})"
        ts = print_expr(expr.then, indent)
        es = print_expr(expr.orelse, indent)
        if _prec(expr.then) == 0:
            ts = f"({ts})"
        return f"if {gl} {g.op} {gr} then {ts} else {es}"
    if isinstance(expr, TokenMatch):
        lines = [f"match token {{"]
        for tok, sub in expr.arms:
            lines.append(f"{pad}  {tok} => {print_expr(sub, indent + 1)},")
        lines.append(f"{pad}  _ => {print_expr(expr.default, indent + 1)}")
        lines.append(f"{pad}}}")
        return "\n".join(lines)
    raise TypeError(f"not a sketch expression: {expr!r}")


def print_sketch(expr) -> str:
    """Surface-syntax source for a sketch; parses back to the same AST."""
    return f"fn(traj) {{\n  {print_expr(expr, 1)}\n}}\n"
