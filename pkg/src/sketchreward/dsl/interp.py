"""Evaluation, partial evaluation, and substitution for reward sketches.

``eval_program`` maps a (sketch, hole assignment, trajectory) triple to a
per-step reward list.  ``partial_eval`` substitutes every trajectory-
dependent quantity (matched token, counts, step index, prefix length)
into the sketch once, leaving a residual expression per step whose only
free variables are the holes; applying an assignment to the residual is
bit-identical to direct evaluation, so the residual can be cached and
reused across many sampled assignments.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    Arith,
    Cmp,
    Const,
    Count,
    Hole,
    If,
    Len,
    SketchError,
    StepIndex,
    TokenMatch,
    holes_of,
)


class _StepCtx:
    """Per-step trajectory facts visible to the expression."""

    __slots__ = ("token", "t", "counts")

    def __init__(self, token, t, counts):
        self.token = token
        self.t = t
        self.counts = counts  # token -> occurrences among tokens[0..t-1]


def _check_assignment(sketch, h):
    n = len(holes_of(sketch))
    if len(h) != n:
        raise SketchError(f"assignment has {len(h)} values, sketch has {n} holes")


def _cmp(a, op, b):
    if op == "<=":
        return a <= b
    if op == "<":
        return a < b
    if op == ">=":
        return a >= b
    if op == ">":
        return a > b
    return a == b


def _eval(expr, h, ctx: _StepCtx) -> float:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Hole):
        return h[expr.id - 1]
    if isinstance(expr, StepIndex):
        return float(ctx.t)
    if isinstance(expr, Len):
        return float(ctx.t + 1)
    if isinstance(expr, Count):
        n = ctx.counts.get(expr.token, 0)
        if expr.inclusive and ctx.token == expr.token:
            n += 1
        return float(n)
    if isinstance(expr, Arith):
        if expr.op == "neg":
            return -_eval(expr.operands[0], h, ctx)
        a = _eval(expr.operands[0], h, ctx)
        b = _eval(expr.operands[1], h, ctx)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        return a * b
    if isinstance(expr, If):
        g = expr.guard
        taken = _cmp(_eval(g.lhs, h, ctx), g.op, _eval(g.rhs, h, ctx))
        return _eval(expr.then if taken else expr.orelse, h, ctx)
    if isinstance(expr, TokenMatch):
        for tok, sub in expr.arms:
            if tok == ctx.token:
                return _eval(sub, h, ctx)
        return _eval(expr.default, h, ctx)
    raise TypeError(f"not a sketch expression: {expr!r}")


def _step_contexts(tokens):
    counts: dict[str, int] = {}
    for t, tok in enumerate(tokens):
        yield _StepCtx(tok, t, dict(counts))
        counts[tok] = counts.get(tok, 0) + 1


def _as_tokens(tau):
    return list(tau.tokens) if hasattr(tau, "tokens") else list(tau)


def eval_program(sketch, h, tokens) -> list[float]:
    """Per-step rewards of ``sketch`` under assignment ``h`` on a token
    stream.

    ``tokens`` may be a Trajectory or its per-step event token list (the
    only part of a trajectory the DSL can observe).  Output length equals
    the number of steps.
    """
    tokens = _as_tokens(tokens)
    if not tokens:
        raise SketchError("trajectory must have at least one step")
    _check_assignment(sketch, h)
    return [_eval(sketch, h, ctx) for ctx in _step_contexts(tokens)]


@dataclass(frozen=True)
class ResidualProgram:
    """One pruned expression per step; free variables are the holes only."""

    per_step: tuple
    n_holes: int

    def __len__(self):
        return len(self.per_step)

    def apply(self, h) -> list[float]:
        if len(h) != self.n_holes:
            raise SketchError(
                f"assignment has {len(h)} values, residual has {self.n_holes} holes"
            )
        ctx = None  # residuals carry no trajectory references
        return [_eval(expr, h, ctx) for expr in self.per_step]


def _prune(expr, ctx: _StepCtx):
    if isinstance(expr, (Const, Hole)):
        return expr
    if isinstance(expr, (StepIndex, Len, Count)):
        return Const(_eval(expr, None, ctx))
    if isinstance(expr, Arith):
        ops = tuple(_prune(sub, ctx) for sub in expr.operands)
        if all(isinstance(o, Const) for o in ops):
            return Const(_eval(Arith(expr.op, ops), None, ctx))
        return Arith(expr.op, ops)
    if isinstance(expr, If):
        g = expr.guard
        lhs = _prune(g.lhs, ctx)
        rhs = _prune(g.rhs, ctx)
        if isinstance(lhs, Const) and isinstance(rhs, Const):
            taken = _cmp(lhs.value, g.op, rhs.value)
            return _prune(expr.then if taken else expr.orelse, ctx)
        return If(Cmp(lhs, g.op, rhs), _prune(expr.then, ctx), _prune(expr.orelse, ctx))
    if isinstance(expr, TokenMatch):
        for tok, sub in expr.arms:
            if tok == ctx.token:
                return _prune(sub, ctx)
        return _prune(expr.default, ctx)
    raise TypeError(f"not a sketch expression: {expr!r}")


def partial_eval(sketch, tokens) -> ResidualProgram:
    """Specialize ``sketch`` to a token stream.

    For every valid ``h``: ``partial_eval(e, toks).apply(h) ==
    eval_program(e, h, toks)`` with bit-identical floats, because the
    hole-dependent operations are preserved verbatim and only hole-free
    subtrees are folded.
    """
    tokens = _as_tokens(tokens)
    if not tokens:
        raise SketchError("trajectory must have at least one step")
    per_step = tuple(_prune(sketch, ctx) for ctx in _step_contexts(tokens))
    return ResidualProgram(per_step, len(holes_of(sketch)))


def apply_residual(residual: ResidualProgram, h) -> list[float]:
    return residual.apply(h)


def _subst(expr, h):
    if isinstance(expr, Hole):
        return Const(float(h[expr.id - 1]))
    if isinstance(expr, Arith):
        return Arith(expr.op, tuple(_subst(sub, h) for sub in expr.operands))
    if isinstance(expr, If):
        g = expr.guard
        return If(
            Cmp(_subst(g.lhs, h), g.op, _subst(g.rhs, h)),
            _subst(expr.then, h),
            _subst(expr.orelse, h),
        )
    if isinstance(expr, TokenMatch):
        return TokenMatch(
            tuple((tok, _subst(sub, h)) for tok, sub in expr.arms),
            _subst(expr.default, h),
        )
    return expr


def substitute(sketch, h):
    """Complete program: every hole replaced by its assigned value."""
    _check_assignment(sketch, h)
    return _subst(sketch, h)


def total_reward(program, tokens, h=()) -> float:
    """Sum of the per-step rewards over the whole trajectory."""
    return sum(eval_program(program, h, tokens))
