"""Shared fixtures and hypothesis strategies for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from sketchreward.dsl.ast import (
    Arith,
    Cmp,
    Const,
    Count,
    DEFAULT_VOCAB,
    Hole,
    If,
    Len,
    StepIndex,
    TokenMatch,
    holes_of,
)

TOKENS = ("reach_goal", "unlock_door", "pickup_key", "other")

# constants restricted to quarter-integers so their repr round-trips
# through the lexer (no exponent notation)
const_values = st.integers(-40, 40).map(lambda n: n / 4.0)
token_names = st.sampled_from(TOKENS)


def _leaf():
    return st.one_of(
        const_values.map(Const),
        st.integers(1, 3).map(Hole),
        st.builds(Count, token_names, st.booleans()),
        st.just(StepIndex()),
        st.just(Len()),
    )


def _compound(children):
    def make_match(pairs, default):
        seen = {}
        for tok, sub in pairs:
            seen.setdefault(tok, sub)
        return TokenMatch(tuple(seen.items()), default)

    return st.one_of(
        st.builds(lambda a, b: Arith("+", (a, b)), children, children),
        st.builds(lambda a, b: Arith("-", (a, b)), children, children),
        st.builds(lambda a, b: Arith("*", (a, b)), children, children),
        st.builds(lambda a: Arith("neg", (a,)), children),
        st.builds(
            lambda l, op, r, t, e: If(Cmp(l, op, r), t, e),
            children,
            st.sampled_from(("<=", "<", ">=", ">", "==")),
            children,
            children,
            children,
        ),
        st.builds(
            make_match,
            st.lists(st.tuples(token_names, children), min_size=1, max_size=3),
            children,
        ),
    )


raw_sketches = st.recursive(_leaf(), _compound, max_leaves=12)


def renumber_holes(expr):
    """Remap hole ids to 1..n in order of first appearance."""
    order = holes_of(expr)
    mapping = {old: new for new, old in enumerate(order, start=1)}

    def walk(e):
        if isinstance(e, Hole):
            return Hole(mapping[e.id])
        if isinstance(e, Arith):
            return Arith(e.op, tuple(walk(x) for x in e.operands))
        if isinstance(e, If):
            g = e.guard
            return If(Cmp(walk(g.lhs), g.op, walk(g.rhs)),
                      walk(e.then), walk(e.orelse))
        if isinstance(e, TokenMatch):
            return TokenMatch(tuple((t, walk(x)) for t, x in e.arms),
                              walk(e.default))
        return e

    return walk(expr)


sketches = raw_sketches.map(renumber_holes)
token_streams = st.lists(token_names, min_size=1, max_size=8)


def assignment_for(sketch, rng=None, scale=2.0):
    n = len(holes_of(sketch))
    if rng is None:
        rng = np.random.default_rng(0)
    return tuple(float(x) for x in rng.uniform(-scale, scale, size=n))


# --- independent reference interpreter (oracle) ---------------------------


def oracle_eval(sketch, h, tokens):
    """Reference evaluator written independently of the production
    interpreter: computes counts by slicing the token list per step."""

    def ev(e, t):
        if isinstance(e, Const):
            return e.value
        if isinstance(e, Hole):
            return float(h[e.id - 1])
        if isinstance(e, StepIndex):
            return float(t)
        if isinstance(e, Len):
            return float(t + 1)
        if isinstance(e, Count):
            upto = t + 1 if e.inclusive else t
            return float(tokens[:upto].count(e.token))
        if isinstance(e, Arith):
            vals = [ev(x, t) for x in e.operands]
            if e.op == "+":
                return vals[0] + vals[1]
            if e.op == "-":
                return vals[0] - vals[1]
            if e.op == "*":
                return vals[0] * vals[1]
            return -vals[0]
        if isinstance(e, If):
            g = e.guard
            a, b = ev(g.lhs, t), ev(g.rhs, t)
            ok = {"<=": a <= b, "<": a < b, ">=": a >= b,
                  ">": a > b, "==": a == b}[g.op]
            return ev(e.then if ok else e.orelse, t)
        if isinstance(e, TokenMatch):
            for tok, sub in e.arms:
                if tok == tokens[t]:
                    return ev(sub, t)
            return ev(e.default, t)
        raise TypeError(e)

    return [ev(sketch, t) for t in range(len(tokens))]


@pytest.fixture(scope="session")
def doorkey_sketch():
    from importlib import resources

    from sketchreward.dsl import parse_sketch_file

    return parse_sketch_file(resources.files("sketchreward.assets") / "doorkey.rsk")


@pytest.fixture(scope="session")
def doorkey_constraint(doorkey_sketch):
    from importlib import resources

    from sketchreward.constraints import parse_constraints_file

    path = resources.files("sketchreward.assets") / "doorkey.rsc"
    return parse_constraints_file(path, len(holes_of(doorkey_sketch)))


@pytest.fixture(scope="session")
def study_mdp():
    from sketchreward.cli import default_study_mdp

    return default_study_mdp()


assert DEFAULT_VOCAB  # re-exported for test modules
