"""Symbolic constraints over hole assignments.

Atoms are linear inequalities ``u(h) = coeffs . h + offset <= 0``.
Boolean structure is evaluated in the +1/-1 algebra (And = min,
Or = max, Not = negation); a constraint is satisfied when its value is
nonnegative.  Conjunctions of atoms additionally get a differentiable
soft penalty used by the learner:

    penalty(h) = sum_i -log(1 - sigmoid(relu(u_i(h))))

which sits at a constant floor of ``log 2`` per atom on the feasible
set (zero gradient there) and grows without bound as any ``u_i``
becomes positive.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

LOG2 = float(np.log(2.0))


class ConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class AtomicPredicate:
    """u(h) = coeffs . h + offset, satisfied iff u(h) <= 0."""

    coeffs: tuple
    offset: float = 0.0
    source: str = field(default="", compare=False)

    def u(self, h) -> float:
        h = np.asarray(h, dtype=float)
        if h.shape != (len(self.coeffs),):
            raise ConstraintError(
                f"assignment length {h.shape} does not match {len(self.coeffs)} holes"
            )
        return float(np.dot(self.coeffs, h) + self.offset)


@dataclass(frozen=True)
class Atom:
    pred: AtomicPredicate


@dataclass(frozen=True)
class Not:
    child: "Constraint"


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


Constraint = Atom | Not | And | Or


def eval_constraint(c, h) -> float:
    """Value in {-1, +1} per the min/max boolean algebra."""
    if isinstance(c, Atom):
        return 1.0 if c.pred.u(h) <= 0.0 else -1.0
    if isinstance(c, Not):
        return -eval_constraint(c.child, h)
    if isinstance(c, And):
        if not c.children:
            return 1.0  # vacuous conjunction
        return min(eval_constraint(x, h) for x in c.children)
    if isinstance(c, Or):
        if not c.children:
            return -1.0
        return max(eval_constraint(x, h) for x in c.children)
    raise TypeError(f"not a constraint: {c!r}")


def is_satisfied(c, h) -> bool:
    return eval_constraint(c, h) >= 0.0


def conjunction_atoms(c) -> list[AtomicPredicate]:
    """The atom list of a top-level conjunction.

    The soft penalty is only defined for conjunctions of atoms (a single
    atom counts as a one-element conjunction).
    """
    if isinstance(c, Atom):
        return [c.pred]
    if isinstance(c, And):
        out = []
        for child in c.children:
            if not isinstance(child, Atom):
                raise ConstraintError(
                    "soft penalty requires a conjunction of atomic predicates"
                )
            out.append(child.pred)
        return out
    raise ConstraintError("soft penalty requires a conjunction of atomic predicates")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def soft_penalty(c, h) -> float:
    """Binary cross-entropy of sigmoid(relu(u_i)) against target 0, summed."""
    atoms = conjunction_atoms(c)
    total = 0.0
    for a in atoms:
        r = max(a.u(h), 0.0)
        # -log(1 - sigmoid(r)) = r + log(1 + exp(-r)), stable for large r
        total += r + float(np.log1p(np.exp(-r)))
    return total


def grad_soft_penalty(c, h) -> np.ndarray:
    atoms = conjunction_atoms(c)
    h = np.asarray(h, dtype=float)
    grad = np.zeros_like(h)
    for a in atoms:
        u = a.u(h)
        if u > 0.0:
            grad += _sigmoid(u) * np.asarray(a.coeffs, dtype=float)
    return grad


_TERM_RE = re.compile(
    r"""\s*(?P<sign>[+-])?\s*
        (?:
            (?P<coef>\d+\.\d*|\.\d+|\d+)\s*(?:\*\s*\?(?P<hid1>\d+))?
          | \?(?P<hid2>\d+)\s*(?:\*\s*(?P<coef2>\d+\.\d*|\.\d+|\d+))?
        )\s*""",
    re.VERBOSE,
)


def _parse_linear(side: str, n_holes: int, where: str):
    """Parse ``0.5 * ?1 + ?2 - 3`` into (coeffs, offset)."""
    coeffs = np.zeros(n_holes)
    offset = 0.0
    pos = 0
    first = True
    while pos < len(side):
        m = _TERM_RE.match(side, pos)
        if m is None or m.end() == pos:
            raise ConstraintError(f"{where}: cannot parse term at {side[pos:]!r}")
        sign = -1.0 if m.group("sign") == "-" else 1.0
        if m.group("sign") is None and not first:
            raise ConstraintError(f"{where}: missing '+'/'-' before {side[pos:]!r}")
        hid = m.group("hid1") or m.group("hid2")
        coef = m.group("coef") or m.group("coef2")
        value = float(coef) if coef is not None else 1.0
        if hid is not None:
            idx = int(hid) - 1
            if not 0 <= idx < n_holes:
                raise ConstraintError(
                    f"{where}: hole ?{hid} out of range for a {n_holes}-hole sketch"
                )
            coeffs[idx] += sign * value
        else:
            offset += sign * value
        pos = m.end()
        first = False
    return coeffs, offset


def parse_atom(line: str, n_holes: int, where: str = "constraint") -> AtomicPredicate:
    """Normalize one linear inequality line to ``u(h) <= 0`` form."""
    for op in ("<=", ">="):
        if op in line:
            lhs_s, rhs_s = line.split(op, 1)
            break
    else:
        raise ConstraintError(f"{where}: expected '<=' or '>=' in {line!r}")
    lc, lo = _parse_linear(lhs_s.strip(), n_holes, where)
    rc, ro = _parse_linear(rhs_s.strip(), n_holes, where)
    coeffs, offset = lc - rc, lo - ro
    if op == ">=":
        coeffs, offset = -coeffs, -offset
    return AtomicPredicate(tuple(coeffs), offset, source=line.strip())


def parse_constraints(text: str, n_holes: int) -> And:
    """Parse a ``.rsc`` file body: one atom per line, conjunction implied."""
    atoms = []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        atoms.append(Atom(parse_atom(line, n_holes, where=f"line {i}")))
    return And(tuple(atoms))


def parse_constraints_file(path, n_holes: int) -> And:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_constraints(fh.read(), n_holes)
