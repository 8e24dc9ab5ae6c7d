"""Recursive-descent parser for the reward-sketch surface syntax.

Grammar (comments run from ``#`` to end of line)::

    sketch  := "fn" "(" IDENT ")" "{" expr "}"
    expr    := match | ifexpr | sum
    match   := "match" "token" "{" arm ("," arm)* [","] "}"
    arm     := (IDENT | "_") "=>" expr
    ifexpr  := "if" sum CMPOP sum "then" expr "else" expr
    sum     := product (("+" | "-") product)*
    product := unary ("*" unary)*
    unary   := "-" unary | atom
    atom    := NUMBER | HOLE | "step" | "len"
             | ("count" | "count_inclusive") "(" IDENT ")"
             | "(" expr ")"
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    Arith,
    Cmp,
    Const,
    Count,
    DEFAULT_VOCAB,
    Hole,
    If,
    Len,
    SketchError,
    StepIndex,
    TokenMatch,
    check_hole_order,
    tokens_of,
)

_KEYWORDS = {
    "fn", "match", "token", "if", "then", "else",
    "count", "count_inclusive", "step", "len",
}

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>[ \t\r\n]+)
    | (?P<comment>\#[^\n]*)
    | (?P<number>\d+\.\d*|\.\d+|\d+)
    | (?P<hole>\?\d+)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<op><=|>=|==|=>|[-+*<>(){},?])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str  # number | hole | ident | op | eof
    text: str
    line: int
    col: int


def _lex(src: str) -> list[_Tok]:
    toks = []
    line, col = 1, 1
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise SketchError(f"{line}:{col}: unexpected character {src[pos]!r}")
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok], vocab):
        self.toks = toks
        self.i = 0
        self.vocab = set(vocab)

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str):
        t = self.cur
        where = "end of input" if t.kind == "eof" else repr(t.text)
        raise SketchError(f"{t.line}:{t.col}: {msg} (found {where})")

    def accept(self, text: str) -> bool:
        if self.cur.kind != "eof" and self.cur.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        if self.cur.kind == "eof" or self.cur.text != text:
            self.error(f"expected {text!r}")
        t = self.cur
        self.i += 1
        return t

    def token_name(self) -> str:
        t = self.cur
        if t.kind != "ident" or t.text in _KEYWORDS:
            self.error("expected a token name")
        if t.text not in self.vocab:
            raise SketchError(f"{t.line}:{t.col}: unknown token name {t.text!r}")
        self.i += 1
        return t.text

    def sketch(self):
        self.expect("fn")
        self.expect("(")
        if self.cur.kind != "ident":
            self.error("expected trajectory parameter name")
        self.i += 1
        self.expect(")")
        self.expect("{")
        body = self.expr()
        self.expect("}")
        if self.cur.kind != "eof":
            self.error("trailing input after sketch body")
        return body

    def expr(self):
        if self.cur.text == "match":
            return self.match()
        if self.cur.text == "if":
            return self.ifexpr()
        return self.sum()

    def match(self):
        self.expect("match")
        self.expect("token")
        self.expect("{")
        arms = []
        default = None
        while True:
            if self.accept("_"):
                self.expect("=>")
                default = self.expr()
                self.accept(",")
                break
            tok = self.token_name()
            self.expect("=>")
            arms.append((tok, self.expr()))
            if not self.accept(","):
                break
        if default is None:
            self.error("match requires a final '_' default arm")
        self.expect("}")
        dup = [t for i, (t, _) in enumerate(arms) if t in [a for a, _ in arms[:i]]]
        if dup:
            raise SketchError(f"duplicate match arm for token {dup[0]!r}")
        return TokenMatch(tuple(arms), default)

    def ifexpr(self):
        self.expect("if")
        lhs = self.sum()
        op = self.cur.text
        if self.cur.kind != "op" or op not in ("<=", "<", ">=", ">", "=="):
            self.error("expected a comparison operator")
        self.i += 1
        rhs = self.sum()
        self.expect("then")
        then = self.expr()
        self.expect("else")
        orelse = self.expr()
        return If(Cmp(lhs, op, rhs), then, orelse)

    def sum(self):
        node = self.product()
        while self.cur.text in ("+", "-") and self.cur.kind == "op":
            op = self.cur.text
            self.i += 1
            node = Arith(op, (node, self.product()))
        return node

    def product(self):
        node = self.unary()
        while self.cur.text == "*" and self.cur.kind == "op":
            self.i += 1
            node = Arith("*", (node, self.unary()))
        return node

    def unary(self):
        if self.accept("-"):
            # fold "-" directly on a number literal so printed negative
            # constants re-parse to the same AST; "-(expr)" stays a negation
            if self.cur.kind == "number":
                t = self.cur
                self.i += 1
                return Const(-float(t.text))
            return Arith("neg", (self.unary(),))
        return self.atom()

    def atom(self):
        t = self.cur
        if t.kind == "number":
            self.i += 1
            return Const(float(t.text))
        if t.kind == "hole":
            self.i += 1
            return Hole(int(t.text[1:]))
        if t.text == "step":
            self.i += 1
            return StepIndex()
        if t.text == "len":
            self.i += 1
            return Len()
        if t.text in ("count", "count_inclusive"):
            inclusive = t.text == "count_inclusive"
            self.i += 1
            self.expect("(")
            tok = self.token_name()
            self.expect(")")
            return Count(tok, inclusive)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.error("expected an expression")


def parse_sketch(text: str, vocab=DEFAULT_VOCAB):
    """Parse sketch source into an AST.

    Raises :class:`SketchError` with line/column on syntax errors, unknown
    token names (not in ``vocab``), or hole ids out of first-appearance
    order.
    """
    ast = _Parser(_lex(text), vocab).sketch()
    check_hole_order(ast)
    return ast


def parse_sketch_file(path, vocab=DEFAULT_VOCAB):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_sketch(fh.read(), vocab=vocab)


def link_tokens(ast, vocab) -> None:
    """Check every token referenced by the sketch against a vocabulary."""
    unknown = tokens_of(ast) - set(vocab)
    if unknown:
        raise SketchError(f"sketch references unknown tokens: {sorted(unknown)}")
