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
    holes_of,
    print_sketch,
    tokens_of,
)
from .interp import (
    ResidualProgram,
    apply_residual,
    eval_program,
    partial_eval,
    substitute,
    total_reward,
)
from .parser import link_tokens, parse_sketch, parse_sketch_file

__all__ = [
    "Arith", "Cmp", "Const", "Count", "DEFAULT_VOCAB", "Hole", "If", "Len",
    "SketchError", "StepIndex", "TokenMatch", "holes_of", "print_sketch",
    "tokens_of", "ResidualProgram", "apply_residual", "eval_program",
    "partial_eval", "substitute", "total_reward", "link_tokens",
    "parse_sketch", "parse_sketch_file",
]
