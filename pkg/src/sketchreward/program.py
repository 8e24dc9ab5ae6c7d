"""A complete or partially-applied reward program: sketch plus assignment."""

from __future__ import annotations

from dataclasses import dataclass

from .dsl import eval_program, holes_of, partial_eval, print_sketch, substitute


@dataclass(frozen=True)
class Program:
    sketch: object
    assignment: tuple = ()

    def __post_init__(self):
        n = len(holes_of(self.sketch))
        if len(self.assignment) != n:
            raise ValueError(
                f"assignment has {len(self.assignment)} values, sketch has {n} holes"
            )

    def per_step(self, tau) -> list[float]:
        return eval_program(self.sketch, self.assignment, tau)

    def total(self, tau) -> float:
        return sum(self.per_step(tau))

    def complete_sketch(self):
        """The hole-free sketch with the assignment substituted in."""
        return substitute(self.sketch, self.assignment)

    def source(self) -> str:
        return print_sketch(self.complete_sketch())

    def residual_for(self, tau):
        return partial_eval(self.sketch, tau)
