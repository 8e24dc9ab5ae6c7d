"""Tabular softmax policies with an explicit probability floor.

The floor mixes a uniform component into the softmax:

    pi(a|s) = (1 - n_actions * eps_floor) * softmax(logits[s])[a] + eps_floor

so every action keeps probability >= eps_floor regardless of the logits.
This realizes the lower-bounded-policy premise the concentration bounds
need: any length-T trajectory has probability >= eps_floor ** T.
"""

from __future__ import annotations

import numpy as np

DEFAULT_EPS_FLOOR_SCALE = 0.01  # eps_floor = scale / n_actions by default


class PolicyTable:
    def __init__(self, n_states: int, n_actions: int, eps_floor: float | None = None,
                 logits: np.ndarray | None = None):
        if eps_floor is None:
            eps_floor = DEFAULT_EPS_FLOOR_SCALE / n_actions
        if not 0.0 < eps_floor < 1.0 / n_actions:
            raise ValueError("eps_floor must lie in (0, 1/n_actions)")
        self.n_states = n_states
        self.n_actions = n_actions
        self.eps_floor = float(eps_floor)
        if logits is None:
            logits = np.zeros((n_states, n_actions))
        self.logits = np.asarray(logits, dtype=float).copy()
        if self.logits.shape != (n_states, n_actions):
            raise ValueError("logits shape mismatch")

    def copy(self) -> "PolicyTable":
        return PolicyTable(self.n_states, self.n_actions, self.eps_floor, self.logits)

    def softmax(self, s: int) -> np.ndarray:
        z = self.logits[s] - self.logits[s].max()
        e = np.exp(z)
        return e / e.sum()

    def probs(self, s: int) -> np.ndarray:
        mix = 1.0 - self.n_actions * self.eps_floor
        return mix * self.softmax(s) + self.eps_floor

    def all_probs(self) -> np.ndarray:
        z = self.logits - self.logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        mix = 1.0 - self.n_actions * self.eps_floor
        return mix * p + self.eps_floor

    def log_prob(self, s: int, a: int) -> float:
        return float(np.log(self.probs(s)[a]))

    def sample_action(self, s: int, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_actions, p=self.probs(s)))

    def greedy_action(self, s: int) -> int:
        return int(np.argmax(self.logits[s]))

    def trajectory_floor(self, n_steps: int) -> float:
        """Lower bound on pi(tau) for any trajectory of n_steps actions."""
        return self.eps_floor ** n_steps
