"""Explicit finite MDPs whose trajectory spaces can be enumerated exactly.

These are the oracle substrate for the estimator suite: small enough to
list every trajectory with its passive probability, so partition
functions and nominal-distribution expectations have brute-force values.

Convention: the passive trajectory probability p(tau) folds in a uniform
action prior 1/n_actions per step, so the passive masses of all
trajectories sum to one and the partition function of the all-zero
program is exactly 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .trajectory import Trajectory

_PROB_TOL = 1e-12
DEFAULT_ENUMERATION_CAP = 10_000_000


class EnumerationCapError(RuntimeError):
    pass


@dataclass
class TabularMDP:
    transition: np.ndarray  # [s][a][s'] probabilities
    init: np.ndarray  # d0 over states
    horizon: int  # number of (state, action) steps per trajectory
    costs: np.ndarray | None = None  # optional per-(s, a) step costs
    token_table: list | None = None  # optional per-(s, a) event tokens
    name: str = field(default="tabular")

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        self.init = np.asarray(self.init, dtype=float)
        n_s, n_a, n_s2 = self.transition.shape
        if n_s != n_s2:
            raise ValueError("transition tensor must be [s][a][s']")
        if self.init.shape != (n_s,):
            raise ValueError("init distribution shape mismatch")
        rows = self.transition.sum(axis=2)
        if not np.allclose(rows, 1.0, atol=_PROB_TOL):
            raise ValueError("each transition[s][a] row must sum to 1")
        if abs(self.init.sum() - 1.0) > _PROB_TOL:
            raise ValueError("init distribution must sum to 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.costs is not None:
            self.costs = np.asarray(self.costs, dtype=float)
            if self.costs.shape != (n_s, n_a):
                raise ValueError("costs must be per-(state, action)")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def token(self, s: int, a: int) -> str:
        if self.token_table is None:
            return "other"
        return self.token_table[s][a]

    def tokens_for(self, states, actions):
        return tuple(self.token(s, a) for s, a in zip(states, actions))

    def trajectory_cost(self, traj: Trajectory) -> float:
        if self.costs is None:
            raise ValueError(f"MDP {self.name!r} has no cost table")
        return float(sum(self.costs[s, a] for s, a in traj.steps))

    def rollout(self, policy, rng: np.random.Generator) -> Trajectory:
        """Sample a horizon-length trajectory under a PolicyTable."""
        states, actions = [], []
        log_pi = 0.0
        s = int(rng.choice(self.n_states, p=self.init))
        for _ in range(self.horizon):
            p = policy.probs(s)
            a = int(rng.choice(self.n_actions, p=p))
            log_pi += float(np.log(p[a]))
            states.append(s)
            actions.append(a)
            s = int(rng.choice(self.n_states, p=self.transition[s, a]))
        return Trajectory(tuple(states), tuple(actions),
                          self.tokens_for(states, actions), log_pi)


def enumerate_trajectories(mdp: TabularMDP, policy=None,
                           cap: int = DEFAULT_ENUMERATION_CAP):
    """All trajectories with nonzero probability, with their probabilities.

    Without a policy the probability is the passive p(tau): the dynamics
    terms times the uniform action prior (1/n_actions per step).  With a
    PolicyTable the action prior is replaced by pi(a|s).  Either way the
    returned masses sum to 1.
    """
    if (mdp.n_states * mdp.n_actions) ** mdp.horizon > cap:
        raise EnumerationCapError(
            f"trajectory space exceeds enumeration cap {cap}"
        )
    if policy is not None:
        action_probs = policy.all_probs()
    else:
        uniform = 1.0 / mdp.n_actions
        action_probs = np.full((mdp.n_states, mdp.n_actions), uniform)

    out = []

    def expand(s, t, states, actions, prob, log_pi):
        if t == mdp.horizon:
            traj = Trajectory(tuple(states), tuple(actions),
                              mdp.tokens_for(states, actions), log_pi)
            out.append((traj, prob))
            return
        for a in range(mdp.n_actions):
            pa = action_probs[s, a]
            if pa <= 0.0:
                continue
            states.append(s)
            actions.append(a)
            if t == mdp.horizon - 1:
                # final step: successor is not part of the trajectory
                expand(-1, t + 1, states, actions, prob * pa,
                       log_pi + np.log(pa))
            else:
                for s2 in range(mdp.n_states):
                    ps = mdp.transition[s, a, s2]
                    if ps <= 0.0:
                        continue
                    expand(s2, t + 1, states, actions, prob * pa * ps,
                           log_pi + np.log(pa))
            states.pop()
            actions.pop()

    for s0 in range(mdp.n_states):
        if mdp.init[s0] > 0.0:
            expand(s0, 0, [], [], float(mdp.init[s0]), 0.0)
    return out


def save_mdp(mdp: TabularMDP, path) -> None:
    spec = {
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "transition": mdp.transition.tolist(),
        "init": mdp.init.tolist(),
        "horizon": mdp.horizon,
        "name": mdp.name,
    }
    if mdp.costs is not None:
        spec["costs"] = mdp.costs.tolist()
    if mdp.token_table is not None:
        spec["tokens"] = mdp.token_table
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec, fh, indent=2)


def load_mdp(path) -> TabularMDP:
    with open(path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    return TabularMDP(
        transition=np.asarray(spec["transition"], dtype=float),
        init=np.asarray(spec["init"], dtype=float),
        horizon=int(spec["horizon"]),
        costs=np.asarray(spec["costs"], dtype=float) if "costs" in spec else None,
        token_table=spec.get("tokens"),
        name=spec.get("name", "tabular"),
    )
