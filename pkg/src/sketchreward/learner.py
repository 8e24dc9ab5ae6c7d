"""Adversarial hole learning from demonstrations.

The training loop alternates three updates, following the
generative-adversarial search for the most likely hole assignment:

  * the agent policy improves against rewards from the current most
    likely program (the sampler mean),
  * the per-state reward model improves its ability to tell demo steps
    from agent steps (adversarial objective, analytic gradients),
  * the Gaussian hole sampler improves the generative objective via the
    score-function (log) trick with a leave-one-out baseline, plus the
    analytic constraint gradient evaluated at its mean.

Program rewards enter every objective through residual programs: each
trajectory is partially evaluated against the sketch once, and each
sampled assignment is then applied to the cached residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .constraints import (
    conjunction_atoms,
    grad_soft_penalty,
    is_satisfied,
    soft_penalty,
)
from .dsl import holes_of, partial_eval
from .envs.gridworld import DoorKeyEnv
from .policy import PolicyTable
from .program import Program

LOG_2PI_E = math.log(2.0 * math.pi) + 1.0


# --------------------------------------------------------------------------
# hole sampler


@dataclass
class HoleSampler:
    """Diagonal Gaussian over hole assignments plus a learned log
    normalizer for the program rewards."""

    mean: np.ndarray
    log_var: np.ndarray
    log_z_hat: float = 0.0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).copy()
        self.log_var = np.asarray(self.log_var, dtype=float).copy()
        if self.mean.shape != self.log_var.shape:
            raise ValueError("mean and log_var must have equal length")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.log_var))):
            raise ValueError("sampler parameters must be finite")

    @classmethod
    def for_sketch(cls, sketch) -> "HoleSampler":
        n = len(holes_of(sketch))
        return cls(np.zeros(n), np.zeros(n), 0.0)

    @property
    def dim(self) -> int:
        return len(self.mean)

    def copy(self) -> "HoleSampler":
        return HoleSampler(self.mean, self.log_var, self.log_z_hat)

    def std(self) -> np.ndarray:
        return np.exp(0.5 * self.log_var)

    def sample(self, k: int, rng: np.random.Generator) -> np.ndarray:
        eps = rng.standard_normal((k, self.dim))
        return self.mean + self.std() * eps

    def log_q(self, h) -> float:
        h = np.asarray(h, dtype=float)
        var = np.exp(self.log_var)
        return float(-0.5 * np.sum((h - self.mean) ** 2 / var
                                   + self.log_var + math.log(2.0 * math.pi)))

    def grad_log_q(self, h):
        """(d/d mean, d/d log_var) of log q(h)."""
        h = np.asarray(h, dtype=float)
        var = np.exp(self.log_var)
        diff = h - self.mean
        return diff / var, 0.5 * (diff ** 2 / var - 1.0)

    def entropy(self) -> float:
        return float(0.5 * np.sum(self.log_var + LOG_2PI_E))


def most_likely_program(sampler: HoleSampler, sketch) -> Program:
    """The sampler's mode: for a diagonal Gaussian, its mean."""
    n = len(holes_of(sketch))
    if sampler.dim != n:
        raise ValueError(f"sampler has {sampler.dim} dims, sketch has {n} holes")
    return Program(sketch, tuple(float(x) for x in sampler.mean))


# --------------------------------------------------------------------------
# reward model


class RewardModel:
    """Per-state score table; the reward f(s, a) is the log-softmax of the
    state's scores at the taken action, so exp(f(s, .)) is a proper
    action likelihood."""

    def __init__(self, n_states: int, n_actions: int,
                 scores: np.ndarray | None = None):
        self.n_states = n_states
        self.n_actions = n_actions
        if scores is None:
            scores = np.zeros((n_states, n_actions))
        self.scores = np.asarray(scores, dtype=float).copy()
        if self.scores.shape != (n_states, n_actions):
            raise ValueError("scores shape mismatch")

    def copy(self) -> "RewardModel":
        return RewardModel(self.n_states, self.n_actions, self.scores)

    def log_softmax_row(self, s: int) -> np.ndarray:
        row = self.scores[s]
        z = row - row.max()
        return z - math.log(np.exp(z).sum())

    def f(self, s: int, a: int) -> float:
        return float(self.log_softmax_row(s)[a])

    def f_values(self, tau) -> np.ndarray:
        return np.array([self.f(s, a) for s, a in tau.steps])

    def apply_f_grad(self, g_f: dict, scale: float = 1.0) -> np.ndarray:
        """Backprop a dict {(s, a): dJ/df(s,a)} through the log-softmax;
        returns the gradient on the score table."""
        grad = np.zeros_like(self.scores)
        per_state: dict[int, np.ndarray] = {}
        for (s, a), val in g_f.items():
            row = per_state.setdefault(s, np.zeros(self.n_actions))
            row[a] += val
        for s, row in per_state.items():
            p = np.exp(self.log_softmax_row(s))
            grad[s] = row - p * row.sum()
        return grad * scale


# --------------------------------------------------------------------------
# discriminator confidences


def log_confidence_agent(f_vals, r_vals) -> float:
    """log p(agent-label | tau) = sum_t [f_t - logaddexp(f_t, r_t)]."""
    f_vals = np.asarray(f_vals, dtype=float)
    r_vals = np.asarray(r_vals, dtype=float)
    return float(np.sum(f_vals - np.logaddexp(f_vals, r_vals)))


def log_confidence_expert(f_vals, r_vals) -> float:
    """log p(expert-label | tau) = sum_t [r_t - logaddexp(f_t, r_t)]."""
    f_vals = np.asarray(f_vals, dtype=float)
    r_vals = np.asarray(r_vals, dtype=float)
    return float(np.sum(r_vals - np.logaddexp(f_vals, r_vals)))


@dataclass
class BatchCache:
    """Per-batch quantities that do not depend on the sampled assignment."""

    residuals: list  # ResidualProgram per trajectory
    f_vals: list  # np.ndarray per trajectory
    log_pi: np.ndarray  # per trajectory
    steps: list  # [(s, a), ...] per trajectory

    @classmethod
    def build(cls, sketch, batch, model: RewardModel) -> "BatchCache":
        return cls(
            residuals=[partial_eval(sketch, tau.tokens) for tau in batch],
            f_vals=[model.f_values(tau) for tau in batch],
            log_pi=np.array([tau.log_pi for tau in batch]),
            steps=[tau.steps for tau in batch],
        )

    def refresh_f(self, model: RewardModel) -> None:
        self.f_vals = [np.array([model.f(s, a) for s, a in st])
                       for st in self.steps]

    def rewards_for(self, h, log_z: float) -> list[np.ndarray]:
        return [np.asarray(res.apply(h)) - log_z for res in self.residuals]


def _snis_weights(rewards, log_pi) -> np.ndarray:
    logw = np.array([r.sum() for r in rewards]) - log_pi
    w = np.exp(logw - logw.max())
    return w / w.sum()


def j_gen_program(agent: BatchCache, demos: BatchCache, h, log_z: float) -> float:
    """Generative objective of one candidate assignment: SNIS-weighted
    agent fool-rate plus the mean demo fool-rate."""
    r_agent = agent.rewards_for(h, log_z)
    r_demo = demos.rewards_for(h, log_z)
    w = _snis_weights(r_agent, agent.log_pi)
    agent_term = float(np.dot(w, [log_confidence_agent(f, r)
                                  for f, r in zip(agent.f_vals, r_agent)]))
    demo_term = float(np.mean([log_confidence_expert(f, r)
                               for f, r in zip(demos.f_vals, r_demo)]))
    return agent_term + demo_term


def j_gen(agent: BatchCache, demos: BatchCache, h_samples, log_z: float):
    """Mean generative objective over sampled assignments; also returns
    the per-sample values for the score-function gradient."""
    values = np.array([j_gen_program(agent, demos, h, log_z) for h in h_samples])
    return float(values.mean()), values


def j_adv_program(agent: BatchCache, demos: BatchCache, h, log_z: float,
                  want_grad: bool = False):
    """Adversarial objective (labels flipped): the reward model tries to
    claim demo steps and reject agent steps.  Optionally returns the
    analytic gradient accumulated per (state, action)."""
    r_agent = agent.rewards_for(h, log_z)
    r_demo = demos.rewards_for(h, log_z)
    w = _snis_weights(r_agent, agent.log_pi)
    agent_term = float(np.dot(w, [log_confidence_expert(f, r)
                                  for f, r in zip(agent.f_vals, r_agent)]))
    demo_term = float(np.mean([log_confidence_agent(f, r)
                               for f, r in zip(demos.f_vals, r_demo)]))
    value = agent_term + demo_term
    if not want_grad:
        return value
    g_f: dict[tuple, float] = {}
    for wi, f_vals, r_vals, steps in zip(w, agent.f_vals, r_agent, agent.steps):
        sig = 1.0 / (1.0 + np.exp(-(f_vals - r_vals)))
        for (s, a), s_t in zip(steps, sig):
            g_f[(s, a)] = g_f.get((s, a), 0.0) - wi * s_t
    n_demo = len(demos.steps)
    for f_vals, r_vals, steps in zip(demos.f_vals, r_demo, demos.steps):
        sig = 1.0 / (1.0 + np.exp(-(f_vals - r_vals)))
        for (s, a), s_t in zip(steps, sig):
            g_f[(s, a)] = g_f.get((s, a), 0.0) + (1.0 - s_t) / n_demo
    return value, g_f


def grad_q_logtrick(sampler: HoleSampler, h_samples, values):
    """Score-function gradient estimate of d E_q[value] / d (mean,
    log_var), with a leave-one-out baseline per sample."""
    values = np.asarray(values, dtype=float)
    k = len(values)
    if k < 2:
        raise ValueError("log-trick gradient needs at least 2 samples")
    total = values.sum()
    baselines = (total - values) / (k - 1)
    g_mean = np.zeros(sampler.dim)
    g_logvar = np.zeros(sampler.dim)
    for h, v, b in zip(h_samples, values, baselines):
        dm, dv = sampler.grad_log_q(h)
        g_mean += (v - b) * dm
        g_logvar += (v - b) * dv
    return g_mean / k, g_logvar / k


def elbo_terms(sampler: HoleSampler, constraint, agent: BatchCache,
               demos: BatchCache, h_samples, eta: float):
    """(entropy, constraint term, generative term, total).

    The constraint term is -eta times the soft penalty at the sampler
    mean, so it sits at a large negative constant when feasible (the
    penalty floor) and dominates when infeasible.
    """
    h_term = sampler.entropy()
    j_c = -eta * soft_penalty(constraint, sampler.mean)
    j_g, values = j_gen(agent, demos, h_samples, sampler.log_z_hat)
    total = h_term + j_c + j_g
    for name, val in (("entropy", h_term), ("J_c", j_c), ("J_gen", j_g)):
        if not math.isfinite(val):
            raise FloatingPointError(f"non-finite ELBO term {name}: {val}")
    return h_term, j_c, j_g, total, values


# --------------------------------------------------------------------------
# policy update


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def gae_advantages(rewards, state_values, gamma: float, lam: float) -> np.ndarray:
    """Generalized advantage estimates for one trajectory; episodes are
    treated as terminal at their last step (bootstrap value 0)."""
    rewards = np.asarray(rewards, dtype=float)
    vs = np.asarray(state_values, dtype=float)
    v_next = np.append(vs[1:], 0.0)
    delta = rewards + gamma * v_next - vs
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = delta[t] + gamma * lam * acc
        out[t] = acc
    return out


def ppo_update(policy: PolicyTable, value_table: np.ndarray, batch,
               reward_lists, *, discount_gamma: float = 0.99,
               gae_lambda: float = 0.95, ppo_clip: float = 0.2,
               epochs: int = 6, lr: float = 0.5, lr_v: float = 0.02,
               ent_coef: float = 0.01):
    """Clipped-ratio policy optimization on one rollout batch.

    Advantages come from a tabular state-value critic via generalized
    advantage estimation and are normalized batch-wide; the actor takes
    several epochs of clipped-surrogate ascent on the frozen batch while
    the critic tracks the lambda-returns.  Returns a new policy and a
    new value table.
    """
    if len(batch) != len(reward_lists):
        raise ValueError("one reward list per trajectory required")
    mix = 1.0 - policy.n_actions * policy.eps_floor
    advs, targets, old_pi = [], [], []
    for tau, r in zip(batch, reward_lists):
        vs = np.array([value_table[s] for s in tau.states])
        a = gae_advantages(r, vs, discount_gamma, gae_lambda)
        advs.append(a)
        targets.append(a + vs)
        old_pi.append(np.array([
            (mix * policy.softmax(s) + policy.eps_floor)[act]
            for s, act in tau.steps
        ]))
    flat = np.concatenate(advs) if advs else np.zeros(0)
    scale = float(flat.std()) if flat.size else 0.0
    scale = scale if scale > 1e-8 else 1.0
    advs = [a / scale for a in advs]

    new_values = value_table.copy()
    for tau, tg in zip(batch, targets):
        for s, target in zip(tau.states, tg):
            new_values[s] += lr_v * (target - new_values[s])

    new = policy.copy()
    for _ in range(epochs):
        grad = np.zeros_like(new.logits)
        visited = set()
        for tau, a, op in zip(batch, advs, old_pi):
            for (s, act), adv, opi in zip(tau.steps, a, op):
                p = new.softmax(s)
                pi = mix * p + new.eps_floor
                ratio = pi[act] / opi
                # outside the trust region the clipped surrogate is flat
                if ((ratio > 1.0 + ppo_clip and adv > 0)
                        or (ratio < 1.0 - ppo_clip and adv < 0)):
                    continue
                dlogits = mix * p[act] * (-p)
                dlogits[act] += mix * p[act]
                grad[s] += adv * dlogits / opi
                visited.add(s)
        grad /= max(len(batch), 1)
        for s in visited:
            p = new.softmax(s)
            logp = np.log(np.clip(p, 1e-300, None))
            ent = -float(np.dot(p, logp))
            grad[s] += ent_coef * (-p * (logp + ent))
        new.logits += lr * grad
    return new, new_values


def policy_update(policy: PolicyTable, batch, reward_lists, *,
                  discount_gamma: float = 0.99, lr: float = 0.5,
                  ent_coef: float = 0.01) -> PolicyTable:
    """One entropy-regularized policy-gradient step on discounted
    returns.  Returns a new PolicyTable; the floor mixture is preserved
    by construction."""
    if len(batch) != len(reward_lists):
        raise ValueError("one reward list per trajectory required")
    all_returns = [discounted_returns(r, discount_gamma) for r in reward_lists]
    flat = np.concatenate(all_returns) if all_returns else np.zeros(0)
    base = float(flat.mean()) if flat.size else 0.0
    scale = float(flat.std())
    scale = scale if scale > 1e-8 else 1.0

    grad = np.zeros_like(policy.logits)
    mix = 1.0 - policy.n_actions * policy.eps_floor
    visited = set()
    for tau, returns in zip(batch, all_returns):
        for (s, a), g in zip(tau.steps, returns):
            p = policy.softmax(s)
            pi = mix * p + policy.eps_floor
            adv = (g - base) / scale
            dlogpi = mix * p[a] * (-p)
            dlogpi[a] += mix * p[a]
            grad[s] += adv * dlogpi / pi[a]
            visited.add(s)
    grad /= max(len(batch), 1)
    for s in visited:
        p = policy.softmax(s)
        logp = np.log(np.clip(p, 1e-300, None))
        ent = -float(np.dot(p, logp))
        grad[s] += ent_coef * (-p * (logp + ent))

    new = policy.copy()
    new.logits += lr * grad
    return new


# --------------------------------------------------------------------------
# training loop


@dataclass
class SafetyConfig:
    d: float = 1.0
    kappa: float = 0.5
    alpha_conf: float = 0.9
    B: float = 100.0


@dataclass
class TrainConfig:
    mode: str = "standard"  # standard | soft | hard | safety
    n_iters: int = 200
    m_rollouts: int = 8
    k_programs: int = 16
    alpha: float = 0.001  # reward-model step size
    beta: float = 0.0003  # sampler step size
    eta: float = 1e8  # constraint weight
    sigma: float = 1.0  # reward noise scale (stochastic variants)
    discount_gamma: float = 0.99
    eps_floor: float | None = None
    h_max: float = 10.0  # hole box half-width (uniform prior support)
    seed: int = 0
    lr_pi: float = 0.5
    lr_v: float = 0.02  # critic step size (slow, so early shaping noise
    # cannot poison the value table before the actor adapts)
    ent_coef: float = 0.01
    ppo_epochs: int = 6  # actor epochs per rollout batch
    q_updates: int = 4  # sampler/model updates per environment batch
    max_q_step: float = 0.05  # trust-region clip on each sampler step
    eval_every: int = 10
    eval_episodes: int = 100
    frames_cap: int | None = None
    restart_frames: int = 60_000  # reset actor/critic after this many
    # frames without rollout successes; 0 disables restarts
    gae_lambda: float = 0.95
    ppo_clip: float = 0.2
    safety: SafetyConfig = field(default_factory=SafetyConfig)

    def get_params(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            out[f.name] = replace(val) if f.name == "safety" else val
        return out


_CONFIG_ALIASES = {"N": "n_iters", "m": "m_rollouts", "K": "k_programs"}
_CONFIG_INT_FIELDS = {"n_iters", "m_rollouts", "k_programs", "seed",
                      "q_updates", "eval_every", "eval_episodes",
                      "frames_cap", "ppo_epochs", "restart_frames"}


def parse_train_config(text: str) -> TrainConfig:
    """Key-value config: ``K = 16``, ``mode = standard``,
    ``safety.d = 1.0``; '#' starts a comment."""
    kwargs = {}
    safety_kwargs = {}
    valid = {f.name for f in fields(TrainConfig)} - {"safety"}
    safety_valid = {f.name for f in fields(SafetyConfig)}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {i}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = _CONFIG_ALIASES.get(key, key)
        if key.startswith("safety."):
            sub = key[len("safety."):]
            if sub not in safety_valid:
                raise ValueError(f"config line {i}: unknown safety key {sub!r}")
            safety_kwargs[sub] = float(value)
        elif key == "mode":
            if value not in ("standard", "soft", "hard", "safety"):
                raise ValueError(f"config line {i}: unknown mode {value!r}")
            kwargs[key] = value
        elif key in valid:
            if key in _CONFIG_INT_FIELDS:
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        else:
            raise ValueError(f"config line {i}: unknown config key {key!r}")
    if safety_kwargs:
        kwargs["safety"] = SafetyConfig(**safety_kwargs)
    cfg = TrainConfig(**kwargs)
    if cfg.k_programs < 1 or cfg.m_rollouts < 1:
        raise ValueError("K and m must be >= 1")
    if cfg.alpha <= 0.0 or cfg.beta <= 0.0:
        raise ValueError("step sizes must be positive")
    return cfg


def load_train_config(path) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_train_config(fh.read())


@dataclass
class IterationMetrics:
    iteration: int
    frames: int
    elbo: float
    entropy: float
    j_c: float
    j_gen: float
    j_adv: float
    constraint_margin: float
    eval_success: float  # fraction; nan between evaluation points

    FIELDS = ("iter", "elbo", "H", "J_c", "J_gen", "j_adv",
              "constraint_margin", "eval_success", "frames")

    def row(self):
        return (self.iteration, self.elbo, self.entropy, self.j_c,
                self.j_gen, self.j_adv, self.constraint_margin,
                self.eval_success, self.frames)


@dataclass
class TrainResult:
    program: Program
    policy: PolicyTable
    sampler: HoleSampler
    model: RewardModel
    metrics: list
    frames: int


def _clip_step(step: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(step))
    if norm > max_norm > 0.0:
        return step * (max_norm / norm)
    return step


def constraint_margin(constraint, h) -> float:
    """max_i u_i(h); <= 0 iff the conjunction is satisfied."""
    atoms = conjunction_atoms(constraint)
    if not atoms:
        return 0.0
    return max(a.u(h) for a in atoms)


def eval_success_rate(env: DoorKeyEnv, policy: PolicyTable,
                      n_episodes: int) -> float:
    wins = 0
    rng = np.random.default_rng(0)  # fixed stream keeps evaluation reproducible
    for _ in range(n_episodes):
        tau = env.rollout(policy, rng, greedy=True)
        wins += tau.tokens[-1] == "reach_goal"
    return wins / n_episodes


def train(config: TrainConfig, sketch, constraint, demos, env: DoorKeyEnv):
    """Run the full adversarial hole search on a DoorKey environment."""
    if len(demos.trajectories) == 0:
        raise ValueError("at least one demonstration is required")
    rng = np.random.default_rng(config.seed)
    sampler = HoleSampler.for_sketch(sketch)
    policy = PolicyTable(env.n_states, env.n_actions, eps_floor=config.eps_floor)
    value_table = np.zeros(env.n_states)
    model = RewardModel(env.n_states, env.n_actions)
    demo_cache = BatchCache.build(sketch, demos.trajectories, model)

    metrics: list[IterationMetrics] = []
    frames = 0
    frames_since_restart = 0
    recent_success: list[float] = []
    success = float("nan")
    for it in range(config.n_iters):
        if config.frames_cap is not None and frames >= config.frames_cap:
            break
        batch = [env.rollout(policy, rng) for _ in range(config.m_rollouts)]
        n_frames = sum(len(tau) for tau in batch)
        frames += n_frames
        frames_since_restart += n_frames
        recent_success.append(float(np.mean(
            [tau.tokens[-1] == "reach_goal" for tau in batch])))
        recent_success = recent_success[-10:]

        star = most_likely_program(sampler, sketch)
        reward_lists = [np.asarray(partial_eval(sketch, tau.tokens)
                                   .apply(star.assignment))
                        for tau in batch]
        policy, value_table = ppo_update(
            policy, value_table, batch, reward_lists,
            discount_gamma=config.discount_gamma,
            gae_lambda=config.gae_lambda, ppo_clip=config.ppo_clip,
            epochs=config.ppo_epochs, lr=config.lr_pi, lr_v=config.lr_v,
            ent_coef=config.ent_coef,
        )
        if (config.restart_frames
                and frames_since_restart >= config.restart_frames
                and float(np.mean(recent_success)) < 0.2):
            # actor is stuck in a shaping trap; restart its exploration
            # while keeping everything learned about the holes
            policy = PolicyTable(env.n_states, env.n_actions,
                                 eps_floor=config.eps_floor)
            value_table = np.zeros(env.n_states)
            frames_since_restart = 0
            recent_success = []

        agent_cache = BatchCache.build(sketch, batch, model)
        h_term = j_c = j_g = j_a = float("nan")
        for _ in range(config.q_updates):
            agent_cache.refresh_f(model)
            demo_cache.refresh_f(model)
            h_samples = sampler.sample(config.k_programs, rng)

            # reward-model ascent on the adversarial objective
            g_f_total: dict[tuple, float] = {}
            j_a_acc = 0.0
            for h in h_samples:
                val, g_f = j_adv_program(agent_cache, demo_cache, h,
                                         sampler.log_z_hat, want_grad=True)
                j_a_acc += val
                for key, v in g_f.items():
                    g_f_total[key] = g_f_total.get(key, 0.0) + v
            j_a = j_a_acc / len(h_samples)
            model.scores += config.alpha * model.apply_f_grad(
                g_f_total, scale=1.0 / len(h_samples))

            # sampler ascent on the ELBO
            h_term, j_c, j_g, _, values = elbo_terms(
                sampler, constraint, agent_cache, demo_cache,
                h_samples, config.eta)
            g_mean, g_logvar = grad_q_logtrick(sampler, h_samples, values)
            pen_grad = grad_soft_penalty(constraint, sampler.mean)
            sampler.mean += _clip_step(config.beta * g_mean, config.max_q_step)
            sampler.mean += _clip_step(-config.beta * config.eta * pen_grad,
                                       config.max_q_step)
            sampler.log_var += _clip_step(config.beta * g_logvar,
                                          config.max_q_step)
            step = 1e-4
            up = j_gen(agent_cache, demo_cache, h_samples,
                       sampler.log_z_hat + step)[0]
            down = j_gen(agent_cache, demo_cache, h_samples,
                         sampler.log_z_hat - step)[0]
            g_z = (up - down) / (2.0 * step)
            sampler.log_z_hat += float(np.clip(config.beta * g_z,
                                               -config.max_q_step,
                                               config.max_q_step))

        if config.eval_every and (it + 1) % config.eval_every == 0:
            success = eval_success_rate(env, policy, config.eval_episodes)
        metrics.append(IterationMetrics(
            iteration=it, frames=frames,
            elbo=h_term + j_c + j_g, entropy=h_term, j_c=j_c, j_gen=j_g,
            j_adv=j_a,
            constraint_margin=constraint_margin(constraint, sampler.mean),
            eval_success=success,
        ))

    return TrainResult(
        program=most_likely_program(sampler, sketch),
        policy=policy, sampler=sampler, model=model,
        metrics=metrics, frames=frames,
    )


class PrdbeLearner:
    """Estimator-style wrapper: configure once, fit on demonstrations."""

    def __init__(self, sketch, constraint, config: TrainConfig | None = None):
        self.sketch = sketch
        self.constraint = constraint
        self.config = config or TrainConfig()

    def get_params(self) -> dict:
        return {"sketch": self.sketch, "constraint": self.constraint,
                "config": self.config}

    def set_params(self, **params) -> "PrdbeLearner":
        for key, val in params.items():
            if key not in ("sketch", "constraint", "config"):
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, val)
        return self

    def fit(self, demos, env) -> "PrdbeLearner":
        result = train(self.config, self.sketch, self.constraint, demos, env)
        self.program_ = result.program
        self.policy_ = result.policy
        self.sampler_ = result.sampler
        self.model_ = result.model
        self.metrics_ = result.metrics
        self.frames_ = result.frames
        return self

    def predict_rewards(self, tau) -> list[float]:
        return self.program_.per_step(tau)

    def satisfies_constraint(self) -> bool:
        return is_satisfied(self.constraint, self.program_.assignment)
