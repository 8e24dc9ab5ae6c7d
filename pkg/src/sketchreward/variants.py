"""Stochastic discriminator objectives and the safety-constrained step.

These are the appendix variants of the adversarial objective:

  * ``L_f``: the discriminator score under Gaussian reward noise
    (reparameterized), minus a closed-form per-step KL that regularizes
    f toward the program rewards,
  * ``L_soft``: L_f in expectation over the hole sampler, minus the
    KL between the sampler and a uniform box prior,
  * ``L_hard``: the noiseless discriminator score plus the pooled-batch
    Gaussian log-likelihood of f under the program rewards,
  * ``safety_train_step``: one primal step on the sampler and one
    projected dual-ascent step on the Lagrange multiplier of the safety
    requirement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import SafetySpec, two_batch_cost_ratio
from .learner import BatchCache, HoleSampler, grad_q_logtrick, j_adv_program
from .program import Program


def per_step_kl(f_vals, r_vals, sigma: float) -> float:
    """KL(p_f || p_l) for equal-variance per-step Gaussians:
    sum_t (f_t - r_t)^2 / (2 sigma^2)."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    f_vals = np.asarray(f_vals, dtype=float)
    r_vals = np.asarray(r_vals, dtype=float)
    return float(np.sum((f_vals - r_vals) ** 2) / (2.0 * sigma ** 2))


def log_p_f_given_l(f_vals, r_vals, sigma: float) -> float:
    """Gaussian log-density of the f values around the program rewards."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    f_vals = np.asarray(f_vals, dtype=float)
    r_vals = np.asarray(r_vals, dtype=float)
    n = len(f_vals)
    return float(-np.sum((f_vals - r_vals) ** 2) / (2.0 * sigma ** 2)
                 - 0.5 * n * math.log(2.0 * math.pi * sigma ** 2))


def _noised_cache(cache: BatchCache, sigma: float,
                  rng: np.random.Generator) -> BatchCache:
    noised = BatchCache(cache.residuals, list(cache.f_vals),
                        cache.log_pi, cache.steps)
    noised.f_vals = [f + sigma * rng.standard_normal(len(f))
                     for f in cache.f_vals]
    return noised


def kl_q_uniform_prior(sampler: HoleSampler, h_max: float) -> float:
    """D_KL(q || uniform on [-h_max, h_max]^n), treating the prior as
    the box density everywhere (the Gaussian tail outside the box is
    negligible for the scales used here)."""
    if h_max <= 0.0:
        raise ValueError("h_max must be positive")
    return float(-sampler.entropy() + sampler.dim * math.log(2.0 * h_max))


@dataclass
class StochasticObjectives:
    l_f: float
    j_noised: float
    kl_reg: float
    l_soft: float
    kl_prior: float
    l_hard: float
    j_noiseless: float
    log_p_f: float


def stochastic_objectives(agent: BatchCache, demos: BatchCache,
                          sampler: HoleSampler, h_samples, sigma: float,
                          rng: np.random.Generator, n_noise: int = 1,
                          h_max: float = 10.0) -> StochasticObjectives:
    """Evaluate L_f, L_soft, and L_hard on frozen batches.

    All three average over the provided hole samples; the noise enters
    through the reparameterization f + sigma * eps, redrawn ``n_noise``
    times.  The per-step KL and the f log-likelihood pool the agent and
    demo trajectories.
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if n_noise < 1:
        raise ValueError("n_noise must be >= 1")
    log_z = sampler.log_z_hat

    j_noised_acc = 0.0
    for _ in range(n_noise):
        agent_n = _noised_cache(agent, sigma, rng)
        demos_n = _noised_cache(demos, sigma, rng)
        for h in h_samples:
            j_noised_acc += j_adv_program(agent_n, demos_n, h, log_z)
    j_noised = j_noised_acc / (n_noise * len(h_samples))

    kl_acc = 0.0
    logp_acc = 0.0
    j_plain_acc = 0.0
    n_pool = len(agent.steps) + len(demos.steps)
    for h in h_samples:
        j_plain_acc += j_adv_program(agent, demos, h, log_z)
        for cache in (agent, demos):
            for f_vals, r_vals in zip(cache.f_vals, cache.rewards_for(h, log_z)):
                kl_acc += per_step_kl(f_vals, r_vals, sigma)
                logp_acc += log_p_f_given_l(f_vals, r_vals, sigma)
    kl_reg = kl_acc / (len(h_samples) * n_pool)
    log_p = logp_acc / (len(h_samples) * n_pool)
    j_noiseless = j_plain_acc / len(h_samples)

    l_f = j_noised - kl_reg
    kl_prior = kl_q_uniform_prior(sampler, h_max)
    return StochasticObjectives(
        l_f=l_f, j_noised=j_noised, kl_reg=kl_reg,
        l_soft=l_f - kl_prior, kl_prior=kl_prior,
        l_hard=j_noiseless + log_p, j_noiseless=j_noiseless, log_p_f=log_p,
    )


@dataclass
class SafetyStepResult:
    g_mean: np.ndarray
    g_log_var: np.ndarray
    lam: float
    l_hat: float  # empirical fraction of sampled programs flagged unsafe
    ratios: list


def safety_train_step(sampler: HoleSampler, spec: SafetySpec, sketch,
                      batch_i, batch_j, lam: float,
                      rng: np.random.Generator, *, k: int = 16,
                      b: float = 100.0, lr_dual: float = 0.01,
                      form: str = "substituted") -> SafetyStepResult:
    """Primal gradient on the sampler and projected dual ascent on lam.

    Each sampled assignment gets a two-batch cost ratio; ratios at or
    above d - kappa count as unsafe.  The primal value per sample is
    lam * unsafe + (-b) * relu(ratio - (d - kappa)), differentiated by
    the score-function trick.  The dual step moves lam along the
    constraint value and projects back to lam <= 0.  ``form`` selects
    the constraint expression: "substituted" uses 1 - l_hat - alpha
    with l_hat the unsafe fraction (as printed in the source), "direct"
    uses l_hat - alpha.
    """
    if lam > 0.0:
        raise ValueError("lagrange multiplier must be <= 0")
    if form not in ("substituted", "direct"):
        raise ValueError("form must be 'substituted' or 'direct'")
    if k < 2:
        raise ValueError("safety step needs k >= 2 samples")
    h_samples = sampler.sample(k, rng)
    ratios = [two_batch_cost_ratio(batch_i, batch_j,
                                   Program(sketch, tuple(h)), spec)
              for h in h_samples]
    threshold = spec.d - spec.kappa
    unsafe = np.array([1.0 if r >= threshold else 0.0 for r in ratios])
    l_con = np.array([max(r - threshold, 0.0) for r in ratios])
    l_hat = float(unsafe.mean())

    values = lam * unsafe - b * l_con
    g_mean, g_log_var = grad_q_logtrick(sampler, h_samples, values)

    g = (1.0 - l_hat - spec.alpha_conf if form == "substituted"
         else l_hat - spec.alpha_conf)
    new_lam = min(0.0, lam + lr_dual * g)
    return SafetyStepResult(g_mean, g_log_var, new_lam, l_hat, ratios)
