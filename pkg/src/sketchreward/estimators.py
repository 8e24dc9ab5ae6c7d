"""Partition functions, importance-sampling estimators, and their bounds.

A program ``l`` induces a nominal trajectory distribution
``p(tau | l) = p(tau) exp(l(tau)) / Z_l`` over the passive dynamics.  On
enumerable MDPs the partition function ``Z_l`` and any nominal
expectation have exact brute-force values; sampled batches feed the
self-normalized and two-batch estimators.  All weight arithmetic runs in
the log domain (log-sum-exp), which keeps everything finite for
``|l(tau)| <= 700``.

Naming note: ``hoeffding_gamma`` is the Hoeffding slack of the interval
bound, unrelated to the RL discount factor (``discount_gamma``
elsewhere).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .envs.tabular import TabularMDP, enumerate_trajectories

_Q_TOL = 1e-9


@dataclass
class EstimateReport:
    estimate: float
    m: int
    exact: float | None = None
    interval: tuple | None = None
    confidence: float | None = None

    def __post_init__(self):
        if self.interval is not None and self.interval[0] > self.interval[1]:
            raise ValueError("interval must be ordered (lo, hi)")

    @property
    def abs_err(self) -> float | None:
        if self.exact is None:
            return None
        return abs(self.estimate - self.exact)


@dataclass
class SafetySpec:
    """Trajectory costs and the safety requirement around them.

    ``costs[s][a]`` accumulates to the trajectory cost c(tau); a nominal
    distribution is safe when its expected cost is at most ``d``.
    ``kappa`` is the empirical slack, ``c_bar`` any upper bound on the
    per-trajectory cost, ``alpha_conf`` the target probability of
    sampling a safe program, and ``lam`` the (nonpositive) Lagrange
    multiplier.
    """

    costs: np.ndarray
    d: float
    kappa: float
    c_bar: float
    alpha_conf: float = 0.9
    lam: float = 0.0

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=float)
        if not 0.0 < self.kappa < self.d:
            raise ValueError("kappa must lie in (0, d)")
        if not 0.0 <= self.alpha_conf <= 1.0:
            raise ValueError("alpha_conf must lie in [0, 1]")
        if self.lam > 0.0:
            raise ValueError("lagrange multiplier must be <= 0")

    def cost(self, tau) -> float:
        return float(sum(self.costs[s, a] for s, a in tau.steps))


def _total_fn(program):
    return program.total if hasattr(program, "total") else program


def exact_zl(mdp: TabularMDP, program, cap=None) -> float:
    """Brute-force partition function Z_l = sum_tau p(tau) exp(l(tau))."""
    total = _total_fn(program)
    kwargs = {} if cap is None else {"cap": cap}
    terms = [math.log(p) + total(tau)
             for tau, p in enumerate_trajectories(mdp, **kwargs)]
    m = max(terms)
    return float(math.exp(m) * sum(math.exp(t - m) for t in terms))


def exact_expectation(mdp: TabularMDP, program, integrand, cap=None) -> float:
    """E_{tau ~ p(tau|l)}[v(tau)] by exhaustive enumeration."""
    total = _total_fn(program)
    kwargs = {} if cap is None else {"cap": cap}
    pairs = enumerate_trajectories(mdp, **kwargs)
    logw = np.array([math.log(p) + total(tau) for tau, p in pairs])
    v = np.array([integrand(tau) for tau, _ in pairs])
    w = np.exp(logw - logw.max())
    return float(np.dot(w, v) / w.sum())


def _log_weights(batch, total, n_actions=None):
    """Log importance weights l(tau) - log pi(tau), optionally including
    the uniform action-prior term of the passive p(tau).

    The prior term (-len(tau) * log n_actions per trajectory) is a
    constant on fixed-horizon batches and cancels in every normalized
    ratio, but the *unnormalized* numerator/denominator are unbiased for
    Z_l * J and Z_l only when it is present.
    """
    prior = 0.0 if n_actions is None else -math.log(n_actions)
    return np.array([total(tau) + len(tau) * prior - tau.log_pi
                     for tau in batch])


def snis_expectation(batch, program, integrand, exact=None,
                     n_actions=None) -> EstimateReport:
    """Self-normalized importance sampling with weights exp(l(tau))/pi(tau)."""
    if not batch:
        raise ValueError("empty batch")
    total = _total_fn(program)
    logw = _log_weights(batch, total, n_actions)
    v = np.array([integrand(tau) for tau in batch])
    w = np.exp(logw - logw.max())
    est = float(np.dot(w, v) / w.sum())
    return EstimateReport(est, m=len(batch), exact=exact)


def two_batch_estimate(batch_i, batch_j, program, integrand,
                       exact=None, n_actions=None) -> EstimateReport:
    """Numerator from batch_i (weights times integrand), denominator from
    batch_j (weights only); the two batches must be independent and of
    equal size."""
    if not batch_i or not batch_j:
        raise ValueError("empty batch")
    if len(batch_i) != len(batch_j):
        raise ValueError("the two batches must have equal size")
    total = _total_fn(program)
    logw_i = _log_weights(batch_i, total, n_actions)
    logw_j = _log_weights(batch_j, total, n_actions)
    v = np.array([integrand(tau) for tau in batch_i])
    shift = max(logw_i.max(), logw_j.max())
    num = float(np.dot(np.exp(logw_i - shift), v))
    den = float(np.exp(logw_j - shift).sum())
    return EstimateReport(num / den, m=len(batch_i), exact=exact)


def theorem1_confidence(m: int, hoeffding_gamma: float, v_bar: float,
                        pi_floor: float, l_max: float) -> float:
    """Lower bound on the probability that the two-batch estimate lands in
    the Hoeffding interval."""
    if hoeffding_gamma <= 0.0:
        raise ValueError("hoeffding_gamma must be positive")
    exponent = (-2.0 * m * hoeffding_gamma ** 2 * pi_floor ** 2
                / (v_bar ** 2 * math.exp(2.0 * l_max)))
    conf = (1.0 - math.exp(exponent)) ** 4
    return min(max(conf, 0.0), 1.0)


def theorem1_interval(m: int, hoeffding_gamma: float, j_exact: float,
                      z: float, v_bar: float, pi_floor: float,
                      l_max: float) -> EstimateReport:
    """Interval that contains the two-batch estimate of J with probability
    at least the returned confidence.

    ``z`` is the partition function and ``j_exact`` the nominal
    expectation (exact on enumerable MDPs); ``l_max`` must upper-bound
    max_tau l(tau).  When the lower denominator ``z - gamma/v_bar`` is
    nonpositive the upper end degenerates to +inf.
    """
    conf = theorem1_confidence(m, hoeffding_gamma, v_bar, pi_floor, l_max)
    lo = (z * j_exact - hoeffding_gamma) / (z + hoeffding_gamma / v_bar)
    den_hi = z - hoeffding_gamma / v_bar
    hi = math.inf if den_hi <= 0.0 else (z * j_exact + hoeffding_gamma) / den_hi
    return EstimateReport(j_exact, m=m, exact=j_exact, interval=(lo, hi),
                          confidence=conf)


def exact_safety_lc(mdp: TabularMDP, programs, q_weights,
                    spec: SafetySpec) -> float:
    """Probability, under a discrete program distribution, of drawing a
    program whose nominal expected cost stays within the threshold."""
    q = np.asarray(q_weights, dtype=float)
    if len(q) != len(programs):
        raise ValueError("q_weights must match the program list")
    if abs(q.sum() - 1.0) > _Q_TOL:
        raise ValueError("q_weights must sum to 1")
    value = 0.0
    for prog, qk in zip(programs, q):
        if qk == 0.0:
            continue
        j_cost = exact_expectation(mdp, prog, spec.cost)
        if j_cost <= spec.d:
            value += qk
    return float(value)


def two_batch_cost_ratio(batch_i, batch_j, program, spec: SafetySpec,
                         n_actions=None) -> float:
    return two_batch_estimate(batch_i, batch_j, program, spec.cost,
                              n_actions=n_actions).estimate


def empirical_safety_lhat(batch_i, batch_j, program_samples,
                          spec: SafetySpec, weights=None) -> float:
    """Fraction of sampled programs flagged unsafe by the two-batch cost
    ratio test (ratio >= d - kappa counts as unsafe; ties included)."""
    if not program_samples:
        raise ValueError("no program samples")
    if weights is None:
        weights = np.full(len(program_samples), 1.0 / len(program_samples))
    else:
        weights = np.asarray(weights, dtype=float)
        if abs(weights.sum() - 1.0) > _Q_TOL:
            raise ValueError("weights must sum to 1")
    value = 0.0
    for prog, wk in zip(program_samples, weights):
        ratio = two_batch_cost_ratio(batch_i, batch_j, prog, spec)
        if ratio >= spec.d - spec.kappa:
            value += wk
    return float(value)


def proposition1_delta_hat(m: int, spec: SafetySpec, pi_floor: float,
                           l_c: float) -> float:
    inner = math.exp(-2.0 * m * spec.kappa ** 2 * pi_floor ** 2
                     / (spec.c_bar + spec.d - spec.kappa) ** 2)
    return (1.0 - l_c) * (1.0 - (1.0 - inner) ** 2)


def proposition1_bound(m: int, spec: SafetySpec, pi_floor: float,
                       l_c: float, delta: float) -> float:
    """exp(-2 (delta + delta_hat)^2), clamped to [0, 1].

    The source result is flagged as unverified; this artifact reports the
    printed value and validates it empirically rather than trusting it.
    """
    if delta < 0.0:
        raise ValueError("delta must be >= 0")
    if not 0.0 <= l_c <= 1.0:
        raise ValueError("l_c must lie in [0, 1]")
    d_hat = proposition1_delta_hat(m, spec, pi_floor, l_c)
    return min(max(math.exp(-2.0 * (delta + d_hat) ** 2), 0.0), 1.0)


class TrajectoryTable:
    """Enumerated trajectory space of (mdp, policy) with cached program
    values, for fast replicated sampling studies.

    Sampling m trajectories i.i.d. from the policy is equivalent to a
    multinomial draw over the enumerated support, which turns large
    replication sweeps into cheap vector arithmetic.
    """

    def __init__(self, mdp: TabularMDP, policy, program, integrand=None,
                 spec: SafetySpec | None = None):
        total = _total_fn(program)
        pairs = enumerate_trajectories(mdp, policy)
        self.trajectories = [tau for tau, _ in pairs]
        self.probs = np.array([p for _, p in pairs])
        self.probs = self.probs / self.probs.sum()
        self.logw = _log_weights(self.trajectories, total, mdp.n_actions)
        self.v = (np.array([integrand(tau) for tau in self.trajectories])
                  if integrand is not None else None)
        self.cost = (np.array([spec.cost(tau) for tau in self.trajectories])
                     if spec is not None else None)

    def sample_counts(self, m: int, rng: np.random.Generator) -> np.ndarray:
        return rng.multinomial(m, self.probs)

    def snis_from_counts(self, counts) -> float:
        w = counts * np.exp(self.logw - self.logw.max())
        return float(np.dot(w, self.v) / w.sum())

    def two_batch_from_counts(self, counts_i, counts_j, values=None) -> float:
        if values is None:
            values = self.v
        w_i = counts_i * np.exp(self.logw - self.logw.max())
        w_j = counts_j * np.exp(self.logw - self.logw.max())
        return float(np.dot(w_i, values) / w_j.sum())

    def two_batch_sums(self, counts_i, counts_j, m: int, values=None):
        """Unnormalized (numerator/m, denominator/m) pairs on the raw
        weight scale, for unbiasedness checks."""
        if values is None:
            values = self.v
        w = np.exp(self.logw)
        num = float(np.dot(counts_i * w, values) / m)
        den = float((counts_j * w).sum() / m)
        return num, den
