"""Reward sketches with holes: parsing, constraints, estimators, and
adversarial hole learning from demonstrations."""

from .constraints import (
    And,
    Atom,
    AtomicPredicate,
    ConstraintError,
    Not,
    Or,
    eval_constraint,
    grad_soft_penalty,
    is_satisfied,
    parse_constraints,
    parse_constraints_file,
    soft_penalty,
)
from .dsl import (
    DEFAULT_VOCAB,
    SketchError,
    eval_program,
    holes_of,
    parse_sketch,
    parse_sketch_file,
    partial_eval,
    print_sketch,
    substitute,
    tokens_of,
    total_reward,
)
from .envs import (
    DemoSet,
    DoorKeyEnv,
    GridConfig,
    TabularMDP,
    Trajectory,
    enumerate_trajectories,
    load_demos,
    load_grid_config,
    load_mdp,
    save_demos,
    save_mdp,
)
from .estimators import (
    EstimateReport,
    SafetySpec,
    exact_expectation,
    exact_safety_lc,
    exact_zl,
    empirical_safety_lhat,
    proposition1_bound,
    snis_expectation,
    theorem1_confidence,
    theorem1_interval,
    two_batch_estimate,
)
from .learner import (
    HoleSampler,
    PrdbeLearner,
    RewardModel,
    TrainConfig,
    load_train_config,
    most_likely_program,
    parse_train_config,
    train,
)
from .policy import PolicyTable
from .program import Program

__version__ = "0.1.0"

__all__ = [
    "And", "Atom", "AtomicPredicate", "ConstraintError", "Not", "Or",
    "eval_constraint", "grad_soft_penalty", "is_satisfied",
    "parse_constraints", "parse_constraints_file", "soft_penalty",
    "DEFAULT_VOCAB", "SketchError", "eval_program", "holes_of",
    "parse_sketch", "parse_sketch_file", "partial_eval", "print_sketch",
    "substitute", "tokens_of", "total_reward",
    "DemoSet", "DoorKeyEnv", "GridConfig", "TabularMDP", "Trajectory",
    "enumerate_trajectories", "load_demos", "load_grid_config", "load_mdp",
    "save_demos", "save_mdp",
    "EstimateReport", "SafetySpec", "exact_expectation", "exact_safety_lc",
    "exact_zl", "empirical_safety_lhat", "proposition1_bound",
    "snis_expectation", "theorem1_confidence", "theorem1_interval",
    "two_batch_estimate",
    "HoleSampler", "PrdbeLearner", "RewardModel", "TrainConfig",
    "load_train_config", "most_likely_program", "parse_train_config",
    "train", "PolicyTable", "Program",
    "__version__",
]
