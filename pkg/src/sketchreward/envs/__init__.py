from .gridworld import (
    ACTIONS,
    ConfigError,
    DoorKeyEnv,
    GRID_VOCAB,
    GridConfig,
    load_grid_config,
    parse_grid_config,
)
from .tabular import (
    DEFAULT_ENUMERATION_CAP,
    EnumerationCapError,
    TabularMDP,
    enumerate_trajectories,
    load_mdp,
    save_mdp,
)
from .trajectory import DemoFormatError, DemoSet, Trajectory, load_demos, save_demos

__all__ = [
    "ACTIONS", "ConfigError", "DoorKeyEnv", "GRID_VOCAB", "GridConfig",
    "load_grid_config", "parse_grid_config", "DEFAULT_ENUMERATION_CAP",
    "EnumerationCapError", "TabularMDP", "enumerate_trajectories", "load_mdp",
    "save_mdp", "DemoFormatError", "DemoSet", "Trajectory", "load_demos",
    "save_demos",
]
