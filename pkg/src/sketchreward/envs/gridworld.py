"""Deterministic DoorKey gridworld with event tokens and a scripted expert.

Layout: a rectangular grid with outer walls and one interior wall column
holding a locked door.  The agent must pick up the key, unlock the door,
and reach the goal.  Actions follow the seven-action MiniGrid convention
(left, right, forward, pickup, drop, toggle, done).

States encode (agent x, y, facing direction, door status, key location)
as a single integer so tabular policies and demo files can refer to them
directly.  Dynamics are pure functions of (state, action); event tokens
are derived from the transition, so a stored trajectory replays to the
identical token stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .trajectory import DemoSet, Trajectory

ACTIONS = ("left", "right", "forward", "pickup", "drop", "toggle", "done")
LEFT, RIGHT, FORWARD, PICKUP, DROP, TOGGLE, DONE = range(7)

# directions: 0 east, 1 south, 2 west, 3 north
_DX = (1, 0, -1, 0)
_DY = (0, 1, 0, -1)

DOOR_LOCKED, DOOR_OPEN, DOOR_CLOSED = range(3)

GRID_VOCAB = (
    "reach_goal",
    "unlock_door",
    "open_door",
    "close_door",
    "pickup_key",
    "drop_key",
    "other",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    width: int = 6
    height: int = 6
    wall_col: int = 3
    door: tuple = (3, 3)
    key: tuple = (1, 2)
    goal: tuple = (4, 4)
    start: tuple = (1, 1)
    start_dir: int = 0
    seed: int = 0
    max_steps: int = 120

    def validate(self):
        if self.width < 4 or self.height < 4:
            raise ConfigError("grid must be at least 4x4")
        if not 1 <= self.wall_col <= self.width - 2:
            raise ConfigError("wall column must be interior")
        if self.door[0] != self.wall_col:
            raise ConfigError("door must sit on the wall column")
        cells = {self.door, self.key, self.goal, self.start}
        if len(cells) != 4:
            raise ConfigError("door, key, goal, and start cells must be distinct")
        for x, y in (self.key, self.goal, self.start):
            if not (1 <= x <= self.width - 2 and 1 <= y <= self.height - 2):
                raise ConfigError(f"cell ({x},{y}) outside the interior")
            if x == self.wall_col and (x, y) != self.door:
                raise ConfigError(f"cell ({x},{y}) sits inside the wall")
        if not 1 <= self.door[1] <= self.height - 2:
            raise ConfigError("door outside the interior")
        if self.key[0] >= self.wall_col:
            raise ConfigError("key must start on the agent side of the wall")
        if self.start[0] >= self.wall_col:
            raise ConfigError("agent must start on the key side of the wall")


# key location: cell index, or the sentinel "carried"
_CARRIED = "carried"


@dataclass(frozen=True)
class GridState:
    x: int
    y: int
    dir: int
    door: int  # DOOR_LOCKED / DOOR_OPEN / DOOR_CLOSED
    key: object  # (x, y) cell or _CARRIED

    @property
    def carrying(self) -> bool:
        return self.key == _CARRIED


class DoorKeyEnv:
    """Cloneable value object; all methods are pure given (state, action)."""

    vocab = GRID_VOCAB

    def __init__(self, config: GridConfig = GridConfig()):
        config.validate()
        self.config = config
        self._n_cells = config.width * config.height

    # --- state encoding ---------------------------------------------------

    def _cell_index(self, cell) -> int:
        if cell == _CARRIED:
            return self._n_cells
        x, y = cell
        return y * self.config.width + x

    def encode(self, st: GridState) -> int:
        c = self.config
        idx = st.x
        idx = idx * c.height + st.y
        idx = idx * 4 + st.dir
        idx = idx * 3 + st.door
        idx = idx * (self._n_cells + 1) + self._cell_index(st.key)
        return idx

    def decode(self, idx: int) -> GridState:
        c = self.config
        idx, key_i = divmod(idx, self._n_cells + 1)
        idx, door = divmod(idx, 3)
        idx, d = divmod(idx, 4)
        x, y = divmod(idx, c.height)
        key = _CARRIED if key_i == self._n_cells else (key_i % c.width, key_i // c.width)
        return GridState(x, y, d, door, key)

    @property
    def n_states(self) -> int:
        return self._n_cells * 4 * 3 * (self._n_cells + 1)

    @property
    def n_actions(self) -> int:
        return len(ACTIONS)

    def initial_state(self) -> GridState:
        c = self.config
        return GridState(c.start[0], c.start[1], c.start_dir, DOOR_LOCKED, c.key)

    # --- dynamics ---------------------------------------------------------

    def _is_wall(self, x, y) -> bool:
        c = self.config
        if x <= 0 or y <= 0 or x >= c.width - 1 or y >= c.height - 1:
            return True
        return x == c.wall_col and (x, y) != c.door

    def _front(self, st: GridState):
        return st.x + _DX[st.dir], st.y + _DY[st.dir]

    def _walkable(self, st: GridState, cell) -> bool:
        x, y = cell
        if self._is_wall(x, y):
            return False
        if cell == self.config.door and st.door != DOOR_OPEN:
            return False
        if cell == st.key:
            return False  # cannot walk onto the key
        return True

    def step(self, st: GridState, action: int) -> GridState:
        c = self.config
        if action == LEFT:
            return GridState(st.x, st.y, (st.dir - 1) % 4, st.door, st.key)
        if action == RIGHT:
            return GridState(st.x, st.y, (st.dir + 1) % 4, st.door, st.key)
        front = self._front(st)
        if action == FORWARD:
            if self._walkable(st, front):
                return GridState(front[0], front[1], st.dir, st.door, st.key)
            return st
        if action == PICKUP:
            if not st.carrying and st.key == front:
                return GridState(st.x, st.y, st.dir, st.door, _CARRIED)
            return st
        if action == DROP:
            if st.carrying and not self._is_wall(*front) and front != c.door \
                    and front != c.goal and front != (st.x, st.y):
                return GridState(st.x, st.y, st.dir, st.door, front)
            return st
        if action == TOGGLE:
            if front == c.door:
                if st.door == DOOR_LOCKED and st.carrying:
                    return GridState(st.x, st.y, st.dir, DOOR_OPEN, st.key)
                if st.door == DOOR_OPEN:
                    return GridState(st.x, st.y, st.dir, DOOR_CLOSED, st.key)
                if st.door == DOOR_CLOSED:
                    return GridState(st.x, st.y, st.dir, DOOR_OPEN, st.key)
            return st
        return st  # done: no-op

    def token_for(self, st: GridState, action: int) -> str:
        """Event token for performing ``action`` at ``st``.

        Pure in the transition pair, hence pure in the trajectory prefix;
        first-time qualifiers live in the sketch via counts.
        """
        nxt = self.step(st, action)
        front = self._front(st)
        if action == FORWARD and (nxt.x, nxt.y) != (st.x, st.y):
            return "reach_goal" if (nxt.x, nxt.y) == self.config.goal else "other"
        if action == TOGGLE and front == self.config.door:
            if st.door == DOOR_LOCKED and nxt.door == DOOR_OPEN:
                return "unlock_door"
            if st.door == DOOR_CLOSED and nxt.door == DOOR_OPEN:
                return "open_door"
            if st.door == DOOR_OPEN and nxt.door == DOOR_CLOSED:
                return "close_door"
        if action == PICKUP and not st.carrying and nxt.carrying:
            return "pickup_key"
        if action == DROP and st.carrying and not nxt.carrying:
            return "drop_key"
        return "other"

    def pred(self, states, actions) -> str:
        """Token for the final step of an encoded prefix."""
        return self.token_for(self.decode(states[-1]), actions[-1])

    def is_goal_step(self, st: GridState, action: int) -> bool:
        return self.token_for(st, action) == "reach_goal"

    # --- rollouts ---------------------------------------------------------

    def rollout(self, policy, rng: np.random.Generator,
                greedy: bool = False) -> Trajectory:
        """Run a policy for at most max_steps, stopping after reach_goal."""
        st = self.initial_state()
        states, actions, tokens = [], [], []
        log_pi = 0.0
        for _ in range(self.config.max_steps):
            s_idx = self.encode(st)
            if greedy:
                a = policy.greedy_action(s_idx)
            else:
                p = policy.probs(s_idx)
                a = int(rng.choice(self.n_actions, p=p))
                log_pi += float(np.log(p[a]))
            states.append(s_idx)
            actions.append(a)
            tokens.append(self.token_for(st, a))
            if tokens[-1] == "reach_goal":
                break
            st = self.step(st, a)
        return Trajectory(tuple(states), tuple(actions), tuple(tokens), log_pi)

    def replay_tokens(self, traj: Trajectory):
        return tuple(self.pred(traj.states[: i + 1], traj.actions[: i + 1])
                     for i in range(len(traj)))

    # --- scripted expert --------------------------------------------------

    def expert_actions(self) -> list[int]:
        """Shortest action sequence from the start to a reach_goal step,
        found by breadth-first search over the deterministic state graph."""
        start = self.initial_state()
        seen = {start}
        frontier = [(start, [])]
        while frontier:
            nxt_frontier = []
            for st, path in frontier:
                for a in (LEFT, RIGHT, FORWARD, PICKUP, TOGGLE):
                    if self.is_goal_step(st, a):
                        return path + [a]
                    nst = self.step(st, a)
                    if nst not in seen:
                        seen.add(nst)
                        nxt_frontier.append((nst, path + [a]))
            frontier = nxt_frontier
        raise ConfigError("layout is not solvable by the scripted expert")

    def expert_trajectory(self) -> Trajectory:
        st = self.initial_state()
        states, actions, tokens = [], [], []
        for a in self.expert_actions():
            states.append(self.encode(st))
            actions.append(a)
            tokens.append(self.token_for(st, a))
            st = self.step(st, a)
        # deterministic expert: action sequence has probability one
        return Trajectory(tuple(states), tuple(actions), tuple(tokens), 0.0)

    def expert_demos(self, n: int) -> DemoSet:
        demo = self.expert_trajectory()
        meta = {"env": self.describe(), "seed": self.config.seed,
                "expert": "bfs-shortest-path"}
        return DemoSet([demo] * n, meta)

    def describe(self) -> str:
        c = self.config
        return f"doorkey-{c.width}x{c.height}"


def parse_grid_config(text: str) -> GridConfig:
    """Key-value env config: ``width = 6``, cells as ``door = 3,3``."""
    fields = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {i}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        fields[key] = value
    kwargs = {}
    ints = ("width", "height", "wall_col", "start_dir", "seed", "max_steps")
    cells = ("door", "key", "goal", "start")
    for key, value in fields.items():
        if key in ints:
            kwargs[key] = int(value)
        elif key in cells:
            parts = value.split(",")
            if len(parts) != 2:
                raise ConfigError(f"{key}: expected 'x,y', got {value!r}")
            kwargs[key] = (int(parts[0]), int(parts[1]))
        else:
            raise ConfigError(f"unknown env config key {key!r}")
    cfg = GridConfig(**kwargs)
    cfg.validate()
    return cfg


def load_grid_config(path) -> GridConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_grid_config(fh.read())
