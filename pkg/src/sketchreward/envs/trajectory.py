"""Trajectories, demonstration sets, and their JSON-lines file format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


class DemoFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    """A finite rollout: per-step states, actions, event tokens, and the
    log-probability of the action sequence under the generating policy."""

    states: tuple
    actions: tuple
    tokens: tuple
    log_pi: float

    def __post_init__(self):
        n = len(self.states)
        if n == 0:
            raise DemoFormatError("empty trajectory")
        if len(self.actions) != n or len(self.tokens) != n:
            raise DemoFormatError(
                f"inconsistent lengths: {n} states, {len(self.actions)} actions, "
                f"{len(self.tokens)} tokens"
            )
        if not math.isfinite(self.log_pi):
            raise DemoFormatError("log_pi must be finite")

    def __len__(self):
        return len(self.states)

    @property
    def steps(self):
        return list(zip(self.states, self.actions))


@dataclass
class DemoSet:
    trajectories: list
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)


_FORMAT_VERSION = 1


def save_demos(demos: DemoSet, path) -> None:
    """One JSON object per line; first line is a header manifest."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": "sketchreward-demos", "version": _FORMAT_VERSION}
        header.update(demos.metadata)
        fh.write(json.dumps(header) + "\n")
        for traj in demos.trajectories:
            rec = {
                "steps": [[int(s), int(a)] for s, a in traj.steps],
                "tokens": list(traj.tokens),
                "log_pi": traj.log_pi,
            }
            fh.write(json.dumps(rec) + "\n")


def load_demos(path) -> DemoSet:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DemoFormatError(f"{path}: empty demo file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DemoFormatError(f"{path}: malformed header: {exc}") from exc
    if header.get("format") != "sketchreward-demos":
        raise DemoFormatError(f"{path}: not a sketchreward demo file")
    if header.get("version") != _FORMAT_VERSION:
        raise DemoFormatError(
            f"{path}: unsupported demo format version {header.get('version')!r}"
        )
    metadata = {k: v for k, v in header.items() if k not in ("format", "version")}
    trajectories = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            steps = rec["steps"]
            traj = Trajectory(
                states=tuple(int(s) for s, _ in steps),
                actions=tuple(int(a) for _, a in steps),
                tokens=tuple(rec["tokens"]),
                log_pi=float(rec["log_pi"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DemoFormatError(f"{path}: line {i}: {exc}") from exc
        trajectories.append(traj)
    return DemoSet(trajectories, metadata)
