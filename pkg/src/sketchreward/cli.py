"""Command-line entry point.

Subcommands:

  * ``check`` — parse a sketch (and optionally a constraint file) and
    report holes, token references, and predicates,
  * ``demo``  — write scripted expert demonstrations for a DoorKey layout,
  * ``train`` — run the adversarial hole learner and emit artifacts,
  * ``study`` — replication sweeps validating the estimators and bounds.

Exit codes: 0 success, 1 user/input error, 2 internal or numerical abort.
The environment variable SKETCHREWARD_SEED overrides any configured seed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import json
import math
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from .constraints import ConstraintError, is_satisfied, parse_constraints_file
from .dsl import SketchError, holes_of, parse_sketch_file, tokens_of
from .envs.gridworld import ConfigError, DoorKeyEnv, GridConfig, load_grid_config
from .envs.tabular import (
    EnumerationCapError,
    TabularMDP,
    enumerate_trajectories,
    load_mdp,
)
from .envs.trajectory import DemoFormatError, load_demos, save_demos
from .estimators import (
    SafetySpec,
    TrajectoryTable,
    exact_expectation,
    exact_safety_lc,
    exact_zl,
    proposition1_bound,
    theorem1_interval,
)
from .learner import TrainConfig, load_train_config, train

USER_ERRORS = (SketchError, ConstraintError, ConfigError, DemoFormatError,
               FileNotFoundError, IsADirectoryError, PermissionError)

STUDY_CSV_FIELDS = ("estimator", "m", "seed", "estimate", "exact",
                    "abs_err", "interval_lo", "interval_hi", "confidence")


def _asset(name: str):
    return resources.files("sketchreward.assets") / name


def _resolve_seed(args, config_seed: int) -> int:
    env = os.environ.get("SKETCHREWARD_SEED")
    if env is not None:
        return int(env)
    if getattr(args, "seed", None) is not None:
        return args.seed
    return config_seed


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


class RunManifest:
    """Record of one CLI run, sufficient to reproduce it."""

    def __init__(self, command: str, config: dict, seed: int):
        self.command = command
        self.config = config
        self.seed = seed
        self.artifacts: list[str] = []
        self.started = _timestamp()
        self.finished = None
        self.version = f"sketchreward-{__version__}"

    def add(self, path) -> str:
        self.artifacts.append(str(path))
        return str(path)

    def write(self, out_dir) -> None:
        self.finished = _timestamp()
        payload = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "artifacts": self.artifacts,
            "started": self.started,
            "finished": self.finished,
            "version": self.version,
        }
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, default=str)


def _save_plot(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def _new_figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt.figure(figsize=(6, 4))


# --------------------------------------------------------------------------
# check


def cmd_check(args) -> int:
    sketch = parse_sketch_file(args.sketch)
    holes = holes_of(sketch)
    tokens = tokens_of(sketch)
    print(f"sketch: {args.sketch}")
    print(f"holes: {', '.join(f'?{i}' for i in holes) or '(none)'}")
    print(f"tokens: {', '.join(sorted(tokens)) or '(none)'}")
    n_atoms = 0
    if args.constraint:
        constraint = parse_constraints_file(args.constraint, len(holes))
        n_atoms = len(constraint.children)
        for atom in constraint.children:
            print(f"predicate: {atom.pred.source}")
    print(f"{len(holes)} holes, {n_atoms} predicates, OK")
    return 0


# --------------------------------------------------------------------------
# demo


def cmd_demo(args) -> int:
    if args.env:
        config = load_grid_config(args.env)
    else:
        config = GridConfig()
    env = DoorKeyEnv(config)
    demos = env.expert_demos(args.n)
    save_demos(demos, args.out)
    print(f"wrote {len(demos)} demos to {args.out}")
    return 0


# --------------------------------------------------------------------------
# train


def _write_metrics_csv(metrics, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(type(metrics[0]).FIELDS if metrics else
                        ("iter", "elbo", "H", "J_c", "J_gen", "j_adv",
                         "constraint_margin", "eval_success", "frames"))
        for row in metrics:
            writer.writerow([f"{v:.12g}" if isinstance(v, float) else v
                             for v in row.row()])


def _learning_curve_plot(metrics, path) -> None:
    fig = _new_figure()
    ax = fig.add_subplot(111)
    pts = [(m.frames, m.eval_success) for m in metrics
           if not math.isnan(m.eval_success)]
    if pts:
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o")
    ax.set_xlabel("environment frames")
    ax.set_ylabel("greedy success rate")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("learning curve")
    _save_plot(fig, path)


def cmd_train(args) -> int:
    config = load_train_config(args.config) if args.config else TrainConfig()
    if args.mode:
        config = dataclasses.replace(config, mode=args.mode)
    seed = _resolve_seed(args, config.seed)
    config = dataclasses.replace(config, seed=seed)

    sketch_path = args.sketch or _asset("doorkey.rsk")
    sketch = parse_sketch_file(sketch_path)
    n_holes = len(holes_of(sketch))
    constraint_path = args.constraint or _asset("doorkey.rsc")
    constraint = parse_constraints_file(constraint_path, n_holes)
    env_config = load_grid_config(args.env) if args.env else GridConfig()
    env = DoorKeyEnv(env_config)
    if not args.demos:
        raise DemoFormatError("--demos is required for training")
    demos = load_demos(args.demos)

    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest("train", config.get_params(), seed)
    result = train(config, sketch, constraint, demos, env)

    lstar_path = manifest.add(os.path.join(args.out, "lstar.rsk"))
    with open(lstar_path, "w", encoding="utf-8") as fh:
        fh.write(result.program.source() + "\n")
    policy_path = manifest.add(os.path.join(args.out, "policy.npz"))
    np.savez(policy_path, logits=result.policy.logits,
             eps_floor=result.policy.eps_floor)
    metrics_path = manifest.add(os.path.join(args.out, "metrics.csv"))
    _write_metrics_csv(result.metrics, metrics_path)
    plot_path = manifest.add(os.path.join(args.out, "learning_curve.svg"))
    _learning_curve_plot(result.metrics, plot_path)
    manifest.write(args.out)

    ok = is_satisfied(constraint, result.program.assignment)
    print(f"l*: {tuple(round(x, 6) for x in result.program.assignment)}")
    print(f"constraint satisfied: {ok}")
    print(f"frames: {result.frames}")
    if result.metrics and not math.isnan(result.metrics[-1].eval_success):
        print(f"eval success: {result.metrics[-1].eval_success:.2f}")
    return 0


# --------------------------------------------------------------------------
# study


def default_study_mdp() -> TabularMDP:
    """3-state / 2-action / horizon-3 chain with mild stochasticity and a
    cost table, small enough for exhaustive enumeration."""
    t = np.array([
        [[0.7, 0.2, 0.1], [0.1, 0.6, 0.3]],
        [[0.3, 0.5, 0.2], [0.2, 0.2, 0.6]],
        [[0.5, 0.3, 0.2], [0.1, 0.3, 0.6]],
    ])
    costs = np.array([[0.0, 0.4], [0.2, 0.6], [0.5, 1.0]])
    return TabularMDP(transition=t, init=np.array([1.0, 0.0, 0.0]),
                      horizon=3, costs=costs, name="study-chain")


def study_program(scale: float = 1.0):
    """Trajectory log-potential l(tau) = scale * mean state level; bounded
    by |scale|."""

    def total(tau):
        levels = [(s + 1) / 3.0 for s in tau.states]
        return scale * float(np.mean(levels))

    return total


def study_integrand(tau) -> float:
    return float(np.mean([1.0 if s == 0 else 0.0 for s in tau.states]))


def _write_study_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=STUDY_CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row[k])
                             for k in STUDY_CSV_FIELDS})


def _error_plot(rows, path, title) -> None:
    fig = _new_figure()
    ax = fig.add_subplot(111)
    by_m: dict[int, list] = {}
    for row in rows:
        if row.get("abs_err") is not None:
            by_m.setdefault(row["m"], []).append(row["abs_err"])
    ms = sorted(by_m)
    if ms:
        medians = [float(np.median(by_m[m])) for m in ms]
        ax.plot(ms, medians, marker="o")
        ax.set_xscale("log")
        if min(medians) > 0:
            ax.set_yscale("log")
    ax.set_xlabel("batch size m")
    ax.set_ylabel("median absolute error")
    ax.set_title(title)
    _save_plot(fig, path)


def _study_snis(mdp, m_values, reps, seed):
    program = study_program(0.8)
    exact = exact_expectation(mdp, program, study_integrand)
    table = TrajectoryTable(mdp, None, program, study_integrand)
    rows = []
    for m in m_values:
        for rep in range(reps):
            rng = np.random.default_rng(seed * 1_000_003 + rep)
            est = table.snis_from_counts(table.sample_counts(m, rng))
            rows.append({"estimator": "snis", "m": m, "seed": rep,
                         "estimate": est, "exact": exact,
                         "abs_err": abs(est - exact)})
    return rows


def _study_theorem1(mdp, m_values, reps, seed, hoeffding_gamma):
    program = study_program(0.8)
    exact = exact_expectation(mdp, program, study_integrand)
    z = exact_zl(mdp, program)
    table = TrajectoryTable(mdp, None, program, study_integrand)
    pi_floor = (1.0 / mdp.n_actions) ** mdp.horizon
    l_max = 0.8
    rows = []
    for m in m_values:
        report = theorem1_interval(m, hoeffding_gamma, exact, z, v_bar=1.0,
                                   pi_floor=pi_floor, l_max=l_max)
        lo, hi = report.interval
        covered = 0
        for rep in range(reps):
            rng = np.random.default_rng(seed * 2_000_003 + rep)
            est = table.two_batch_from_counts(table.sample_counts(m, rng),
                                              table.sample_counts(m, rng))
            covered += lo <= est <= hi
            rows.append({"estimator": "two_batch", "m": m, "seed": rep,
                         "estimate": est, "exact": exact,
                         "abs_err": abs(est - exact),
                         "interval_lo": lo, "interval_hi": hi,
                         "confidence": report.confidence})
        print(f"theorem1 m={m}: coverage {covered / reps:.3f} "
              f">= bound {report.confidence:.3f}: {covered / reps >= report.confidence}")
    return rows


def _study_safety(mdp, m_values, reps, seed):
    if mdp.costs is None:
        raise ConfigError("safety study needs an MDP with a cost table")
    programs = [study_program(s) for s in (-1.0, 0.0, 1.0)]
    q = [1.0 / 3.0] * 3
    costs_all = [mdp.trajectory_cost(tau)
                 for tau, _ in enumerate_trajectories(mdp)]
    c_bar = max(costs_all)
    j_costs = [exact_expectation(mdp, p, mdp.trajectory_cost) for p in programs]
    d = (min(j_costs) + max(j_costs)) / 2.0
    kappa = 0.5 * d
    spec = SafetySpec(costs=mdp.costs, d=d, kappa=kappa, c_bar=c_bar)
    l_c = exact_safety_lc(mdp, programs, q, spec)
    tables = [TrajectoryTable(mdp, None, p, spec=spec) for p in programs]
    pi_floor = (1.0 / mdp.n_actions) ** mdp.horizon
    delta = 0.3
    rows = []
    threshold = spec.d - spec.kappa
    for m in m_values:
        bound = proposition1_bound(m, spec, pi_floor, l_c, delta)
        failures = 0
        for rep in range(reps):
            rng = np.random.default_rng(seed * 3_000_003 + rep)
            unsafe = 0.0
            for table, qk in zip(tables, q):
                ratio = table.two_batch_from_counts(
                    table.sample_counts(m, rng), table.sample_counts(m, rng),
                    values=table.cost)
                unsafe += qk * (ratio >= threshold)
            failures += l_c <= 1.0 - unsafe + delta
            rows.append({"estimator": "safety_lhat", "m": m, "seed": rep,
                         "estimate": unsafe, "exact": 1.0 - l_c,
                         "abs_err": abs(unsafe - (1.0 - l_c)),
                         "confidence": bound})
        print(f"safety m={m}: failure freq {failures / reps:.3f}, "
              f"bound {bound:.3f}")
    return rows


def cmd_study(args) -> int:
    mdp = load_mdp(args.env) if args.env else default_study_mdp()
    seed = _resolve_seed(args, 0)
    m_values = [int(x) for x in args.m_values.split(",")]
    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest(
        "study", {"kind": args.kind, "m_values": m_values,
                  "reps": args.reps, "mdp": mdp.name}, seed)
    if args.kind == "snis":
        rows = _study_snis(mdp, m_values, args.reps, seed)
    elif args.kind == "theorem1":
        rows = _study_theorem1(mdp, m_values, args.reps, seed, args.gamma)
    else:
        rows = _study_safety(mdp, m_values, args.reps, seed)
    csv_path = manifest.add(os.path.join(args.out, f"study_{args.kind}.csv"))
    _write_study_csv(rows, csv_path)
    plot_path = manifest.add(os.path.join(args.out, f"study_{args.kind}.svg"))
    _error_plot(rows, plot_path, f"{args.kind} error vs m")
    manifest.write(args.out)
    print(f"wrote {len(rows)} rows to {csv_path}")
    return 0


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchreward",
        description="Reward sketches with holes: check, demo, train, study.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="parse a sketch and constraints")
    p_check.add_argument("--sketch", required=True)
    p_check.add_argument("--constraint")
    p_check.set_defaults(func=cmd_check)

    p_demo = sub.add_parser("demo", help="write scripted expert demos")
    p_demo.add_argument("--env", help="gridworld config file")
    p_demo.add_argument("--out", required=True)
    p_demo.add_argument("-n", type=int, default=10)
    p_demo.set_defaults(func=cmd_demo)

    p_train = sub.add_parser("train", help="run the adversarial hole learner")
    p_train.add_argument("--config", help="training config file")
    p_train.add_argument("--sketch")
    p_train.add_argument("--constraint")
    p_train.add_argument("--demos", required=True)
    p_train.add_argument("--env")
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--mode",
                         choices=("standard", "soft", "hard", "safety"))
    p_train.add_argument("--jobs", type=int, default=1,
                         help="reserved; the loop is single-threaded")
    p_train.set_defaults(func=cmd_train)

    p_study = sub.add_parser("study", help="estimator replication sweeps")
    p_study.add_argument("--kind", required=True,
                         choices=("snis", "theorem1", "safety"))
    p_study.add_argument("--env", help="tabular MDP json file")
    p_study.add_argument("--out", required=True)
    p_study.add_argument("--seed", type=int)
    p_study.add_argument("--m-values", default="100,1000,10000")
    p_study.add_argument("--reps", type=int, default=100)
    p_study.add_argument("--gamma", type=float, default=0.3,
                         help="Hoeffding slack for the theorem1 study")
    p_study.add_argument("--jobs", type=int, default=1,
                         help="reserved; sweeps run sequentially")
    p_study.set_defaults(func=cmd_study)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EnumerationCapError, FloatingPointError, ArithmeticError,
            RuntimeError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
