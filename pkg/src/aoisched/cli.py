"""Command-line harness.

Subcommands: ``run`` (single episode, prints metrics), ``sweep`` (rate
sweep to CSV plus figures), ``train`` (PPO training, writes checkpoint,
curve CSV and figure), ``oracle-check`` (cross-implementation equivalence
suite on small instances). Exit codes: 0 success, 1 config/validation
failure or failed check, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import load_experiment
from .env import ConfigError, InvalidActionError, Schedule, UplinkEnv
from .harness import episode_seed, run_episode, run_sweep
from .ppo import save_checkpoint, train_ppo, write_training_curve
from .plots import save_sweep_figures, save_training_figure
from .reference import simulate_reference
from .schedulers import (
    GreedyOracle,
    ProportionalFair,
    RandomScheduler,
    RoundRobin,
    enumerate_allocations,
    make_scheduler,
)
from .traffic import ArrivalSpec, RateAssignment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoisched",
        description="Slotted uplink simulator with AoI-aware bandwidth schedulers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single episode and print metrics")
    p_run.add_argument("--config", required=True, help="experiment config file")
    p_run.add_argument("--scheduler", default=None, help="override the scheduler name")
    p_run.add_argument("--seed", type=int, default=None, help="override the base seed")

    p_sweep = sub.add_parser("sweep", help="run the rate sweep and write CSV + figures")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=None, help="CSV output path (overrides config)")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p_train = sub.add_parser("train", help="train the PPO scheduler and write a checkpoint")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--no-figures", action="store_true")

    p_check = sub.add_parser(
        "oracle-check", help="brute-force equivalence suite on small random instances"
    )
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--cases", type=int, default=25)
    return parser


def _cmd_run(args) -> int:
    exp, _, _, _ = load_experiment(args.config)
    if args.seed is not None:
        exp.seed = args.seed
    name = args.scheduler or exp.scheduler_names[0]
    seed = episode_seed(exp.seed, 0, 0)
    rate_rng = np.random.default_rng(episode_seed(exp.seed, 0, 0, stream=1))
    rates = exp.point_rates(exp.sweep_rates_hz[0], rate_rng)
    config = exp.sim_config(rates, seed)
    scheduler = make_scheduler(
        name,
        config,
        rates=rates,
        checkpoint_path=exp.checkpoint_path,
        pf_mode=exp.pf_mode,
        seed=episode_seed(exp.seed, 0, 0, stream=2),
    )
    metrics = run_episode(config, scheduler)
    print(
        f"scheduler={name} rate_hz={exp.sweep_rates_hz[0]!r} "
        f"mean_aoi={metrics.mean_aoi!r} throughput={metrics.throughput!r} "
        f"mean_reward={metrics.mean_reward!r} seed={seed}"
    )
    return 0


def _cmd_sweep(args) -> int:
    exp, _, _, _ = load_experiment(args.config)
    if args.seed is not None:
        exp.seed = args.seed
    if args.out is not None:
        exp.output_path = args.out
    if not exp.output_path:
        raise ConfigError("sweep needs an output path (--out or [sweep] output_path)")
    Path(exp.output_path).parent.mkdir(parents=True, exist_ok=True)
    report = run_sweep(exp)
    print(f"wrote {len(report.rows)} rows to {exp.output_path}")
    if not args.no_figures:
        for fig_path in save_sweep_figures(report, exp.output_path):
            print(f"wrote {fig_path}")
    return 0


def _cmd_train(args) -> int:
    exp, hp, train_rate, train_seed = load_experiment(args.config)
    if args.seed is not None:
        train_seed = args.seed
    mean_rate = train_rate if train_rate is not None else exp.sweep_rates_hz[0]
    rate_rng = np.random.default_rng(episode_seed(train_seed, 0, 0, stream=1))
    rates = exp.point_rates(mean_rate, rate_rng)
    config = exp.sim_config(rates, seed=train_seed)
    config = replace(config, horizon=hp.rollout_length)
    scheduler, curve = train_ppo(config, hp, seed=train_seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, scheduler)
    curve_path = out.with_suffix(out.suffix + ".curve.csv")
    write_training_curve(curve, curve_path)
    print(
        f"trained {len(curve)} iterations at rate_hz={mean_rate!r}; "
        f"checkpoint={out} curve={curve_path}"
    )
    if not args.no_figures:
        fig = save_training_figure(curve, str(out) + "_reward.png")
        print(f"wrote {fig}")
    return 0


def _random_small_instance(rng: np.random.Generator):
    n = int(rng.integers(2, 5))
    b = int(rng.integers(1, n))
    specs = [
        ArrivalSpec("poisson", float(rng.uniform(0, 1500)), slot_duration_s=1e-3)
        for _ in range(n)
    ]
    from .env import SimConfig

    return SimConfig(
        num_ues=n,
        bandwidth_units=b,
        horizon=50,
        seed=int(rng.integers(0, 2**32)),
        arrival_specs=specs,
        queue_capacity=int(rng.integers(1, 8)),
        packets_per_unit=int(rng.integers(1, 3)),
    )


def _cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0

    # recursion vs max-over-history reference on random instances
    for case in range(args.cases):
        config = _random_small_instance(rng)
        env = UplinkEnv(config)
        steps = int(rng.integers(10, config.horizon + 1))
        schedules, arrivals, env_aoi = [], [], []
        for _ in range(steps):
            alloc = np.zeros(config.num_ues, dtype=np.int64)
            for _ in range(int(rng.integers(0, config.bandwidth_units + 1))):
                alloc[int(rng.integers(0, config.num_ues))] += 1
            result = env.step(Schedule(alloc))
            schedules.append(alloc.tolist())
            arrivals.append(result.packets_arrived.tolist())
            env_aoi.append(result.per_ue_aoi.tolist())
        ref = simulate_reference(
            arrivals, schedules, config.queue_capacity, config.packets_per_unit
        )
        ok = ref["aoi"] == env_aoi
        failures += not ok
        print(f"recursion-vs-reference case {case}: {'PASS' if ok else 'FAIL'}")

    # greedy oracle attains the enumeration maximum and dominates baselines
    for case in range(args.cases):
        config = _random_small_instance(rng)
        env = UplinkEnv(config)
        for _ in range(int(rng.integers(0, 30))):
            alloc = np.zeros(config.num_ues, dtype=np.int64)
            for _ in range(int(rng.integers(0, config.bandwidth_units + 1))):
                alloc[int(rng.integers(0, config.num_ues))] += 1
            env.step(Schedule(alloc))
        oracle_alloc = GreedyOracle().decide(env)
        oracle_reward = env.clone().step(oracle_alloc).reward
        best = max(
            env.clone().step(Schedule(alloc)).reward
            for alloc in enumerate_allocations(config.num_ues, config.bandwidth_units)
        )
        rates = RateAssignment(
            np.array([spec.rate_hz for spec in config.arrival_specs])
        )
        baselines = [
            RoundRobin(config.num_ues, config.bandwidth_units),
            ProportionalFair(rates, config.bandwidth_units, config.packets_per_unit),
            RandomScheduler(config.num_ues, config.bandwidth_units, seed=case),
        ]
        dominated = all(
            oracle_reward >= env.clone().step(sched.decide(env)).reward for sched in baselines
        )
        ok = oracle_reward >= best and dominated
        failures += not ok
        print(f"oracle-argmax case {case}: {'PASS' if ok else 'FAIL'}")

    print(f"oracle-check: {2 * args.cases - failures}/{2 * args.cases} checks passed")
    return 0 if failures == 0 else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "oracle-check":
            return _cmd_oracle_check(args)
    except (ConfigError, InvalidActionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
