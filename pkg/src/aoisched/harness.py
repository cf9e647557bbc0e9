"""Experiment orchestration: episodes, rate sweeps, metrics, CSV output.

A sweep point fixes the mean arrival rate; per-UE rates come from an
optional relative profile and jitter. Arrival realizations are seeded
from (base seed, point index, episode index) only, so every scheduler at
a sweep point faces identical traffic and differences are attributable to
scheduling alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .env import ConfigError, SimConfig, UplinkEnv
from .schedulers import make_scheduler
from .traffic import ArrivalSpec, RateAssignment

CSV_HEADER = "sweep_rate_hz,scheduler,episode,mean_aoi,throughput,seed"


@dataclass
class ExperimentConfig:
    """Everything a sweep needs: instance shape, traffic law, schedulers, points."""

    num_ues: int
    bandwidth_units: int
    scheduler_names: Sequence[str]
    sweep_rates_hz: Sequence[float]
    episodes_per_point: int = 1
    eval_horizon: int = 1000
    seed: int = 0
    queue_capacity: int = 100
    packets_per_unit: int = 1
    aoi_weight: float = 0.01
    arrival_kind: str = "poisson"
    slot_duration_s: float = 1e-3
    rate_variance: float = 0.0
    rate_profile: Optional[Sequence[float]] = None
    rate_jitter: float = 0.0
    checkpoint_path: Optional[str] = None
    pf_mode: str = "adaptive"
    output_path: Optional[str] = None

    def validate(self) -> None:
        if not self.sweep_rates_hz:
            raise ConfigError("sweep must contain at least one rate")
        if any(r < 0 for r in self.sweep_rates_hz):
            raise ConfigError("sweep rates must be nonnegative")
        if self.episodes_per_point < 1:
            raise ConfigError("episodes_per_point must be >= 1")
        if self.eval_horizon < 1:
            raise ConfigError("eval_horizon must be >= 1")
        if not self.scheduler_names:
            raise ConfigError("at least one scheduler required")
        if self.rate_profile is not None:
            if len(self.rate_profile) != self.num_ues:
                raise ConfigError("rate_profile length must equal num_ues")
            if any(w < 0 for w in self.rate_profile) or sum(self.rate_profile) <= 0:
                raise ConfigError("rate_profile weights must be nonnegative with positive sum")
        if not 0 <= self.rate_jitter < 1:
            raise ConfigError("rate_jitter must be in [0, 1)")
        if "ppo" in self.scheduler_names and not self.checkpoint_path:
            raise ConfigError("ppo scheduler requires a checkpoint path")
        # shape constraints are enforced by SimConfig at episode build time
        probe = self.sim_config(RateAssignment(np.zeros(self.num_ues)), seed=0)
        probe.validate()

    def point_rates(self, mean_rate_hz: float, rng: np.random.Generator) -> RateAssignment:
        """Per-UE rates with the configured profile and jitter, mean preserved."""
        if self.rate_profile is None:
            weights = np.ones(self.num_ues)
        else:
            weights = np.asarray(self.rate_profile, dtype=float)
        rates = mean_rate_hz * self.num_ues * weights / weights.sum()
        if self.rate_jitter > 0:
            rates = rates * rng.uniform(1 - self.rate_jitter, 1 + self.rate_jitter, self.num_ues)
        return RateAssignment(rates)

    def sim_config(self, rates: RateAssignment, seed: int) -> SimConfig:
        specs = [
            ArrivalSpec(self.arrival_kind, float(r), self.rate_variance, self.slot_duration_s)
            for r in rates.per_ue_rate_hz
        ]
        return SimConfig(
            num_ues=self.num_ues,
            bandwidth_units=self.bandwidth_units,
            horizon=self.eval_horizon,
            seed=seed,
            arrival_specs=specs,
            queue_capacity=self.queue_capacity,
            packets_per_unit=self.packets_per_unit,
            aoi_weight=self.aoi_weight,
        )


@dataclass
class EpisodeMetrics:
    mean_aoi: float
    throughput: float
    mean_reward: float


@dataclass
class SweepRow:
    sweep_rate_hz: float
    scheduler: str
    episode: int
    mean_aoi: float
    throughput: float
    seed: int


@dataclass
class MetricsReport:
    rows: List[SweepRow] = field(default_factory=list)

    def aggregate(self) -> dict:
        """(rate, scheduler) -> mean and standard error of both metrics."""
        groups: dict = {}
        for row in self.rows:
            groups.setdefault((row.sweep_rate_hz, row.scheduler), []).append(row)
        out = {}
        for key, rows in groups.items():
            aois = np.array([r.mean_aoi for r in rows])
            thr = np.array([r.throughput for r in rows])
            k = len(rows)
            out[key] = {
                "mean_aoi": float(aois.mean()),
                "mean_aoi_se": float(aois.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0,
                "throughput": float(thr.mean()),
                "throughput_se": float(thr.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0,
                "episodes": k,
            }
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in self.rows:
                fh.write(
                    f"{row.sweep_rate_hz!r},{row.scheduler},{row.episode},"
                    f"{row.mean_aoi!r},{row.throughput!r},{row.seed}\n"
                )


def episode_seed(base_seed: int, point_idx: int, episode_idx: int, stream: int = 0) -> int:
    """Deterministic seed independent of the scheduler under test."""
    ss = np.random.SeedSequence([base_seed, point_idx, episode_idx, stream])
    return int(ss.generate_state(1, np.uint64)[0])


def run_episode(config: SimConfig, scheduler, horizon: Optional[int] = None) -> EpisodeMetrics:
    """One seeded episode; the mean age averages the value seen at each slot start."""
    steps = config.horizon if horizon is None else horizon
    env = UplinkEnv(config)
    if hasattr(scheduler, "reset"):
        scheduler.reset()
    aoi_sum = 0.0
    served_total = 0
    reward_sum = 0.0
    for _ in range(steps):
        aoi_sum += float(env.aoi_vector.sum())
        schedule = scheduler.decide(env)
        result = env.step(schedule)
        served_total += int(result.packets_served.sum())
        reward_sum += result.reward
    return EpisodeMetrics(
        mean_aoi=aoi_sum / (steps * config.num_ues),
        throughput=served_total / steps,
        mean_reward=reward_sum / steps,
    )


def run_sweep(exp: ExperimentConfig) -> MetricsReport:
    """Every (point, scheduler, episode) combination, rows in that order."""
    exp.validate()
    report = MetricsReport()
    for point_idx, rate in enumerate(exp.sweep_rates_hz):
        episodes = []
        for ep in range(exp.episodes_per_point):
            seed = episode_seed(exp.seed, point_idx, ep)
            rate_rng = np.random.default_rng(episode_seed(exp.seed, point_idx, ep, stream=1))
            episodes.append((ep, seed, exp.point_rates(rate, rate_rng)))
        for name in exp.scheduler_names:
            for ep, seed, rates in episodes:
                config = exp.sim_config(rates, seed)
                scheduler = make_scheduler(
                    name,
                    config,
                    rates=rates,
                    checkpoint_path=exp.checkpoint_path,
                    pf_mode=exp.pf_mode,
                    seed=episode_seed(exp.seed, point_idx, ep, stream=2),
                )
                metrics = run_episode(config, scheduler)
                report.rows.append(
                    SweepRow(rate, name, ep, metrics.mean_aoi, metrics.throughput, seed)
                )
    if exp.output_path:
        report.to_csv(exp.output_path)
    return report
