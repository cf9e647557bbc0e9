"""Non-learning bandwidth schedulers behind a common decide(env) interface.

Round-robin rotates single units across UEs; proportional-fair splits the
budget by arrival rates (static largest-remainder mode, or the default
adaptive mode that equalizes a throughput EMA across backlogged UEs); the
greedy oracle exhaustively maximizes the one-slot reward through cloned
environment steps; the random scheduler is a test control.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .env import Schedule, SimConfig, UplinkEnv
from .traffic import RateAssignment


class OracleSizeError(ValueError):
    """Instance too large to enumerate; use a heuristic scheduler instead."""


def round_robin_decide(pointer: int, n: int, b: int):
    """One unit each to UEs pointer..pointer+b-1 (mod n); returns (Schedule, new pointer)."""
    if not 0 <= pointer < n:
        raise ValueError(f"pointer {pointer} out of range for {n} UEs")
    if not 0 < b < n:
        raise ValueError(f"need 0 < b < n, got b={b}, n={n}")
    alloc = np.zeros(n, dtype=np.int64)
    for i in range(b):
        alloc[(pointer + i) % n] += 1
    return Schedule(alloc), (pointer + b) % n


class RoundRobin:
    """Rotating equal allocation; over n consecutive slots every UE gets exactly b units."""

    def __init__(self, num_ues: int, bandwidth_units: int, start: int = 0):
        self.num_ues = num_ues
        self.bandwidth_units = bandwidth_units
        self._start = start
        self.pointer = start

    def reset(self) -> None:
        self.pointer = self._start

    def decide(self, env: Optional[UplinkEnv] = None) -> Schedule:
        schedule, self.pointer = round_robin_decide(self.pointer, self.num_ues, self.bandwidth_units)
        return schedule


def largest_remainder_split(weights, b: int) -> np.ndarray:
    """Split b integer units proportionally to weights; ties go to the lowest index."""
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total <= 0:
        raise ValueError("weights must have positive sum")
    quotas = b * weights / total
    alloc = np.floor(quotas).astype(np.int64)
    remainder = quotas - alloc
    leftover = b - int(alloc.sum())
    if leftover > 0:
        # stable sort on -remainder keeps index order among equal remainders
        order = np.argsort(-remainder, kind="stable")
        for idx in order[:leftover]:
            alloc[idx] += 1
    return alloc


def proportional_fair_decide(rates: RateAssignment, b: int) -> Schedule:
    """Static largest-remainder split of b units by mean rates.

    All-zero rates fall back to an equal split over the first b UEs
    (round-robin allocation from index 0).
    """
    weights = rates.per_ue_rate_hz
    if np.all(weights == 0):
        alloc = np.zeros(len(rates), dtype=np.int64)
        alloc[:b] = 1
        return Schedule(alloc)
    return Schedule(largest_remainder_split(weights, b))


class ProportionalFair:
    """Rate-informed scheduler in two modes.

    ``static`` replays the largest-remainder split of the known mean rates
    every slot. ``adaptive`` (default) is the classic formulation: it
    tracks a per-UE throughput EMA and hands units one at a time to the
    backlogged UE with the lowest smoothed throughput, so service is
    work-conserving and no backlogged UE starves; spare units rotate
    round-robin. The known rates seed the EMA.
    """

    def __init__(
        self,
        rates: RateAssignment,
        bandwidth_units: int,
        packets_per_unit: int = 1,
        mode: str = "adaptive",
        ema_window: int = 100,
    ):
        if mode not in ("adaptive", "static"):
            raise ValueError(f"unknown PF mode {mode!r}")
        self.rates = rates
        self.bandwidth_units = bandwidth_units
        self.packets_per_unit = packets_per_unit
        self.mode = mode
        self.ema_alpha = 1.0 / ema_window
        self.zero_rate_fallbacks = 0
        self._static_alloc: Optional[np.ndarray] = None
        self.reset()

    def reset(self) -> None:
        self._pointer = 0
        self._ema: Optional[np.ndarray] = None
        self._prev_delivered: Optional[np.ndarray] = None

    def _decide_static(self) -> Schedule:
        n = len(self.rates)
        if np.all(self.rates.per_ue_rate_hz == 0):
            self.zero_rate_fallbacks += 1
            schedule, self._pointer = round_robin_decide(self._pointer, n, self.bandwidth_units)
            return schedule
        if self._static_alloc is None:
            self._static_alloc = largest_remainder_split(
                self.rates.per_ue_rate_hz, self.bandwidth_units
            )
        return Schedule(self._static_alloc.copy())

    def _decide_adaptive(self, env: UplinkEnv) -> Schedule:
        n = env.config.num_ues
        c = self.packets_per_unit
        if self._ema is None:
            # seed the EMA with the expected packets per slot from the known rates
            tau = np.array([spec.slot_duration_s for spec in env.config.arrival_specs])
            self._ema = np.maximum(self.rates.per_ue_rate_hz * tau, 1e-6)
            self._prev_delivered = env.delivered_vector.astype(float)
        else:
            delivered = env.delivered_vector.astype(float)
            delta = delivered - self._prev_delivered
            self._prev_delivered = delivered
            self._ema = (1 - self.ema_alpha) * self._ema + self.ema_alpha * delta

        alloc = np.zeros(n, dtype=np.int64)
        demand = np.ceil(env.queue_lengths / c).astype(np.int64)
        score_base = self._ema.copy()
        for _ in range(self.bandwidth_units):
            candidates = np.flatnonzero(demand > 0)
            if candidates.size == 0:
                break
            # lowest smoothed throughput first; units granted this slot count
            # against the score so one slot spreads across equally starved UEs
            scores = score_base[candidates] + alloc[candidates] * c
            pick = candidates[int(np.argmin(scores))]
            alloc[pick] += 1
            demand[pick] -= 1
        spare = self.bandwidth_units - int(alloc.sum())
        for i in range(spare):
            alloc[(self._pointer + i) % n] += 1
        self._pointer = (self._pointer + spare) % n
        return Schedule(alloc)

    def decide(self, env: Optional[UplinkEnv] = None) -> Schedule:
        if self.mode == "static":
            return self._decide_static()
        if env is None:
            raise ValueError("adaptive PF needs the environment")
        return self._decide_adaptive(env)


def enumerate_allocations(num_ues: int, budget: int):
    """Yield every nonnegative integer allocation with sum <= budget, lexicographically ascending."""
    if num_ues == 1:
        for units in range(budget + 1):
            yield (units,)
        return
    for units in range(budget + 1):
        for rest in enumerate_allocations(num_ues - 1, budget - units):
            yield (units,) + rest


def greedy_oracle_decide(env: UplinkEnv, max_ues: int = 10, max_units: int = 6) -> Schedule:
    """Exhaustive one-slot argmax of the reward over all feasible allocations.

    Every candidate is evaluated through a cloned environment step, so all
    candidates see the same arrival realization the real step will draw.
    Reward ties prefer the candidate delivering more packets (a stale FCFS
    head can make serving and idling score identically; never idling on the
    tie keeps the queue draining), then the lexicographically largest
    allocation.
    """
    cfg = env.config
    if cfg.num_ues > max_ues or cfg.bandwidth_units > max_units:
        raise OracleSizeError(
            f"enumeration guard exceeded (N={cfg.num_ues} > {max_ues} or "
            f"B={cfg.bandwidth_units} > {max_units}); use a heuristic scheduler"
        )
    best_alloc = None
    best_key = (-math.inf, -1)
    for alloc in enumerate_allocations(cfg.num_ues, cfg.bandwidth_units):
        trial = env.clone()
        result = trial.step(Schedule(alloc))
        key = (result.reward, int(result.packets_served.sum()))
        if key >= best_key:
            best_key = key
            best_alloc = alloc
    return Schedule(best_alloc)


class GreedyOracle:
    """Per-slot brute-force reward maximizer (small instances only)."""

    def __init__(self, max_ues: int = 10, max_units: int = 6):
        self.max_ues = max_ues
        self.max_units = max_units

    def reset(self) -> None:
        pass

    def decide(self, env: UplinkEnv) -> Schedule:
        return greedy_oracle_decide(env, self.max_ues, self.max_units)


def random_decide(rng: np.random.Generator, n: int, b: int) -> Schedule:
    """Assign each of b units to a uniformly random UE."""
    picks = rng.integers(0, n, size=b)
    return Schedule(np.bincount(picks, minlength=n))


class RandomScheduler:
    """Uniform-random unit assignment; a control baseline for tests."""

    def __init__(self, num_ues: int, bandwidth_units: int, seed: int = 0):
        self.num_ues = num_ues
        self.bandwidth_units = bandwidth_units
        self._seed = seed
        self.reset()

    def reset(self) -> None:
        self._rng = np.random.default_rng(self._seed)

    def decide(self, env: Optional[UplinkEnv] = None) -> Schedule:
        return random_decide(self._rng, self.num_ues, self.bandwidth_units)


SCHEDULER_NAMES = ("rr", "pf", "oracle", "random", "ppo")


def make_scheduler(
    name: str,
    config: SimConfig,
    rates: Optional[RateAssignment] = None,
    checkpoint_path: Optional[str] = None,
    pf_mode: str = "adaptive",
    seed: int = 0,
):
    """Build a scheduler by CLI name. The PPO entry loads a trained checkpoint."""
    if name == "rr":
        return RoundRobin(config.num_ues, config.bandwidth_units)
    if name == "pf":
        if rates is None:
            raise ValueError("pf scheduler needs a RateAssignment")
        return ProportionalFair(
            rates, config.bandwidth_units, config.packets_per_unit, mode=pf_mode
        )
    if name == "oracle":
        return GreedyOracle()
    if name == "random":
        return RandomScheduler(config.num_ues, config.bandwidth_units, seed=seed)
    if name == "ppo":
        from .ppo import load_checkpoint

        if checkpoint_path is None:
            raise ValueError("ppo scheduler needs a checkpoint path")
        scheduler = load_checkpoint(checkpoint_path)
        scheduler.validate_for(config)
        return scheduler
    raise ValueError(f"unknown scheduler {name!r}, expected one of {SCHEDULER_NAMES}")
