"""Slotted-time multi-UE uplink environment with per-UE age tracking.

Each step runs one slot in a fixed order: arrivals are drawn and enqueued
(drop-tail on overflow), the schedule is served FCFS, ages are updated,
and the utility/age reward is computed. A UE's age resets to
``slot - gen_slot`` of the newest packet it delivered this slot and
increments by one otherwise, so with no deliveries the age grows linearly
from zero.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .traffic import ArrivalSpec, sample_arrivals


class ConfigError(ValueError):
    """Raised for invalid simulation or experiment configuration."""


class InvalidActionError(ValueError):
    """Raised when a schedule violates the bandwidth contract; state is untouched."""


@dataclass
class SimConfig:
    """Static parameters of one simulation instance.

    bandwidth_units is the per-slot budget split among UEs; each unit
    serves packets_per_unit packets per slot over a lossless link.
    aoi_weight trades utility against summed age in the reward.
    """

    num_ues: int
    bandwidth_units: int
    horizon: int
    seed: int
    arrival_specs: Sequence[ArrivalSpec]
    queue_capacity: int = 100
    packets_per_unit: int = 1
    aoi_weight: float = 0.01

    def __post_init__(self):
        if isinstance(self.arrival_specs, ArrivalSpec):
            self.arrival_specs = (self.arrival_specs,) * self.num_ues
        else:
            self.arrival_specs = tuple(self.arrival_specs)
        self.validate()

    def validate(self) -> None:
        if self.num_ues < 1:
            raise ConfigError("num_ues must be >= 1")
        if not 0 < self.bandwidth_units < self.num_ues:
            raise ConfigError(
                f"bandwidth_units must satisfy 0 < B < N, got B={self.bandwidth_units}, N={self.num_ues}"
            )
        if self.queue_capacity < 1:
            raise ConfigError("queue_capacity must be >= 1")
        if self.packets_per_unit < 1:
            raise ConfigError("packets_per_unit must be >= 1")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.aoi_weight < 0:
            raise ConfigError("aoi_weight must be >= 0")
        if len(self.arrival_specs) != self.num_ues:
            raise ConfigError(
                f"need one arrival spec per UE, got {len(self.arrival_specs)} for {self.num_ues} UEs"
            )

    @property
    def service_capacity(self) -> int:
        """Maximum packets the network can deliver in one slot."""
        return self.bandwidth_units * self.packets_per_unit


class Schedule:
    """Per-slot bandwidth allocation vector; alloc[n] units to UE n."""

    __slots__ = ("alloc",)

    def __init__(self, alloc):
        self.alloc = np.asarray(alloc, dtype=np.int64)

    @property
    def total_units(self) -> int:
        return int(self.alloc.sum())

    @property
    def selected(self) -> np.ndarray:
        """Boolean mask of UEs receiving at least one unit."""
        return self.alloc > 0

    def validate_for(self, config: SimConfig) -> None:
        if self.alloc.ndim != 1 or self.alloc.size != config.num_ues:
            raise InvalidActionError(
                f"alloc length {self.alloc.size} does not match num_ues {config.num_ues}"
            )
        if np.any(self.alloc < 0):
            raise InvalidActionError("alloc entries must be nonnegative")
        if self.total_units > config.bandwidth_units:
            raise InvalidActionError(
                f"alloc sums to {self.total_units} > bandwidth budget {config.bandwidth_units}"
            )

    def __repr__(self):
        return f"Schedule({self.alloc.tolist()})"

    def __eq__(self, other):
        return isinstance(other, Schedule) and np.array_equal(self.alloc, other.alloc)


@dataclass
class UeState:
    """One UE's FCFS queue (generation slots, head oldest) and age bookkeeping."""

    queue: deque = field(default_factory=deque)
    aoi: int = 0
    delivered_packets: int = 0
    last_delivery_gen_slot: Optional[int] = None
    arrivals_total: int = 0
    dropped_total: int = 0


@dataclass
class StepResult:
    """Per-slot outcome: reward, per-UE utility/age, and packet accounting."""

    reward: float
    per_ue_utility: np.ndarray
    per_ue_aoi: np.ndarray
    packets_served: np.ndarray
    packets_dropped: np.ndarray
    packets_arrived: np.ndarray


def node_utility(b: int, x: int, selected: bool) -> float:
    """Sigmoid utility of allocating b units against x fresh arrivals.

    Zero for unselected UEs; otherwise 1 / (1 + exp(-(1.5*b - x))),
    always in [0, 1).
    """
    if not selected:
        return 0.0
    z = 1.5 * b - x
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def slot_reward(utilities, aois, aoi_weight: float) -> float:
    """Weighted per-slot objective: sum of utilities minus aoi_weight times summed age."""
    utilities = np.asarray(utilities, dtype=float)
    aois = np.asarray(aois, dtype=float)
    if utilities.shape != aois.shape:
        raise ValueError(f"length mismatch: {utilities.shape} vs {aois.shape}")
    return float(utilities.sum() - aoi_weight * aois.sum())


class UplinkEnv:
    """Sequential slotted environment; one instance must not be stepped concurrently.

    All randomness flows through the per-instance generator seeded at
    reset, so identical (config, seed, schedule sequence) reproduce
    bit-identical trajectories.
    """

    def __init__(self, config: SimConfig):
        config.validate()
        self.config = config
        self.reset()

    def reset(self, seed: Optional[int] = None) -> "UplinkEnv":
        """Empty all queues, zero all ages, restart the slot counter and RNG.

        The RNG is reseeded from config.seed unless an override is given
        (used by training to vary arrival realizations across rollouts).
        """
        self._rng = np.random.default_rng(self.config.seed if seed is None else seed)
        self.slot = 0
        self.ues = [UeState() for _ in range(self.config.num_ues)]
        return self

    # -- read-only views used by schedulers and observation builders --

    @property
    def aoi_vector(self) -> np.ndarray:
        return np.array([ue.aoi for ue in self.ues], dtype=np.int64)

    @property
    def queue_lengths(self) -> np.ndarray:
        return np.array([len(ue.queue) for ue in self.ues], dtype=np.int64)

    @property
    def delivered_vector(self) -> np.ndarray:
        return np.array([ue.delivered_packets for ue in self.ues], dtype=np.int64)

    def clone(self) -> "UplinkEnv":
        """Deep copy including RNG state; the clone evolves independently."""
        other = object.__new__(UplinkEnv)
        other.config = self.config
        other.slot = self.slot
        other.ues = [
            UeState(
                queue=deque(ue.queue),
                aoi=ue.aoi,
                delivered_packets=ue.delivered_packets,
                last_delivery_gen_slot=ue.last_delivery_gen_slot,
                arrivals_total=ue.arrivals_total,
                dropped_total=ue.dropped_total,
            )
            for ue in self.ues
        ]
        other._rng = np.random.default_rng()
        other._rng.bit_generator.state = self._rng.bit_generator.state
        return other

    def step(self, schedule: Schedule) -> StepResult:
        """Advance one slot: arrivals, FCFS service, age update, reward.

        Raises InvalidActionError (before any state change) if the
        schedule breaks the budget or has the wrong length.
        """
        schedule.validate_for(self.config)
        cfg = self.config
        t = self.slot
        n_ues = cfg.num_ues

        arrived = np.zeros(n_ues, dtype=np.int64)
        dropped = np.zeros(n_ues, dtype=np.int64)
        served = np.zeros(n_ues, dtype=np.int64)

        # 1. arrivals, drop-tail beyond queue capacity
        for n, ue in enumerate(self.ues):
            x = sample_arrivals(cfg.arrival_specs[n], self._rng)
            space = cfg.queue_capacity - len(ue.queue)
            accepted = min(x, space)
            if accepted:
                ue.queue.extend([t] * accepted)
            ue.arrivals_total += x
            ue.dropped_total += x - accepted
            arrived[n] = x
            dropped[n] = x - accepted

        # 2. FCFS service from the head, then 3. age update
        for n, ue in enumerate(self.ues):
            k = min(len(ue.queue), int(schedule.alloc[n]) * cfg.packets_per_unit)
            if k > 0:
                last_gen = 0
                for _ in range(k):
                    last_gen = ue.queue.popleft()
                ue.delivered_packets += k
                ue.last_delivery_gen_slot = last_gen
                ue.aoi = t - last_gen
            else:
                ue.aoi += 1
            served[n] = k

        # 4. utility and reward on the post-update ages
        utilities = np.array(
            [
                node_utility(int(schedule.alloc[n]), int(arrived[n]), bool(schedule.alloc[n] > 0))
                for n in range(n_ues)
            ]
        )
        aois = self.aoi_vector
        reward = slot_reward(utilities, aois, cfg.aoi_weight)

        # 5. advance the slot counter
        self.slot = t + 1
        return StepResult(
            reward=reward,
            per_ue_utility=utilities,
            per_ue_aoi=aois,
            packets_served=served,
            packets_dropped=dropped,
            packets_arrived=arrived,
        )
