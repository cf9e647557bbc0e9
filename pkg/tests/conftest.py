"""Shared helpers for building small random instances and replaying them."""

import numpy as np
import pytest

from aoisched.env import Schedule, SimConfig, UplinkEnv
from aoisched.traffic import ArrivalSpec


def make_config(
    num_ues=2,
    bandwidth_units=1,
    rate_hz=0.0,
    kind="poisson",
    horizon=1000,
    seed=0,
    queue_capacity=100,
    packets_per_unit=1,
    aoi_weight=0.01,
    rates_hz=None,
):
    """Small-instance config; rates_hz overrides the scalar rate per UE."""
    if rates_hz is None:
        rates_hz = [rate_hz] * num_ues
    specs = [ArrivalSpec(kind, float(r)) for r in rates_hz]
    return SimConfig(
        num_ues=num_ues,
        bandwidth_units=bandwidth_units,
        horizon=horizon,
        seed=seed,
        arrival_specs=specs,
        queue_capacity=queue_capacity,
        packets_per_unit=packets_per_unit,
        aoi_weight=aoi_weight,
    )


def random_small_config(rng, max_ues=4, max_capacity=8):
    n = int(rng.integers(2, max_ues + 1))
    return make_config(
        num_ues=n,
        bandwidth_units=int(rng.integers(1, n)),
        rates_hz=rng.uniform(0, 1500, n),
        seed=int(rng.integers(0, 2**32)),
        queue_capacity=int(rng.integers(1, max_capacity)),
        packets_per_unit=int(rng.integers(1, 3)),
    )


def random_schedule(rng, config) -> Schedule:
    alloc = np.zeros(config.num_ues, dtype=np.int64)
    for _ in range(int(rng.integers(0, config.bandwidth_units + 1))):
        alloc[int(rng.integers(0, config.num_ues))] += 1
    return Schedule(alloc)


def replay_random_episode(config, steps, rng):
    """Step the env under random schedules; return (arrivals, schedules, aoi, served) traces."""
    env = UplinkEnv(config)
    arrivals, schedules, aoi, served = [], [], [], []
    for _ in range(steps):
        schedule = random_schedule(rng, config)
        result = env.step(schedule)
        schedules.append(schedule.alloc.tolist())
        arrivals.append(result.packets_arrived.tolist())
        aoi.append(result.per_ue_aoi.tolist())
        served.append(result.packets_served.tolist())
    return arrivals, schedules, aoi, served


def warmed_env(rng, config, max_warm_steps=30) -> UplinkEnv:
    """Environment advanced through a random number of random-schedule slots."""
    env = UplinkEnv(config)
    for _ in range(int(rng.integers(0, max_warm_steps))):
        env.step(random_schedule(rng, config))
    return env


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
