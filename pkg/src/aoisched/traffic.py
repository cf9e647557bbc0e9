"""Seeded per-UE packet arrival processes.

Rates are expressed in Hz and converted to packets per slot through the
slot duration; the distribution, not rate rounding, absorbs fractional
means. All sampling goes through an explicitly passed generator so that
callers own reproducibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ARRIVAL_KINDS = ("constant", "bernoulli", "poisson", "normal-rate")


@dataclass(frozen=True)
class ArrivalSpec:
    """One UE's arrival process: kind, mean rate, and slot duration."""

    kind: str
    rate_hz: float
    rate_variance: float = 0.0
    slot_duration_s: float = 1e-3

    def __post_init__(self):
        if self.kind not in ARRIVAL_KINDS:
            raise ValueError(f"unknown arrival kind {self.kind!r}, expected one of {ARRIVAL_KINDS}")
        if self.rate_hz < 0:
            raise ValueError("rate_hz must be >= 0")
        if self.rate_variance < 0:
            raise ValueError("rate_variance must be >= 0")
        if self.slot_duration_s <= 0:
            raise ValueError("slot_duration_s must be > 0")

    @property
    def packets_per_slot(self) -> float:
        return self.rate_hz * self.slot_duration_s


@dataclass(frozen=True)
class RateAssignment:
    """Per-UE mean arrival rates in Hz (known to the PF scheduler only)."""

    per_ue_rate_hz: np.ndarray = field(repr=False)

    def __post_init__(self):
        rates = np.asarray(self.per_ue_rate_hz, dtype=float)
        if rates.ndim != 1 or rates.size == 0:
            raise ValueError("per_ue_rate_hz must be a nonempty 1-D vector")
        if np.any(rates < 0):
            raise ValueError("rates must be nonnegative")
        object.__setattr__(self, "per_ue_rate_hz", rates)

    def __len__(self) -> int:
        return self.per_ue_rate_hz.size


def sample_arrivals(spec: ArrivalSpec, rng: np.random.Generator) -> int:
    """Draw the number of packets generated by one UE in one slot.

    constant    -- floor of the per-slot mean plus a Bernoulli unit for the
                   fractional part, so the empirical mean is exact.
    bernoulli   -- one packet with probability min(mean, 1).
    poisson     -- Poisson with the per-slot mean.
    normal-rate -- round(max(0, Normal(mean, rate_variance * tau^2))).
    """
    mean = spec.packets_per_slot
    if spec.kind == "constant":
        base = math.floor(mean)
        frac = mean - base
        return base + (1 if frac > 0 and rng.random() < frac else 0)
    if spec.kind == "bernoulli":
        return 1 if rng.random() < min(mean, 1.0) else 0
    if spec.kind == "poisson":
        return int(rng.poisson(mean))
    # normal-rate: per-slot std scales the rate std (sqrt of variance) by tau
    std = math.sqrt(spec.rate_variance) * spec.slot_duration_s
    return int(round(max(0.0, rng.normal(mean, std))))


def assign_rates(n: int, lo_hz: float, hi_hz: float, rng: np.random.Generator) -> RateAssignment:
    """Draw n per-UE mean rates uniformly from [lo_hz, hi_hz]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= lo_hz <= hi_hz:
        raise ValueError(f"invalid rate interval [{lo_hz}, {hi_hz}]")
    return RateAssignment(rng.uniform(lo_hz, hi_hz, size=n))
