import numpy as np
import pytest

from aoisched.traffic import ArrivalSpec, assign_rates, sample_arrivals


def draw_many(spec, seed, count):
    rng = np.random.default_rng(seed)
    return np.array([sample_arrivals(spec, rng) for _ in range(count)])


def test_constant_rate_hits_every_slot():
    spec = ArrivalSpec("constant", 1000.0, slot_duration_s=1e-3)
    assert np.all(draw_many(spec, 0, 200) == 1)


@pytest.mark.parametrize("kind", ["constant", "bernoulli", "poisson", "normal-rate"])
def test_zero_rate_is_silent(kind):
    spec = ArrivalSpec(kind, 0.0)
    assert np.all(draw_many(spec, 1, 200) == 0)


def test_poisson_monte_carlo_mean():
    # mean packets/slot 0.5; 1e6 seeded draws must land in [0.498, 0.502]
    spec = ArrivalSpec("poisson", 500.0, slot_duration_s=1e-3)
    mean = draw_many(spec, 7, 10**6).mean()
    assert 0.498 <= mean <= 0.502


@pytest.mark.parametrize(
    "kind,rate,variance",
    [
        ("constant", 700.0, 0.0),
        ("bernoulli", 500.0, 0.0),
        ("poisson", 500.0, 0.0),
        ("normal-rate", 5000.0, 250000.0),  # per-slot mean 5, std 0.5
    ],
)
def test_empirical_mean_matches_rate(kind, rate, variance):
    spec = ArrivalSpec(kind, rate, rate_variance=variance)
    draws = draw_many(spec, 42, 10**6)
    assert draws.min() >= 0
    assert draws.mean() == pytest.approx(spec.packets_per_slot, rel=0.01)


@pytest.mark.parametrize("kind,rate", [("bernoulli", 500.0), ("poisson", 500.0)])
def test_memoryless_kinds_have_no_lag_correlation(kind, rate):
    draws = draw_many(ArrivalSpec(kind, rate), 99, 10**6).astype(float)
    x, y = draws[:-1], draws[1:]
    rho = np.corrcoef(x, y)[0, 1]
    assert abs(rho) < 0.01


def test_draws_are_integers_and_deterministic():
    spec = ArrivalSpec("poisson", 800.0)
    a = draw_many(spec, 5, 500)
    b = draw_many(spec, 5, 500)
    assert a.dtype.kind == "i"
    assert np.array_equal(a, b)


def test_assign_rates_degenerate_interval():
    rates = assign_rates(3, 100.0, 100.0, np.random.default_rng(0))
    assert np.allclose(rates.per_ue_rate_hz, [100.0, 100.0, 100.0])


def test_assign_rates_within_surveyed_range():
    rates = assign_rates(20, 60.0, 1300.0, np.random.default_rng(3))
    assert len(rates) == 20
    assert np.all(rates.per_ue_rate_hz >= 60.0)
    assert np.all(rates.per_ue_rate_hz <= 1300.0)


def test_assign_rates_deterministic_under_seed():
    a = assign_rates(8, 60.0, 1300.0, np.random.default_rng(11))
    b = assign_rates(8, 60.0, 1300.0, np.random.default_rng(11))
    assert np.array_equal(a.per_ue_rate_hz, b.per_ue_rate_hz)


def test_assign_rates_rejects_inverted_interval():
    with pytest.raises(ValueError):
        assign_rates(2, 200.0, 100.0, np.random.default_rng(0))


def test_spec_validation():
    with pytest.raises(ValueError):
        ArrivalSpec("weibull", 100.0)
    with pytest.raises(ValueError):
        ArrivalSpec("poisson", -1.0)
    with pytest.raises(ValueError):
        ArrivalSpec("poisson", 100.0, slot_duration_s=0.0)
