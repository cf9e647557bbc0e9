"""Acceptance suite: one test per criterion, each printing a PASS line.

The sweep-trend criteria share one module-scoped fixture that trains a
policy per load point and evaluates round-robin, proportional-fair and the
trained policy on ten common-random-number episodes of 20,000 slots.
"""

import itertools
import math
import time

import numpy as np
import pytest

from aoisched.cli import main as cli_main
from aoisched.env import Schedule, UplinkEnv
from aoisched.harness import ExperimentConfig, run_sweep
from aoisched.nn import backward, forward, init_mlp
from aoisched.ppo import (
    PpoHyperparams,
    action_log_prob,
    actor_loss_and_grad,
    save_checkpoint,
    train_ppo,
)
from aoisched.reference import simulate_reference
from aoisched.schedulers import enumerate_allocations, greedy_oracle_decide

from conftest import make_config, random_small_config, replay_random_episode, warmed_env


def report(criterion, detail):
    print(f"\n[criterion {criterion}] PASS - {detail}")


# -- 1. age growth law ----------------------------------------------------


def test_criterion_1_aoi_growth_law():
    horizon = 10**4
    cfg = make_config(num_ues=3, bandwidth_units=2, rate_hz=0.0, horizon=horizon)
    env = UplinkEnv(cfg)
    schedule = Schedule([1, 1, 0])
    for t in range(1, horizon + 1):
        result = env.step(schedule)
        assert np.all(result.per_ue_aoi == t)
    report(1, f"A_n(t) = t exactly for all UEs through t = {horizon}")


# -- 2. recursion vs max-over-history reference ---------------------------


def test_criterion_2_reference_equivalence():
    rng = np.random.default_rng(20260808)
    for _ in range(100):
        cfg = random_small_config(rng, max_ues=4)
        steps = int(rng.integers(10, 51))
        arrivals, schedules, aoi, served = replay_random_episode(cfg, steps, rng)
        ref = simulate_reference(arrivals, schedules, cfg.queue_capacity, cfg.packets_per_unit)
        assert ref["aoi"] == aoi
        assert ref["served"] == served
    report(2, "100 random instances (N <= 4, T <= 50) match the reference exactly")


# -- 3. greedy oracle attains the enumeration maximum ---------------------


def test_criterion_3_oracle_argmax():
    rng = np.random.default_rng(31337)
    for _ in range(100):
        n = int(rng.integers(2, 6))
        b = int(rng.integers(1, min(n, 4)))
        cfg = make_config(
            num_ues=n,
            bandwidth_units=b,
            rates_hz=rng.uniform(0, 1500, n),
            seed=int(rng.integers(0, 2**32)),
            queue_capacity=int(rng.integers(1, 10)),
            packets_per_unit=int(rng.integers(1, 3)),
            aoi_weight=float(rng.uniform(0.0, 0.3)),
        )
        env = warmed_env(rng, cfg)
        chosen = greedy_oracle_decide(env)
        chosen_reward = env.clone().step(chosen).reward
        best = max(
            env.clone().step(Schedule(alloc)).reward
            for alloc in enumerate_allocations(n, b)
        )
        assert chosen_reward == best
    report(3, "oracle reward equals the full enumeration maximum on 100 random states")


# -- 4. gradient checks ----------------------------------------------------


def central_difference_worst_error(loss_fn, params_arrays, analytic_arrays, h=1e-5):
    worst = 0.0
    for p, g in zip(params_arrays, analytic_arrays):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = loss_fn()
            flat[i] = keep - h
            down = loss_fn()
            flat[i] = keep
            numeric = (up - down) / (2 * h)
            denom = max(abs(numeric), abs(gflat[i]), 1e-6)
            worst = max(worst, abs(numeric - gflat[i]) / denom)
    return worst


def test_criterion_4_gradient_checks():
    start = time.monotonic()
    rng = np.random.default_rng(4)

    # plain network under a quadratic loss
    mlp = init_mlp((6, 8, 8, 4), rng)
    x = rng.normal(size=(6, 6))

    def mlp_loss():
        y, _ = forward(mlp, x)
        return 0.5 * float(np.sum(y**2))

    y, cache = forward(mlp, x)
    grads = backward(mlp, cache, y)
    err_mlp = central_difference_worst_error(
        mlp_loss, mlp.weights + mlp.biases, grads.weights + grads.biases
    )
    assert err_mlp < 1e-4

    # clipped-surrogate actor loss on a fixed minibatch
    actor = init_mlp((6, 8, 8, 3), rng)
    obs = rng.normal(size=(10, 6))
    counts = np.array([list(rng.multinomial(2, [1 / 3] * 3)) for _ in range(10)])
    logits, _ = forward(actor, obs)
    new_logp = np.array([action_log_prob(logits[i], Schedule(counts[i])) for i in range(10)])
    old_logp = new_logp - rng.uniform(-0.05, 0.05, size=10)
    advantages = rng.normal(size=10)

    def actor_loss():
        lg, _ = forward(actor, obs)
        loss, _, _ = actor_loss_and_grad(
            lg, counts, old_logp, advantages, clip_epsilon=0.2, entropy_coef=0.01
        )
        return loss

    logits, cache = forward(actor, obs)
    _, dlogits, _ = actor_loss_and_grad(
        logits, counts, old_logp, advantages, clip_epsilon=0.2, entropy_coef=0.01
    )
    agrads = backward(actor, cache, dlogits)
    err_actor = central_difference_worst_error(
        actor_loss, actor.weights + actor.biases, agrads.weights + agrads.biases
    )
    assert err_actor < 1e-4

    elapsed = time.monotonic() - start
    assert elapsed < 10.0
    report(4, f"max relative errors {err_mlp:.2e} (mlp) and {err_actor:.2e} (actor) in {elapsed:.1f}s")


# -- 5. action distribution normalization ----------------------------------


def compositions(n, b):
    for cuts in itertools.combinations(range(b + n - 1), n - 1):
        prev, parts = -1, []
        for cut in cuts + (b + n - 1,):
            parts.append(cut - prev - 1)
            prev = cut
        yield tuple(parts)


def test_criterion_5_action_distribution_normalization():
    rng = np.random.default_rng(55)
    worst = 0.0
    for n in range(2, 5):
        for b in range(1, 4):
            logits = rng.normal(scale=1.5, size=n)
            total = sum(
                math.exp(action_log_prob(logits, Schedule(alloc)))
                for alloc in compositions(n, b)
            )
            worst = max(worst, abs(total - 1.0))
    assert worst <= 1e-12
    report(5, f"composition probability sums within {worst:.1e} of 1 for N <= 4, b <= 3")


# -- 6/7. saturation and throughput trends ----------------------------------

NUM_UES, UNITS, HORIZON, EPISODES = 6, 3, 20000, 10
LOW_RATE_HZ = 100.0  # total load 0.6 packets/slot = 0.2 x capacity
HIGH_RATE_HZ = 750.0  # total load 4.5 packets/slot = 1.5 x capacity
HIGH_PROFILE = [1.0, 1.0, 2.0, 2.0, 4.0, 20.0]


def sweep_experiment(rate, profile, schedulers, checkpoint=None):
    return ExperimentConfig(
        num_ues=NUM_UES,
        bandwidth_units=UNITS,
        scheduler_names=schedulers,
        sweep_rates_hz=[rate],
        rate_profile=profile,
        episodes_per_point=EPISODES,
        eval_horizon=HORIZON,
        seed=2026,
        queue_capacity=20,
        aoi_weight=0.1,
        checkpoint_path=checkpoint,
    )


@pytest.fixture(scope="module")
def trend_results(tmp_path_factory):
    """Train one policy per load point, then sweep rr/pf/ppo on shared seeds."""
    ckpt_dir = tmp_path_factory.mktemp("checkpoints")
    results = {"train_time": 0.0, "eval_time": 0.0}
    for tag, rate, profile, iters in (
        ("low", LOW_RATE_HZ, None, 200),
        ("high", HIGH_RATE_HZ, HIGH_PROFILE, 300),
    ):
        exp = sweep_experiment(rate, profile, ["rr"])
        rates = exp.point_rates(rate, np.random.default_rng(0))
        config = exp.sim_config(rates, seed=777)
        hp = PpoHyperparams(
            gamma=0.98,
            entropy_coef=0.005,
            max_iterations=iters,
            convergence_patience=60,
            convergence_tol=1e-4,
        )
        t0 = time.monotonic()
        scheduler, curve = train_ppo(config, hp, seed=7)
        results["train_time"] += time.monotonic() - t0
        ckpt = ckpt_dir / f"{tag}.ckpt"
        save_checkpoint(ckpt, scheduler)
        t0 = time.monotonic()
        report_obj = run_sweep(sweep_experiment(rate, profile, ["rr", "pf", "ppo"], str(ckpt)))
        results["eval_time"] += time.monotonic() - t0
        agg = report_obj.aggregate()
        results[tag] = {name: agg[(rate, name)] for name in ("rr", "pf", "ppo")}
    return results


def test_criterion_6_saturation_trend(trend_results):
    low = trend_results["low"]
    aois = [low[name]["mean_aoi"] for name in ("rr", "pf", "ppo")]
    spread = max(aois) / min(aois)
    assert spread <= 1.10, f"below-saturation mean AoI disagree: {aois}"

    high = trend_results["high"]
    pf, ppo, rr = (high[name]["mean_aoi"] for name in ("pf", "ppo", "rr"))
    assert pf <= ppo <= rr, f"ordering violated: pf={pf}, ppo={ppo}, rr={rr}"
    assert ppo <= 0.9 * rr, f"ppo improves on rr by less than 10%: {ppo} vs {rr}"
    assert trend_results["train_time"] <= 900.0
    assert trend_results["eval_time"] <= 120.0
    report(
        6,
        f"below-saturation spread {spread:.3f} <= 1.10; "
        f"above saturation pf={pf:.2f} <= ppo={ppo:.2f} <= rr={rr:.2f} "
        f"with ppo/rr = {ppo / rr:.2f} (train {trend_results['train_time']:.0f}s, "
        f"eval {trend_results['eval_time']:.0f}s)",
    )


def test_criterion_7_throughput_trend(trend_results):
    high = trend_results["high"]
    pf, ppo, rr = (high[name]["throughput"] for name in ("pf", "ppo", "rr"))
    assert ppo >= rr, f"throughput(ppo)={ppo} < throughput(rr)={rr}"
    assert ppo >= 0.9 * pf, f"throughput(ppo)={ppo} < 0.9*throughput(pf)={0.9 * pf}"
    report(7, f"throughput ppo={ppo:.3f} >= rr={rr:.3f} and >= 0.9*pf={0.9 * pf:.3f}")


# -- 8. training sanity on the asymmetric instance --------------------------


def test_criterion_8_training_sanity():
    start = time.monotonic()
    shares, improvements = [], []
    for seed in range(10):
        cfg = make_config(
            num_ues=2,
            bandwidth_units=1,
            rates_hz=[0.0, 1000.0],
            seed=100 + seed,
            aoi_weight=0.05,
            queue_capacity=100,
        )
        hp = PpoHyperparams(max_iterations=30)
        trained, curve = train_ppo(cfg, hp, seed=seed)
        env = UplinkEnv(cfg)
        trained.reset()
        units = np.zeros(2)
        for _ in range(2000):
            schedule = trained.decide(env)
            units += schedule.alloc
            env.step(schedule)
        shares.append(units[1] / units.sum())
        improvements.append(curve[-1]["mean_reward"] > curve[0]["mean_reward"])
    elapsed = time.monotonic() - start
    assert sum(s >= 0.9 for s in shares) >= 9, f"active-UE shares: {shares}"
    assert sum(improvements) >= 9, f"reward improvements: {improvements}"
    assert elapsed <= 180.0
    report(
        8,
        f"{sum(s >= 0.9 for s in shares)}/10 seeds give >= 90% share "
        f"(min {min(shares):.3f}); {sum(improvements)}/10 improve reward; {elapsed:.0f}s",
    )


# -- 9. CLI determinism ------------------------------------------------------


CLI_CONFIG = """
[sim]
num_ues = 4
bandwidth_units = 2
queue_capacity = 30
seed = 13

[arrival]
kind = poisson

[scheduler]
names = rr, pf, random

[sweep]
rates_hz = 150, 900
episodes_per_point = 2
eval_horizon = 300
"""


def test_criterion_9_cli_determinism(tmp_path):
    config = tmp_path / "exp.cfg"
    config.write_text(CLI_CONFIG)
    out = tmp_path / "sweep.csv"
    payloads = []
    for _ in range(2):
        code = cli_main(
            ["sweep", "--config", str(config), "--out", str(out), "--no-figures"]
        )
        assert code == 0
        payloads.append(out.read_bytes())
    assert payloads[0] == payloads[1]
    report(9, f"repeated sweep produced byte-identical CSV ({len(payloads[0])} bytes)")
