"""PPO actor-critic scheduler trained against the uplink environment.

The action space factors the bandwidth split into independent categorical
unit assignments: the actor emits one logit per UE, a schedule is b draws
from the softmax, and its likelihood is the multinomial probability of
the resulting unit counts. Updates use clipped-surrogate minibatch epochs
with generalized advantage estimation and separate Adam optimizers for
actor and critic.
"""

from __future__ import annotations

import json
import math
import struct
from collections import deque
from dataclasses import dataclass, asdict
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import gammaln

from .env import ConfigError, Schedule, SimConfig, UplinkEnv
from .nn import AdamState, Mlp, adam_step, backward, forward, init_mlp, params_from_bytes, params_to_bytes

CHECKPOINT_VERSION = 1
CURVE_COLUMNS = ("iteration", "mean_reward", "mean_aoi", "throughput", "clip_fraction")


@dataclass
class PpoHyperparams:
    gamma: float = 0.95
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    epochs: int = 10
    minibatch_size: int = 80
    rollout_length: int = 2048
    actor_lr: float = 3e-4
    critic_lr: float = 1e-3
    entropy_coef: float = 0.01
    max_iterations: int = 150
    hidden_width: int = 64
    window_k: int = 10
    convergence_tol: float = 1e-3
    convergence_patience: int = 20

    def validate(self) -> None:
        if not 0 <= self.gamma <= 1:
            raise ConfigError("gamma must be in [0, 1]")
        if not 0 <= self.gae_lambda <= 1:
            raise ConfigError("gae_lambda must be in [0, 1]")
        if self.clip_epsilon <= 0:
            raise ConfigError("clip_epsilon must be > 0")
        if self.epochs < 1 or self.max_iterations < 1:
            raise ConfigError("epochs and max_iterations must be >= 1")
        if self.minibatch_size < 1 or self.rollout_length < 1:
            raise ConfigError("minibatch_size and rollout_length must be >= 1")
        if self.minibatch_size > self.rollout_length:
            raise ConfigError("minibatch_size must not exceed rollout_length")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ConfigError("learning rates must be > 0")
        if self.entropy_coef < 0:
            raise ConfigError("entropy_coef must be >= 0")


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def sample_action(logits: np.ndarray, b: int, rng: np.random.Generator) -> Tuple[Schedule, float]:
    """Draw b unit assignments from softmax(logits); alloc[n] counts the draws on n.

    The returned log-probability is that of the ordered draw sequence
    (sum of per-draw log-softmax terms); see action_log_prob for the
    unordered allocation likelihood used in the PPO ratio.
    """
    ls = log_softmax(logits)
    picks = rng.choice(ls.size, size=b, p=np.exp(ls))
    alloc = np.bincount(picks, minlength=ls.size)
    return Schedule(alloc), float(ls[picks].sum())


def action_log_prob(logits: np.ndarray, schedule: Schedule) -> float:
    """Multinomial log-likelihood of the unit counts, coefficient included."""
    counts = schedule.alloc
    if np.any(counts < 0):
        raise ValueError("invalid schedule: negative unit counts")
    b = int(counts.sum())
    ls = log_softmax(logits)
    if counts.size != ls.size:
        raise ValueError("schedule length does not match logits")
    coeff = gammaln(b + 1) - gammaln(counts + 1).sum()
    return float(coeff + (counts * ls).sum())


def greedy_mode_alloc(probs: np.ndarray, b: int) -> np.ndarray:
    """Unit-by-unit approximation of the multinomial mode: each unit goes to
    argmax p_n / (count_n + 1); ties resolve to the lowest index."""
    counts = np.zeros(probs.size, dtype=np.int64)
    for _ in range(b):
        counts[int(np.argmax(probs / (counts + 1)))] += 1
    return counts


def compute_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    gae_lambda: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """GAE over one rollout; returns (advantages, returns).

    The rollout boundary is bootstrapped with the supplied value (the
    environment is continuing, there are no terminal states). With
    gae_lambda = 1 this reduces to discounted returns minus the value
    baseline.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if rewards.size == 0:
        raise ValueError("empty trajectory")
    advantages = np.zeros_like(rewards)
    last_adv = 0.0
    next_value = bootstrap_value
    for t in range(rewards.size - 1, -1, -1):
        delta = rewards[t] + gamma * next_value - values[t]
        last_adv = delta + gamma * gae_lambda * last_adv
        advantages[t] = last_adv
        next_value = values[t]
    return advantages, advantages + values


def normalize_advantages(advantages: np.ndarray, variance_floor: float = 1e-8) -> np.ndarray:
    adv = np.asarray(advantages, dtype=float)
    centered = adv - adv.mean()
    return centered / math.sqrt(max(float(centered.var()), variance_floor))


class ObservationBuilder:
    """Flattens per-UE (queue, age, recent throughput) triples into a 3N vector.

    Queue length is scaled by capacity, throughput (mean deliveries over
    the last window_k slots) by the per-slot service capacity, and age by
    a running maximum with floor 1 that freezes at evaluation time.
    """

    def __init__(
        self,
        num_ues: int,
        queue_capacity: int,
        service_capacity: int,
        window_k: int = 10,
        aoi_norm: float = 1.0,
        frozen: bool = False,
    ):
        self.num_ues = num_ues
        self.queue_capacity = queue_capacity
        self.service_capacity = service_capacity
        self.window_k = window_k
        self.aoi_norm = max(float(aoi_norm), 1.0)
        self.frozen = frozen
        self.reset()

    def reset(self) -> None:
        """Clear the throughput windows for a fresh episode; the age scale persists."""
        self._windows = [deque(maxlen=self.window_k) for _ in range(self.num_ues)]
        self._prev_delivered = np.zeros(self.num_ues)

    def observe(self, env: UplinkEnv) -> np.ndarray:
        delivered = env.delivered_vector.astype(float)
        delta = delivered - self._prev_delivered
        self._prev_delivered = delivered
        aois = env.aoi_vector
        if not self.frozen:
            self.aoi_norm = max(self.aoi_norm, float(aois.max()))
        queues = env.queue_lengths
        obs = np.empty(3 * self.num_ues)
        for n in range(self.num_ues):
            window = self._windows[n]
            window.append(delta[n])
            throughput = sum(window) / len(window)
            obs[3 * n] = queues[n] / self.queue_capacity
            obs[3 * n + 1] = aois[n] / self.aoi_norm
            obs[3 * n + 2] = throughput / self.service_capacity
        return obs


@dataclass
class Trajectory:
    """One rollout of per-slot records plus derived advantage estimates."""

    observations: np.ndarray
    counts: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    bootstrap_value: float
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None
    advantages_norm: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.rewards.size

    def finalize(self, hp: PpoHyperparams) -> "Trajectory":
        self.advantages, self.returns = compute_advantages(
            self.rewards, self.values, self.bootstrap_value, hp.gamma, hp.gae_lambda
        )
        self.advantages_norm = normalize_advantages(self.advantages)
        return self


def actor_loss_and_grad(
    logits: np.ndarray,
    counts: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    clip_epsilon: float,
    entropy_coef: float,
):
    """Clipped-surrogate actor loss and its exact gradient w.r.t. the logits.

    Gradient flows through the probability ratio only where the unclipped
    term attains the min; clipped samples contribute nothing through the
    ratio. Returns (loss, dloss/dlogits, diagnostics).
    """
    m = logits.shape[0]
    ls = log_softmax(logits)
    probs = np.exp(ls)
    b = counts.sum(axis=1)
    coeff = gammaln(b + 1) - gammaln(counts + 1).sum(axis=1)
    new_logp = coeff + (counts * ls).sum(axis=1)
    ratio = np.exp(new_logp - old_log_probs)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantages
    surrogate = np.minimum(unclipped, clipped)
    active = unclipped <= clipped

    entropy = -(probs * ls).sum(axis=1)
    loss = float(-surrogate.mean() - entropy_coef * entropy.mean())

    # d(-surr)/d(new_logp) = -active * ratio * A; d(new_logp)/dlogits = counts - b p
    dsurr = np.where(active, ratio * advantages, 0.0) / m
    dlogits = -dsurr[:, None] * (counts - b[:, None] * probs)
    dentropy = -probs * (ls + entropy[:, None])
    dlogits -= (entropy_coef / m) * dentropy

    diagnostics = {
        "mean_ratio": float(ratio.mean()),
        "clip_fraction": float(np.mean(unclipped > clipped)),
        "entropy": float(entropy.mean()),
    }
    return loss, dlogits, diagnostics


class PpoAgent:
    """Actor-critic pair with Adam state, rollout collection and updates.

    The critic learns in a normalized value space: a running mean/std of
    observed returns maps between network outputs and reward-scale values,
    so Adam's bounded step size is never asked to bridge the raw return
    magnitude.
    """

    def __init__(self, config: SimConfig, hp: PpoHyperparams, seed: int):
        config.validate()
        hp.validate()
        self.config = config
        self.hp = hp
        self._rng = np.random.default_rng(seed)
        n = config.num_ues
        obs_dim = 3 * n
        h = hp.hidden_width
        self.actor = init_mlp((obs_dim, h, h, n), self._rng)
        self.critic = init_mlp((obs_dim, h, h, 1), self._rng)
        self.actor_opt = AdamState.for_mlp(self.actor, hp.actor_lr)
        self.critic_opt = AdamState.for_mlp(self.critic, hp.critic_lr)
        self.builder = ObservationBuilder(
            n, config.queue_capacity, config.service_capacity, hp.window_k
        )
        self.value_offset = 0.0
        self.value_scale = 1.0
        self._value_stats_ready = False

    def _raw_value(self, obs: np.ndarray) -> np.ndarray:
        out, _ = forward(self.critic, obs)
        return out[..., 0] * self.value_scale + self.value_offset

    def _update_value_stats(self, returns: np.ndarray) -> None:
        mean = float(returns.mean())
        std = max(float(returns.std()), 1e-4)
        if not self._value_stats_ready:
            self.value_offset, self.value_scale = mean, std
            self._value_stats_ready = True
        else:
            self.value_offset = 0.9 * self.value_offset + 0.1 * mean
            self.value_scale = 0.9 * self.value_scale + 0.1 * std

    def collect_rollout(self, env: UplinkEnv):
        """Run rollout_length slots under the stochastic policy.

        Returns (trajectory, metrics) where metrics carry the mean reward,
        the mean pre-step age, and the delivered packets per slot.
        """
        hp = self.hp
        steps = hp.rollout_length
        n = self.config.num_ues
        self.builder.reset()
        observations = np.empty((steps, 3 * n))
        counts = np.empty((steps, n), dtype=np.int64)
        log_probs = np.empty(steps)
        rewards = np.empty(steps)
        values = np.empty(steps)
        aoi_sum = 0.0
        served_total = 0
        for t in range(steps):
            aoi_sum += float(env.aoi_vector.sum())
            obs = self.builder.observe(env)
            logits, _ = forward(self.actor, obs)
            schedule, _ = sample_action(logits, self.config.bandwidth_units, self._rng)
            result = env.step(schedule)
            observations[t] = obs
            counts[t] = schedule.alloc
            log_probs[t] = action_log_prob(logits, schedule)
            rewards[t] = result.reward
            values[t] = float(self._raw_value(obs))
            served_total += int(result.packets_served.sum())
        final_obs = self.builder.observe(env)
        trajectory = Trajectory(
            observations, counts, log_probs, rewards, values, float(self._raw_value(final_obs))
        ).finalize(hp)
        metrics = {
            "mean_reward": float(rewards.mean()),
            "mean_aoi": aoi_sum / (steps * n),
            "throughput": served_total / steps,
        }
        return trajectory, metrics

    def update(self, trajectory: Trajectory) -> dict:
        """Clipped-surrogate epochs over shuffled minibatches.

        A non-finite loss aborts the whole update and restores the
        pre-update parameters and optimizer state before raising.
        """
        hp = self.hp
        if trajectory.advantages_norm is None:
            raise ValueError("advantages must be computed before updating")
        snapshot = (
            self.actor.copy(),
            self.critic.copy(),
            _copy_adam(self.actor_opt),
            _copy_adam(self.critic_opt),
            (self.value_offset, self.value_scale, self._value_stats_ready),
        )
        self._update_value_stats(trajectory.returns)
        norm_returns = (trajectory.returns - self.value_offset) / self.value_scale
        stats = {"actor_loss": [], "critic_loss": [], "mean_ratio": [], "clip_fraction": []}
        try:
            size = len(trajectory)
            for _ in range(hp.epochs):
                order = self._rng.permutation(size)
                for start in range(0, size, hp.minibatch_size):
                    idx = order[start : start + hp.minibatch_size]
                    obs = trajectory.observations[idx]
                    logits, cache = forward(self.actor, obs)
                    loss_a, dlogits, diag = actor_loss_and_grad(
                        logits,
                        trajectory.counts[idx],
                        trajectory.log_probs[idx],
                        trajectory.advantages_norm[idx],
                        hp.clip_epsilon,
                        hp.entropy_coef,
                    )
                    v, vcache = forward(self.critic, obs)
                    err = v[:, 0] - norm_returns[idx]
                    loss_c = float(np.mean(err**2))
                    if not (math.isfinite(loss_a) and math.isfinite(loss_c)):
                        raise FloatingPointError(
                            f"non-finite loss (actor={loss_a}, critic={loss_c})"
                        )
                    adam_step(self.actor, backward(self.actor, cache, dlogits), self.actor_opt)
                    dv = (2.0 / err.size) * err[:, None]
                    adam_step(self.critic, backward(self.critic, vcache, dv), self.critic_opt)
                    stats["actor_loss"].append(loss_a)
                    stats["critic_loss"].append(loss_c)
                    stats["mean_ratio"].append(diag["mean_ratio"])
                    stats["clip_fraction"].append(diag["clip_fraction"])
        except (FloatingPointError, ValueError):
            self.actor, self.critic, self.actor_opt, self.critic_opt, value_stats = snapshot
            self.value_offset, self.value_scale, self._value_stats_ready = value_stats
            raise
        return {key: float(np.mean(vals)) for key, vals in stats.items()}

    def make_scheduler(self, deterministic: bool = True, seed: int = 0) -> "PpoScheduler":
        builder = ObservationBuilder(
            self.config.num_ues,
            self.config.queue_capacity,
            self.config.service_capacity,
            self.hp.window_k,
            aoi_norm=self.builder.aoi_norm,
            frozen=True,
        )
        return PpoScheduler(
            actor=self.actor.copy(),
            num_ues=self.config.num_ues,
            bandwidth_units=self.config.bandwidth_units,
            packets_per_unit=self.config.packets_per_unit,
            builder=builder,
            hyperparams=self.hp,
            critic=self.critic.copy(),
            deterministic=deterministic,
            seed=seed,
        )


def _copy_adam(state: AdamState) -> AdamState:
    return AdamState(
        learning_rate=state.learning_rate,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
        step_count=state.step_count,
        m_weights=[m.copy() for m in state.m_weights],
        v_weights=[v.copy() for v in state.v_weights],
        m_biases=[m.copy() for m in state.m_biases],
        v_biases=[v.copy() for v in state.v_biases],
    )


class PpoScheduler:
    """Frozen trained policy conforming to the scheduler interface.

    Deterministic mode assigns units by the greedy multinomial mode of the
    softmax; stochastic mode samples like training does.
    """

    def __init__(
        self,
        actor: Mlp,
        num_ues: int,
        bandwidth_units: int,
        packets_per_unit: int,
        builder: ObservationBuilder,
        hyperparams: PpoHyperparams,
        critic: Optional[Mlp] = None,
        deterministic: bool = True,
        seed: int = 0,
    ):
        self.actor = actor
        self.critic = critic
        self.num_ues = num_ues
        self.bandwidth_units = bandwidth_units
        self.packets_per_unit = packets_per_unit
        self.builder = builder
        self.hyperparams = hyperparams
        self.deterministic = deterministic
        self._seed = seed
        self.reset()

    def reset(self) -> None:
        self.builder.reset()
        self._rng = np.random.default_rng(self._seed)

    def validate_for(self, config: SimConfig) -> None:
        if (
            config.num_ues != self.num_ues
            or config.bandwidth_units != self.bandwidth_units
            or config.packets_per_unit != self.packets_per_unit
        ):
            raise ConfigError(
                "checkpoint was trained for "
                f"N={self.num_ues}, B={self.bandwidth_units}, c={self.packets_per_unit}; "
                f"config has N={config.num_ues}, B={config.bandwidth_units}, c={config.packets_per_unit}"
            )

    def decide(self, env: UplinkEnv) -> Schedule:
        self.validate_for(env.config)
        obs = self.builder.observe(env)
        logits, _ = forward(self.actor, obs)
        if self.deterministic:
            return Schedule(greedy_mode_alloc(softmax(logits), self.bandwidth_units))
        schedule, _ = sample_action(logits, self.bandwidth_units, self._rng)
        return schedule


def train_ppo(config: SimConfig, hp: PpoHyperparams, seed: int):
    """Alternate rollout collection and updates for up to max_iterations.

    Each iteration runs on a freshly reset environment with an
    iteration-derived arrival seed so training-curve points are
    comparable. Stops early once the moving-average reward improvement
    over the patience window falls below the tolerance. Returns the
    trained scheduler (deterministic mode) and the per-iteration curve.
    """
    agent = PpoAgent(config, hp, seed)
    env = UplinkEnv(config)
    curve: List[dict] = []
    rewards_seen: List[float] = []
    for k in range(1, hp.max_iterations + 1):
        rollout_seed = int(np.random.SeedSequence([seed, k]).generate_state(1, np.uint64)[0])
        env.reset(seed=rollout_seed)
        trajectory, metrics = agent.collect_rollout(env)
        diag = agent.update(trajectory)
        curve.append(
            {
                "iteration": k,
                "mean_reward": metrics["mean_reward"],
                "mean_aoi": metrics["mean_aoi"],
                "throughput": metrics["throughput"],
                "clip_fraction": diag["clip_fraction"],
            }
        )
        rewards_seen.append(metrics["mean_reward"])
        patience = hp.convergence_patience
        if len(rewards_seen) >= 2 * patience:
            recent = float(np.mean(rewards_seen[-patience:]))
            previous = float(np.mean(rewards_seen[-2 * patience : -patience]))
            if recent - previous < hp.convergence_tol:
                break
    return agent.make_scheduler(), curve


def write_training_curve(curve: List[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CURVE_COLUMNS) + "\n")
        for row in curve:
            fh.write(
                f"{row['iteration']},{row['mean_reward']!r},{row['mean_aoi']!r},"
                f"{row['throughput']!r},{row['clip_fraction']!r}\n"
            )


def save_checkpoint(path, scheduler: PpoScheduler) -> None:
    """Single-file checkpoint: version byte, JSON header, actor then critic blobs."""
    header = {
        "num_ues": scheduler.num_ues,
        "bandwidth_units": scheduler.bandwidth_units,
        "packets_per_unit": scheduler.packets_per_unit,
        "queue_capacity": scheduler.builder.queue_capacity,
        "window_k": scheduler.builder.window_k,
        "aoi_norm": scheduler.builder.aoi_norm,
        "hyperparams": asdict(scheduler.hyperparams),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    actor_blob = params_to_bytes(scheduler.actor)
    critic_blob = params_to_bytes(scheduler.critic) if scheduler.critic is not None else b""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<B", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(struct.pack("<I", len(actor_blob)))
        fh.write(actor_blob)
        fh.write(struct.pack("<I", len(critic_blob)))
        fh.write(critic_blob)


def load_checkpoint(path, deterministic: bool = True, seed: int = 0) -> PpoScheduler:
    with open(path, "rb") as fh:
        data = fh.read()
    (version,) = struct.unpack_from("<B", data, 0)
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}")
    offset = 1
    (header_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    header = json.loads(data[offset : offset + header_len])
    offset += header_len
    (actor_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    actor = params_from_bytes(data[offset : offset + actor_len])
    offset += actor_len
    (critic_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    critic = params_from_bytes(data[offset : offset + critic_len]) if critic_len else None
    hp = PpoHyperparams(**header["hyperparams"])
    builder = ObservationBuilder(
        header["num_ues"],
        header["queue_capacity"],
        header["bandwidth_units"] * header["packets_per_unit"],
        header["window_k"],
        aoi_norm=header["aoi_norm"],
        frozen=True,
    )
    return PpoScheduler(
        actor=actor,
        num_ues=header["num_ues"],
        bandwidth_units=header["bandwidth_units"],
        packets_per_unit=header["packets_per_unit"],
        builder=builder,
        hyperparams=hp,
        critic=critic,
        deterministic=deterministic,
        seed=seed,
    )
