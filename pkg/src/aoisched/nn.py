"""Minimal dense network machinery: forward pass, exact backprop, Adam.

Networks are tanh on hidden layers with a linear output head, stored as
plain float64 arrays. The serialized layout is a version byte, the layer
dimensions, then row-major weights followed by biases per layer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

FORMAT_VERSION = 1


@dataclass
class Mlp:
    """Weights/biases for a stack of dense layers (dims[0] in, dims[-1] out)."""

    dims: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Mlp":
        return Mlp(self.dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class Gradients:
    weights: List[np.ndarray]
    biases: List[np.ndarray]


def init_mlp(dims: Sequence[int], rng: np.random.Generator) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"invalid layer dims {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, weights, biases)


def forward(mlp: Mlp, x: np.ndarray):
    """Run the network; returns (output, cache of layer activations).

    Accepts a single vector or a (batch, dim) matrix. Hidden layers apply
    tanh, the last layer is linear; the cache holds each layer's input
    activation, which is all backward() needs.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != mlp.dims[0]:
        raise ValueError(f"input width {h.shape[1]} != expected {mlp.dims[0]}")
    cache = [h]
    last = mlp.num_layers - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        h = h @ w + b
        if i < last:
            h = np.tanh(h)
        cache.append(h)
    return (h[0] if squeeze else h), cache


def backward(mlp: Mlp, cache: List[np.ndarray], output_gradient: np.ndarray) -> Gradients:
    """Exact gradients of the scalar loss whose output gradient is supplied."""
    g = np.asarray(output_gradient, dtype=float)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != cache[-1].shape:
        raise ValueError(f"output gradient shape {g.shape} != output shape {cache[-1].shape}")
    grad_w = [None] * mlp.num_layers
    grad_b = [None] * mlp.num_layers
    for i in range(mlp.num_layers - 1, -1, -1):
        if i < mlp.num_layers - 1:
            g = g * (1.0 - cache[i + 1] ** 2)  # through tanh
        grad_w[i] = cache[i].T @ g
        grad_b[i] = g.sum(axis=0)
        if i > 0:
            g = g @ mlp.weights[i].T
    return Gradients(grad_w, grad_b)


@dataclass
class AdamState:
    """First/second moment estimates plus step counter for one network."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m_weights: List[np.ndarray] = field(default_factory=list)
    v_weights: List[np.ndarray] = field(default_factory=list)
    m_biases: List[np.ndarray] = field(default_factory=list)
    v_biases: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_mlp(cls, mlp: Mlp, learning_rate: float) -> "AdamState":
        return cls(
            learning_rate=learning_rate,
            m_weights=[np.zeros_like(w) for w in mlp.weights],
            v_weights=[np.zeros_like(w) for w in mlp.weights],
            m_biases=[np.zeros_like(b) for b in mlp.biases],
            v_biases=[np.zeros_like(b) for b in mlp.biases],
        )


def adam_step(mlp: Mlp, grads: Gradients, state: AdamState):
    """Bias-corrected Adam update in place; rejects non-finite gradients untouched."""
    for g in grads.weights + grads.biases:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient; update rejected")
    state.step_count += 1
    t = state.step_count
    b1, b2, eps, lr = state.beta1, state.beta2, state.epsilon, state.learning_rate
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for params, gs, ms, vs in (
        (mlp.weights, grads.weights, state.m_weights, state.v_weights),
        (mlp.biases, grads.biases, state.m_biases, state.v_biases),
    ):
        for p, g, m, v in zip(params, gs, ms, vs):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
    return mlp, state


def params_to_bytes(mlp: Mlp) -> bytes:
    """Flat layout: version byte, layer count, dims, then per-layer W (row-major) and b."""
    parts = [struct.pack("<BI", FORMAT_VERSION, len(mlp.dims))]
    parts.append(struct.pack(f"<{len(mlp.dims)}I", *mlp.dims))
    for w, b in zip(mlp.weights, mlp.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def params_from_bytes(data: bytes) -> Mlp:
    version, ndims = struct.unpack_from("<BI", data, 0)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported parameter format version {version}")
    offset = struct.calcsize("<BI")
    dims = struct.unpack_from(f"<{ndims}I", data, offset)
    offset += struct.calcsize(f"<{ndims}I")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=offset)
        offset += 8 * fan_in * fan_out
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        weights.append(w.reshape(fan_in, fan_out).copy())
        biases.append(b.copy())
    return Mlp(tuple(dims), weights, biases)
