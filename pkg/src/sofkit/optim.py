"""SGD and Adam, plus a deterministic training loop.

The loop owns a flat list of parameter arrays. Each step it wraps them as
autodiff Nodes, calls the loss closure, runs backward, and applies the
optimizer update in place of the stored arrays.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional

import numpy as np

from . import autodiff as ad


@dataclass
class OptimizerConfig:
    kind: str = "sgd"  # sgd | adam
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 0
    batch_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainingTrace:
    losses: List[float]
    final_params: List[np.ndarray]
    seed: int
    config: OptimizerConfig
    wall_clock: float = 0.0
    metrics: dict = field(default_factory=dict)


def sgd_step(params, grads, lr):
    if len(params) != len(grads):
        raise ValueError("params/grads length mismatch")
    return [p - lr * g for p, g in zip(params, grads)]


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, config: OptimizerConfig, t: int):
    if t < 1:
        raise ValueError("Adam step counter starts at 1")
    if len(params) != len(grads):
        raise ValueError("params/grads length mismatch")
    b1, b2 = config.beta1, config.beta2
    new_params = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1 - b1) * g
        state.v[i] = b2 * state.v[i] + (1 - b2) * g * g
        m_hat = state.m[i] / (1 - b1**t)
        v_hat = state.v[i] / (1 - b2**t)
        new_params.append(p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps))
    return new_params, state


def train(
    params: List[np.ndarray],
    loss_fn: Callable,
    config: OptimizerConfig,
    batches: Optional[Iterable] = None,
) -> TrainingTrace:
    """Minimize ``loss_fn(param_nodes, batch) -> Node``.

    With ``batches`` None the loop runs ``config.steps`` full-batch steps
    and passes batch=None; otherwise it consumes the batch stream (whose
    construction carries all randomness, keyed by the seed)."""
    params = [np.asarray(p, dtype=np.float64).copy() for p in params]
    state = AdamState.zeros_like(params) if config.kind == "adam" else None
    losses: List[float] = []
    start = time.perf_counter()

    if batches is None:
        stream = (None for _ in range(config.steps))
    else:
        stream = iter(batches)

    t = 0
    for batch in stream:
        t += 1
        nodes = [ad.Node(p) for p in params]
        out = loss_fn(nodes, batch)
        loss = float(out.value)
        if not np.isfinite(loss):
            raise FloatingPointError(
                f"non-finite loss {loss} at step {t}; check inputs and clamping"
            )
        ad.backward(out)
        grads = [n.grad if n.grad is not None else np.zeros_like(p)
                 for n, p in zip(nodes, params)]
        if config.kind == "sgd":
            params = sgd_step(params, grads, config.learning_rate)
        else:
            params, state = adam_step(params, grads, state, config, t)
        losses.append(loss)

    if t == 0:
        # zero-step trace still records the initial loss
        nodes = [ad.Node(p) for p in params]
        losses.append(float(loss_fn(nodes, None).value))

    return TrainingTrace(
        losses=losses,
        final_params=params,
        seed=config.seed,
        config=config,
        wall_clock=time.perf_counter() - start,
    )
