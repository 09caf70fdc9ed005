"""Statistical models: Fourier/Walsh perceptron over the Boolean cube,
sigmoid-output MLP with its induced Bernoulli-product model distribution,
and the isotropic bivariate normal density.

The FSP expresses g(s) = sum_w alpha_w * (-1)^<w,s> and a softmax head
turns the 2^n values into a distribution, so every target distribution is
reachable (approximately, since zero entries are floored before the log).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Sequence

import numpy as np

from . import autodiff as ad

MAX_PRODUCT_VARS = 20


# --- Walsh basis and FSP -----------------------------------------------------


@lru_cache(maxsize=None)
def walsh_matrix(n: int) -> np.ndarray:
    """2^n x 2^n matrix B[w, s] = (-1)^popcount(w & s); B @ B = 2^n I."""
    size = 1 << n
    idx = np.arange(size)
    parity = np.zeros((size, size), dtype=np.int64)
    both = idx[:, None] & idx[None, :]
    for bit in range(n):
        parity += (both >> bit) & 1
    return np.where(parity % 2 == 0, 1.0, -1.0)


@dataclass
class FSPModel:
    n: int
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if self.coefficients.shape != (1 << self.n,):
            raise ValueError(
                f"expected {1 << self.n} coefficients, got {self.coefficients.shape}"
            )


def fsp_values(coefficients, n: int):
    """Walsh synthesis g(s) = sum_w alpha_w (-1)^<w,s>; arrays or Nodes."""
    return ad.matvec(walsh_matrix(n), coefficients)


def fsp_distribution_from(coefficients, n: int):
    """Squared-normalization head: f(s) = g(s)^2 / sum g^2.

    This is the sphere parametrization sqrt(f) = g/|g| of the simplex, so
    Fisher-Rao gradients stay useful even where f(s) is near zero (a
    softmax head saturates there and cannot leave a disjoint-support
    initialization within the experiment-1 step budget)."""
    g = fsp_values(coefficients, n)
    g2 = ad.mul(g, g)
    return ad.div(g2, ad.sum(g2, axis=-1))


def fsp_distribution(m: FSPModel) -> np.ndarray:
    return fsp_distribution_from(m.coefficients, m.n)


def init_from_target(target, floor: float = 1e-4) -> FSPModel:
    """Coefficients whose output distribution approximates ``target``; zero
    entries are floored, so disjoint-support targets are only approximate
    (output is within total variation ~3e-4 of the target)."""
    target = np.asarray(target, dtype=np.float64)
    size = target.size
    n = int(round(np.log2(size)))
    if 1 << n != size:
        raise ValueError(f"target length {size} is not a power of two")
    amplitudes = np.sqrt(np.maximum(target, floor))
    coeffs = walsh_matrix(n) @ amplitudes / size
    return FSPModel(n, coeffs)


# --- MLP ---------------------------------------------------------------------


@dataclass
class MLPModel:
    """ReLU hidden layers, sigmoid output head (per-class probabilities,
    not softmax-normalized)."""

    layer_sizes: List[int]
    weights: List[np.ndarray] = field(default_factory=list)
    biases: List[np.ndarray] = field(default_factory=list)
    seed: int = 0

    @classmethod
    def init(cls, layer_sizes: Sequence[int], seed: int = 0) -> "MLPModel":
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(list(layer_sizes), weights, biases, seed)

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def set_params(self, params):
        k = len(self.weights)
        self.weights = [np.asarray(params[2 * i]) for i in range(k)]
        self.biases = [np.asarray(params[2 * i + 1]) for i in range(k)]

    def param_count(self) -> int:
        return int(sum(p.size for p in self.params()))

    def forward(self, x):
        return mlp_forward(self.weights, self.biases, x)


def mlp_forward(weights, biases, x):
    """Forward pass; ``x`` is one input (in,) or a batch (batch, in).
    Accepts arrays or Nodes for the parameters."""
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        h = ad.add(ad.matvec(w, h), b)
        h = ad.sigmoid(h) if i == last else ad.relu(h)
    return h


def mse_loss(p, target):
    """Mean of squared differences over all entries."""
    if ad._any_node(p, target):
        d = ad.sub(p, target)
        return ad.mean(ad.mul(d, d))
    p = np.asarray(p, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if p.shape != target.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {target.shape}")
    return float(np.mean((p - target) ** 2))


def accuracy(outputs, labels) -> float:
    outputs = np.asarray(outputs, dtype=np.float64)
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("accuracy of an empty set is undefined")
    preds = np.argmax(outputs, axis=-1)
    return float(np.mean(preds == labels))


# --- Bernoulli-product distribution ------------------------------------------


@lru_cache(maxsize=None)
def assignment_bits(k: int) -> np.ndarray:
    """(2^k, k) binary matrix, row i = bits of i with x1 most significant."""
    idx = np.arange(1 << k)
    return ((idx[:, None] >> np.arange(k - 1, -1, -1)[None, :]) & 1).astype(np.float64)


def bernoulli_product_distribution(p):
    """Distribution over 2^k assignments induced by k independent
    probabilities: omega(s) = prod p_i^{s_i} (1-p_i)^{1-s_i}."""
    k = p.shape[-1] if isinstance(p, ad.Node) else np.asarray(p).shape[-1]
    if k > MAX_PRODUCT_VARS:
        raise ValueError(f"refusing 2^{k} expansion (ceiling {MAX_PRODUCT_VARS})")
    bits = assignment_bits(k)
    if isinstance(p, ad.Node):
        log_omega = ad.add(
            ad.matvec(bits, ad.log(p)),
            ad.matvec(1.0 - bits, ad.log(ad.sub(1.0, p))),
        )
        return ad.exp(log_omega)
    p = np.asarray(p, dtype=np.float64)
    return np.prod(np.where(bits.astype(bool), p, 1.0 - p), axis=-1)


def bernoulli_weights_on(p, bits):
    """Weights omega(s) for the given (m, k) assignment-bit rows only;
    differentiable, and cheap when only the model indices are needed.
    Batched ``p`` of shape (batch, k) gives shape (batch, m)."""
    bits = np.asarray(bits, dtype=np.float64)
    log_omega = ad.add(
        ad.matvec(bits, ad.log(p)),
        ad.matvec(1.0 - bits, ad.log(ad.sub(1.0, p))),
    )
    return ad.exp(log_omega)


def factorized_kl(p, q):
    """KL between Bernoulli-product distributions, computed factor-wise:
    sum_i p_i log(p_i/q_i) + (1-p_i) log((1-p_i)/(1-q_i)).

    Sums over every entry, so batched inputs yield the batch total."""
    if ad._any_node(p, q):
        one_m_p = ad.sub(1.0, p)
        one_m_q = ad.sub(1.0, q)
        return ad.sum(
            ad.add(
                ad.mul(p, ad.sub(ad.log(p), ad.log(q))),
                ad.mul(one_m_p, ad.sub(ad.log(one_m_p), ad.log(one_m_q))),
            )
        )
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    _check_open_unit(p, q)
    return float(
        np.sum(p * np.log(p / q) + (1 - p) * np.log((1 - p) / (1 - q)))
    )


def factorized_bc(p, q):
    """Bhattacharyya coefficient of Bernoulli products:
    prod_i [ sqrt(p_i q_i) + sqrt((1-p_i)(1-q_i)) ]."""
    if ad._any_node(p, q):
        per_factor = ad.add(
            ad.sqrt(ad.mul(p, q)),
            ad.sqrt(ad.mul(ad.sub(1.0, p), ad.sub(1.0, q))),
        )
        return ad.exp(ad.sum(ad.log(per_factor), axis=-1))
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    _check_open_unit(p, q)
    return float(np.prod(np.sqrt(p * q) + np.sqrt((1 - p) * (1 - q))))


def factorized_l2(p, q):
    """Euclidean distance between Bernoulli-product distributions over 2^k
    assignments, via sum omega_p^2 - 2 omega_p.omega_q + omega_q^2, each a
    product over factors. Batched inputs reduce over the last axis."""

    def prod_last(v):
        if isinstance(v, ad.Node):
            return ad.exp(ad.sum(ad.log(v), axis=-1))
        return np.prod(v, axis=-1)

    if ad._any_node(p, q):
        pp = prod_last(ad.add(ad.mul(p, p), ad.mul(ad.sub(1.0, p), ad.sub(1.0, p))))
        qq = prod_last(ad.add(ad.mul(q, q), ad.mul(ad.sub(1.0, q), ad.sub(1.0, q))))
        pq = prod_last(ad.add(ad.mul(p, q), ad.mul(ad.sub(1.0, p), ad.sub(1.0, q))))
        return ad.sqrt(ad.add(ad.sub(pp, ad.mul(2.0, pq)), qq))
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    _check_open_unit(p, q)
    pp = np.prod(p * p + (1 - p) ** 2, axis=-1)
    qq = np.prod(q * q + (1 - q) ** 2, axis=-1)
    pq = np.prod(p * q + (1 - p) * (1 - q), axis=-1)
    return float(np.sqrt(np.maximum(pp - 2 * pq + qq, 0.0)))


def _check_open_unit(p, q):
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    for name, v in (("p", p), ("q", q)):
        if np.any(v <= 0) or np.any(v >= 1):
            raise ValueError(f"{name} entries must lie strictly inside (0, 1)")


# --- bivariate normal ---------------------------------------------------------


@dataclass
class BivariateNormal:
    mu: np.ndarray
    sigma: float = 0.35

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        if self.mu.shape != (2,):
            raise ValueError("mu must be a 2-vector")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def normal_pdf(m: BivariateNormal, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    sq = np.sum((x - m.mu) ** 2, axis=-1)
    return (1.0 / (2.0 * np.pi * m.sigma**2)) * np.exp(-sq / (2.0 * m.sigma**2))


def normal_density_at(points: np.ndarray, mu, sigma: float):
    """Isotropic normal density at fixed ``points`` (N, 2); ``mu`` may be a
    Node so the result is differentiable in the mean."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = ad.sub(points, mu)
    sq = ad.sum(ad.mul(d, d), axis=-1)
    return ad.mul(
        1.0 / (2.0 * np.pi * sigma**2), ad.exp(ad.mul(-1.0 / (2.0 * sigma**2), sq))
    )


# --- checkpoints --------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, model: MLPModel, sigma: float = 0.35):
    """Textual checkpoint: version, layer sizes, flat float64 parameters,
    seed, sigma."""
    flat = np.concatenate([p.reshape(-1) for p in model.params()])
    record = {
        "version": CHECKPOINT_VERSION,
        "layer_sizes": list(model.layer_sizes),
        "seed": int(model.seed),
        "sigma": float(sigma),
        "params": flat.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(record, fh)


def load_checkpoint(path) -> MLPModel:
    with open(path) as fh:
        record = json.load(fh)
    if record.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {record.get('version')}")
    model = MLPModel.init(record["layer_sizes"], seed=record["seed"])
    flat = np.asarray(record["params"], dtype=np.float64)
    offset = 0
    params = []
    for p in model.params():
        params.append(flat[offset : offset + p.size].reshape(p.shape))
        offset += p.size
    if offset != flat.size:
        raise ValueError("checkpoint parameter count does not match layer sizes")
    model.set_params(params)
    return model
