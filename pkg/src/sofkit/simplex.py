"""Distances and objective functions on the probability simplex.

All functions accept plain numpy arrays (exact math: 0*log(0/q) = 0, a zero
in q under positive p mass gives +inf) or autodiff Nodes (epsilon-clamped
graph ops so training stays finite). The constraint-side functions take a
ModelSet and only touch the model indices.

Given a batch of distributions as a (batch, m) Node, the regularizers
reduce over the last axis and return a (batch,) Node.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .prop_logic import ModelSet, UnsatisfiableConstraintError, constraint_distribution


def _check_pair(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    return p, q


def bhattacharyya(p, q):
    """Overlap sum(sqrt(p_i q_i)), in [0, 1]."""
    if ad._any_node(p, q):
        return ad.sum(ad.sqrt(ad.mul(p, q)), axis=-1)
    p, q = _check_pair(p, q)
    return float(np.sqrt(p * q).sum())


def fisher_rao(p, q):
    """arccos of the Bhattacharyya coefficient; in [0, pi/2]."""
    if ad._any_node(p, q):
        return ad.arccos(bhattacharyya(p, q))
    p, q = _check_pair(p, q)
    return float(np.arccos(np.clip(np.sqrt(p * q).sum(), -1.0, 1.0)))


def kl_divergence(p, q):
    """sum p log(p/q); +inf where q vanishes under p's support."""
    if ad._any_node(p, q):
        return ad.sum(ad.mul(p, ad.sub(ad.log(p), ad.log(q))), axis=-1)
    p, q = _check_pair(p, q)
    support = p > 0
    if np.any(q[support] == 0):
        return float("inf")
    terms = np.zeros_like(p)
    terms[support] = p[support] * np.log(p[support] / q[support])
    return float(terms.sum())


def l2_distance(p, q):
    if ad._any_node(p, q):
        d = ad.sub(p, q)
        return ad.sqrt(ad.sum(ad.mul(d, d), axis=-1))
    p, q = _check_pair(p, q)
    return float(np.sqrt(((p - q) ** 2).sum()))


def total_variation(p, q):
    p, q = _check_pair(p, q)
    return float(0.5 * np.abs(p - q).sum())


def _require_models(m: ModelSet):
    if len(m) == 0:
        raise UnsatisfiableConstraintError(
            "regularizer undefined for an unsatisfiable constraint"
        )


def fisher_regularizer(m: ModelSet, f):
    """arccos( sum over models of sqrt(f(s)) / sqrt(|M|) )."""
    _require_models(m)
    if isinstance(f, ad.Node):
        bc = ad.div(ad.sum(ad.sqrt(ad.gather(f, m.indices)), axis=-1), np.sqrt(len(m)))
        return ad.arccos(bc)
    f = np.asarray(f, dtype=np.float64)
    bc = np.sqrt(f[m.indices]).sum() / np.sqrt(len(m))
    return float(np.arccos(np.clip(bc, -1.0, 1.0)))


def kl_regularizer(m: ModelSet, f):
    """KL(rho_phi || f) = -log|M| - (1/|M|) sum over models of log f(s)."""
    _require_models(m)
    k = len(m)
    if isinstance(f, ad.Node):
        return ad.sub(
            -np.log(k), ad.div(ad.sum(ad.log(ad.gather(f, m.indices)), axis=-1), k)
        )
    f = np.asarray(f, dtype=np.float64)
    fm = f[m.indices]
    if np.any(fm == 0):
        return float("inf")
    return float(-np.log(k) - np.log(fm).sum() / k)


def wmc(m: ModelSet, omega):
    """Mass the weight distribution places on the model set."""
    if isinstance(omega, ad.Node):
        return ad.sum(ad.gather(omega, m.indices), axis=-1)
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape[-1] != m.space_size:
        raise ValueError(
            f"length mismatch: weights {omega.shape[-1]} vs space {m.space_size}"
        )
    return float(omega[m.indices].sum())


def semantic_loss(m: ModelSet, omega):
    """-log of the weighted model count; 0 iff all mass satisfies."""
    if isinstance(omega, ad.Node):
        return ad.neg(ad.log(wmc(m, omega)))
    w = wmc(m, omega)
    if w == 0:
        return float("inf")
    return float(-np.log(w))


def combined_loss(task, sof, alpha, beta):
    """alpha * task + beta * sof."""
    if ad._any_node(task, sof):
        return ad.add(ad.mul(alpha, task), ad.mul(beta, sof))
    return alpha * task + beta * sof


def regularizer(kind: str, m: ModelSet, f):
    """Loss selector shared by the experiment harness:
    fisher | kl | l2 | wmc (trained as -W) | sloss."""
    if kind == "fisher":
        return fisher_regularizer(m, f)
    if kind == "kl":
        return kl_regularizer(m, f)
    if kind == "l2":
        rho = constraint_distribution(m)
        return l2_distance(rho, f)
    if kind == "wmc":
        return ad.neg(wmc(m, f)) if isinstance(f, ad.Node) else -wmc(m, f)
    if kind == "sloss":
        return semantic_loss(m, f)
    raise ValueError(f"unknown loss selector {kind!r}")
