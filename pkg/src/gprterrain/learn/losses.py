"""Losses returning ``(value, gradient)`` pairs.

Batched losses average over the batch axis, so gradients are already
divided by the batch size.
"""
from __future__ import annotations

import numpy as np

from .layers import ShapeError, softmax


class DomainError(ValueError):
    pass


def cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean of ``-log softmax(logits)[label]``.

    ``logits`` may be a single vector with an integer label, or an ``(n, k)``
    batch with ``n`` labels. The gradient is ``softmax - onehot`` (divided by
    ``n`` for batches).
    """
    single = np.ndim(logits) == 1
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels))
    n, k = z.shape
    if y.shape != (n,):
        raise ShapeError(f"labels shape {y.shape} does not match logits shape {z.shape}")
    if np.any(y < 0) or np.any(y >= k):
        raise DomainError(f"labels must lie in [0, {k}), got {y.tolist()}")
    y = y.astype(np.int64)
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(n), y]))
    grad = softmax(z)
    grad[np.arange(n), y] -= 1.0
    grad /= n
    return loss, (grad[0] if single else grad)


def kl_divergence(mu: np.ndarray, logvar: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """KL(N(mu, exp(logvar)) || N(0, I)), summed over latent axes and averaged over the batch.

    A 1-D input is treated as a single sample. Returns ``(kl, dmu, dlogvar)``.
    """
    if mu.shape != logvar.shape:
        raise ShapeError(f"mu shape {mu.shape} does not match logvar shape {logvar.shape}")
    n = mu.shape[0] if mu.ndim > 1 else 1
    ev = np.exp(logvar)
    kl = float(-0.5 * np.sum(1.0 + logvar - mu * mu - ev) / n)
    return kl, mu / n, 0.5 * (ev - 1.0) / n


def mse_reconstruction(x: np.ndarray, x_hat: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all elements and its gradient w.r.t. ``x_hat``."""
    if x.shape != x_hat.shape:
        raise ShapeError(f"input shape {x.shape} does not match reconstruction shape {x_hat.shape}")
    diff = x_hat - x
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def reparameterize(mu: np.ndarray, logvar: np.ndarray, seed_or_rng) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``mu + exp(logvar / 2) * eps``; returns the latent and ``eps``."""
    if mu.shape != logvar.shape:
        raise ShapeError(f"mu shape {mu.shape} does not match logvar shape {logvar.shape}")
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else np.random.default_rng(seed_or_rng)
    eps = rng.standard_normal(mu.shape)
    return mu + np.exp(0.5 * logvar) * eps, eps


def soft_assignments(z: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Student-t kernel (one degree of freedom) similarities, normalized per sample."""
    d2 = ((z[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)
    kern = 1.0 / (1.0 + d2)
    return kern / kern.sum(axis=1, keepdims=True)


def target_distribution(q: np.ndarray) -> np.ndarray:
    """Sharpened targets ``q^2 / f`` with ``f`` the soft cluster frequencies, renormalized."""
    w = q * q / q.sum(axis=0)
    return w / w.sum(axis=1, keepdims=True)


def clustering_loss(z: np.ndarray, centroids: np.ndarray,
                    target: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean over samples of KL(target || q), with ``target`` held fixed.

    Returns ``(loss, dz, dcentroids)``.
    """
    n = z.shape[0]
    if target.shape != (n, centroids.shape[0]):
        raise ShapeError(f"target shape {target.shape} does not match ({n}, {centroids.shape[0]})")
    diff = z[:, None, :] - centroids[None, :, :]
    kern = 1.0 / (1.0 + (diff * diff).sum(axis=-1))
    q = kern / kern.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(target > 0, target * (np.log(target) - np.log(q)), 0.0)
    loss = float(terms.sum() / n)
    coef = (2.0 / n) * kern * (target - q)  # n, k
    dz = np.einsum("nk,nkd->nd", coef, diff)
    dmu = -np.einsum("nk,nkd->kd", coef, diff)
    return loss, dz, dmu
