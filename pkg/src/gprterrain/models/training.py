"""Mini-batch training loops for the classifiers and the clustering VAE."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..learn import Adam, TrainingError, target_distribution
from ..preprocess import DatasetSplit
from ..simulate import N_CLASSES, hash64
from .clustering import kmeans
from .config import TrainConfig
from .networks import Classifier, ClusterVae, Model

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: Model
    history: list[float]  # mean train loss per epoch
    extras: dict = field(default_factory=dict)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]


def _check_finite(loss: float, epoch: int, batch: int):
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")


def train(model: Model, split: DatasetSplit, tcfg: TrainConfig) -> TrainResult:
    """Train ``model`` on ``split.train``; a pure function of (model init, data, tcfg).

    Normalization statistics of ``split`` (if it was normalized) are copied to
    the model so raw inputs can be classified later.
    """
    x, y = split.arrays("train")
    if len(x) == 0:
        raise ValueError("cannot train on an empty split")
    if split.mean is not None:
        model.norm_mean, model.norm_std = split.mean, split.std
    if isinstance(model, ClusterVae):
        return _train_vae(model, x, y, tcfg)
    return _train_classifier(model, x, y, tcfg)


def _train_classifier(model: Classifier, x, y, tcfg: TrainConfig) -> TrainResult:
    opt = Adam(model.params, lr=tcfg.lr)
    history = []
    for epoch in range(tcfg.epochs):
        rng = np.random.default_rng(hash64(tcfg.seed, epoch))
        total = 0.0
        for b, idx in enumerate(_batches(len(x), tcfg.batch_size, rng)):
            loss = model.loss_and_grad(x[idx], y[idx])
            _check_finite(loss, epoch, b)
            opt.step()
            total += loss * len(idx)
        history.append(total / len(x))
        log.debug("epoch %d loss %.5f", epoch, history[-1])
    model.trained = True
    return TrainResult(model, history)


def _train_vae(model: ClusterVae, x, y, tcfg: TrainConfig) -> TrainResult:
    """Warmup on the plain VAE loss, k-means-initialize the centroids, then train jointly.

    Clustering targets are recomputed on the full train set every
    ``tcfg.target_update`` epochs after the warmup.
    """
    opt = Adam(model.params, lr=tcfg.lr)
    warmup = max(1, int(round(tcfg.warmup_fraction * tcfg.epochs)))
    history = []
    target = None
    init = None
    for epoch in range(tcfg.epochs):
        if epoch == warmup:
            mu = model.embed(x)
            init = kmeans(mu, N_CLASSES, seed=hash64(tcfg.seed, 7_000_001))
            model.centroids.value[...] = init.centroids
            model.clustering = True
        if model.clustering and (epoch - warmup) % tcfg.target_update == 0:
            target = target_distribution(model.soft_assign(x))
        rng = np.random.default_rng(hash64(tcfg.seed, epoch))
        total = 0.0
        for b, idx in enumerate(_batches(len(x), tcfg.batch_size, rng)):
            eps = rng.standard_normal((len(idx), model.config.latent_dim))
            terms = model.loss_terms(x[idx], eps, target[idx] if model.clustering else None)
            _check_finite(terms["total"], epoch, b)
            opt.step()
            total += terms["total"] * len(idx)
        history.append(total / len(x))
    if not model.clustering:
        # too few epochs for a clustering phase: still place centroids
        init = kmeans(model.embed(x), N_CLASSES, seed=hash64(tcfg.seed, 7_000_001))
        model.centroids.value[...] = init.centroids
        model.clustering = True
    model.trained = True
    return TrainResult(model, history, {"warmup_epochs": warmup, "kmeans_init": init})
