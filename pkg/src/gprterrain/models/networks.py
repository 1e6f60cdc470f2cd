"""Supervised terrain classifiers and the clustering VAE."""
from __future__ import annotations

import numpy as np

from ..learn import (
    Conv1d,
    Conv2d,
    Dense,
    Flatten,
    MaxPool1d,
    MaxPool2d,
    ReLU,
    Reshape,
    Sequential,
    ShapeError,
    Upsample2d,
    clustering_loss,
    cross_entropy,
    kl_divergence,
    mse_reconstruction,
    soft_assignments,
    softmax,
)
from ..learn.layers import Parameter
from ..simulate import N_CLASSES
from .config import Architecture, ConfigError, ModelConfig

PREDICT_BATCH = 256


class Model:
    """Common surface: parameters, input normalization and the trained flag."""

    config: ModelConfig

    def __init__(self, config: ModelConfig):
        self.config = config
        self.norm_mean = 0.0
        self.norm_std = 1.0
        self.trained = False

    @property
    def params(self) -> tuple[Parameter, ...]:
        raise NotImplementedError

    def n_parameters(self) -> int:
        return int(sum(p.value.size for p in self.params))

    def normalize_input(self, x_raw: np.ndarray) -> np.ndarray:
        return (np.asarray(x_raw, dtype=np.float64) - self.norm_mean) / self.norm_std

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 3:
            x = x[:, None]
        expected = (1, self.config.rows, self.config.cols)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ShapeError(f"{self.config.architecture.value} expects input (n, {', '.join(map(str, expected))}), "
                             f"got shape {x.shape}")
        return x


class Classifier(Model):
    """A supervised network mapping (n, 1, rows, cols) slices to 4 logits."""

    def __init__(self, config: ModelConfig, net: Sequential):
        super().__init__(config)
        self.net = net

    @property
    def params(self):
        return self.net.params

    def _net_input(self, x):
        return x

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.net.forward(self._net_input(self._check_input(x)))

    def loss_and_grad(self, x: np.ndarray, y: np.ndarray) -> float:
        """Mean cross-entropy on a batch; leaves fresh gradients on every parameter."""
        for p in self.params:
            p.zero_grad()
        loss, g = cross_entropy(self.logits(x), y)
        self.net.backward(g)
        return loss

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        return cross_entropy(self.logits(x), y)[0]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        out = [softmax(self.logits(x[i:i + PREDICT_BATCH])) for i in range(0, len(x), PREDICT_BATCH)]
        return np.concatenate(out) if out else np.zeros((0, N_CLASSES))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)


class Cnn1d(Classifier):
    def _net_input(self, x):
        return x[:, :, :, 0]


def build_cnn1d(cfg: ModelConfig, seed: int = 0) -> Cnn1d:
    """conv1d(5) -> relu -> pool -> conv1d(5) -> relu -> pool -> dense -> 4 logits.

    With the default (4, 8) channels on a 200-sample trace this has
    24 + 168 + 1508 = 1700 parameters.
    """
    if cfg.architecture is not Architecture.CNN1D:
        raise ConfigError(f"build_cnn1d got a {cfg.architecture.value} config")
    rng = np.random.default_rng(seed)
    c1, c2 = cfg.channels[0], cfg.channels[1]
    length = ((cfg.rows - 4) // 2 - 4) // 2
    net = Sequential(
        Conv1d(1, c1, 5, rng=rng), ReLU(), MaxPool1d(2),
        Conv1d(c1, c2, 5, rng=rng), ReLU(), MaxPool1d(2),
        Flatten(), Dense(c2 * length, N_CLASSES, rng=rng),
    )
    return Cnn1d(cfg, net)


def build_cnn2d(cfg: ModelConfig, seed: int = 0) -> Classifier:
    """Three conv3x3 -> relu -> maxpool stages, then one dense layer to 4 logits."""
    if cfg.architecture is not Architecture.CNN2D:
        raise ConfigError(f"build_cnn2d got a {cfg.architecture.value} config")
    rng = np.random.default_rng(seed)
    c1, c2, c3 = cfg.channels
    h, w = cfg.rows, cfg.cols
    for _ in range(3):
        h, w = h // 2, w // 2
    net = Sequential(
        Conv2d(1, c1, 3, padding=1, rng=rng, input_grad=False), ReLU(), MaxPool2d(2),
        Conv2d(c1, c2, 3, padding=1, rng=rng), ReLU(), MaxPool2d(2),
        Conv2d(c2, c3, 3, padding=1, rng=rng), ReLU(), MaxPool2d(2),
        Flatten(), Dense(c3 * h * w, N_CLASSES, rng=rng),
    )
    return Classifier(cfg, net)


class ClusterVae(Model):
    """Convolutional VAE with a k-centroid clustering head on the latent means.

    The loss is ``mse + kl_weight * kl / pixels + gamma * clustering`` where
    the clustering term is KL(target || q) between sharpened targets and
    Student-t soft assignments of the latent means to the centroids.
    """

    def __init__(self, config: ModelConfig, seed: int = 0, n_clusters: int = N_CLASSES):
        super().__init__(config)
        rng = np.random.default_rng(seed)
        c = config.channels[0]
        h, w = config.rows // 2, config.cols // 2
        L = config.latent_dim
        self.encoder = Sequential(
            Conv2d(1, c, 3, padding=1, rng=rng, input_grad=False), ReLU(), MaxPool2d(2),
            Flatten(), Dense(c * h * w, 2 * L, rng=rng),
        )
        self.decoder = Sequential(
            Dense(L, c * h * w, rng=rng), ReLU(), Reshape(c, h, w),
            Conv2d(c, 1, 3, padding=1, rng=rng), Upsample2d(2),
        )
        # small output init keeps the initial reconstruction near the data mean
        self.decoder.layers[3].weight.value *= 0.1
        self.centroids = Parameter(np.zeros((n_clusters, L)), "centroids")
        self.clustering = False

    @property
    def params(self):
        return self.encoder.params + self.decoder.params + (self.centroids,)

    @property
    def pixels(self) -> int:
        return self.config.rows * self.config.cols

    def encode(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = self.encoder.forward(self._check_input(x))
        L = self.config.latent_dim
        return h[:, :L], h[:, L:]

    def decode(self, z: np.ndarray) -> np.ndarray:
        return self.decoder.forward(z)

    def embed(self, x: np.ndarray) -> np.ndarray:
        """Latent means, computed in batches."""
        x = self._check_input(x)
        out = [self.encode(x[i:i + PREDICT_BATCH])[0] for i in range(0, len(x), PREDICT_BATCH)]
        return np.concatenate(out) if out else np.zeros((0, self.config.latent_dim))

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        return self.decode(self.encode(x)[0])

    def soft_assign(self, x: np.ndarray) -> np.ndarray:
        return soft_assignments(self.embed(x), self.centroids.value)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Cluster id (nearest centroid) per sample."""
        return np.argmax(self.soft_assign(x), axis=1)

    def loss_terms(self, x: np.ndarray, eps: np.ndarray, target: np.ndarray | None = None,
                   backward: bool = True) -> dict[str, float]:
        """Evaluate the loss for a fixed noise draw ``eps``.

        The clustering term is included when ``target`` is given and
        ``gamma > 0``. With ``backward`` the parameter gradients are refilled.
        """
        cfg = self.config
        x = self._check_input(x)
        L = cfg.latent_dim
        h = self.encoder.forward(x)
        mu, logvar = h[:, :L], h[:, L:]
        std = np.exp(0.5 * logvar)
        z = mu + std * eps
        x_hat = self.decoder.forward(z)
        mse, d_xhat = mse_reconstruction(x, x_hat)
        kl, dmu_kl, dlv_kl = kl_divergence(mu, logvar)
        kl_scale = cfg.kl_weight / self.pixels
        terms = {"mse": mse, "kl": kl}
        total = mse + kl_scale * kl
        use_clustering = target is not None and cfg.gamma > 0
        if use_clustering:
            closs, dmu_c, dcent = clustering_loss(mu, self.centroids.value, target)
            terms["clustering"] = closs
            total += cfg.gamma * closs
        terms["total"] = total
        if backward:
            for p in self.params:
                p.zero_grad()
            dz = self.decoder.backward(d_xhat)
            dmu = dz + kl_scale * dmu_kl
            dlv = dz * eps * 0.5 * std + kl_scale * dlv_kl
            if use_clustering:
                dmu = dmu + cfg.gamma * dmu_c
                self.centroids.grad += cfg.gamma * dcent
            self.encoder.backward(np.concatenate([dmu, dlv], axis=1))
        return terms


def build_cluster_vae(cfg: ModelConfig, seed: int = 0) -> ClusterVae:
    if cfg.architecture is not Architecture.CLUSTER_VAE:
        raise ConfigError(f"build_cluster_vae got a {cfg.architecture.value} config")
    return ClusterVae(cfg, seed)


def build_model(cfg: ModelConfig, seed: int = 0) -> Model:
    builders = {
        Architecture.CNN1D: build_cnn1d,
        Architecture.CNN2D: build_cnn2d,
        Architecture.CLUSTER_VAE: build_cluster_vae,
    }
    return builders[cfg.architecture](cfg, seed)
