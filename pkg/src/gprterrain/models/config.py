from __future__ import annotations

import enum
from dataclasses import dataclass

from ..simulate import N_SAMPLES

CNN2D_ROWS = (60, 200)
CNN2D_COLS = (8, 16, 24, 32)


class ConfigError(ValueError):
    pass


class Architecture(enum.Enum):
    CNN1D = "cnn1d"
    CNN2D = "cnn2d"
    CLUSTER_VAE = "cluster-vae"

    @property
    def arch_id(self) -> int:
        return list(Architecture).index(self)

    @classmethod
    def from_id(cls, arch_id: int) -> "Architecture":
        members = list(cls)
        if not 0 <= arch_id < len(members):
            raise ConfigError(f"unknown architecture id {arch_id}")
        return members[arch_id]

    @classmethod
    def parse(cls, name: str) -> "Architecture":
        key = name.strip().lower().replace("_", "-")
        if key in ALIASES:
            return ALIASES[key]
        raise ConfigError(f"unknown architecture {name!r}; choose from {', '.join(sorted(ALIASES))}")


ALIASES = {
    "cnn1d": Architecture.CNN1D,
    "cnn2d": Architecture.CNN2D,
    "alexnet-proxy": Architecture.CNN2D,
    "cluster-vae": Architecture.CLUSTER_VAE,
    "vae": Architecture.CLUSTER_VAE,
}


@dataclass(frozen=True)
class ModelConfig:
    architecture: Architecture
    rows: int
    cols: int
    latent_dim: int = 10
    gamma: float = 0.1
    kl_weight: float = 1.0
    channels: tuple[int, ...] = (4, 8, 8)

    def __post_init__(self):
        a = self.architecture
        if a is Architecture.CNN1D:
            if (self.rows, self.cols) != (N_SAMPLES, 1):
                raise ConfigError(f"cnn1d takes single {N_SAMPLES}x1 traces, got {self.rows}x{self.cols}")
        elif a is Architecture.CNN2D:
            if self.cols < 8:
                raise ConfigError(f"cnn2d needs at least 8 columns, got {self.cols}; use cnn1d for single traces")
            if self.rows not in CNN2D_ROWS or self.cols not in CNN2D_COLS:
                raise ConfigError(
                    f"cnn2d accepts rows in {CNN2D_ROWS} and cols in {CNN2D_COLS}, got {self.rows}x{self.cols}"
                )
        else:
            if self.latent_dim < 2:
                raise ConfigError(f"latent_dim must be >= 2, got {self.latent_dim}")
            if self.rows % 2 or self.cols % 2:
                raise ConfigError(f"cluster-vae needs even input dimensions, got {self.rows}x{self.cols}")
            if self.gamma < 0 or self.kl_weight < 0:
                raise ConfigError("gamma and kl_weight must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 1
    trials: int = 5
    warmup_fraction: float = 0.1
    target_update: int = 50  # epochs between clustering-target refreshes

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


VAE_EPOCHS = 4000
VAE_EPOCHS_REDUCED = 400
