"""Model checkpoints: a TNN1 file carries enough header to rebuild the network."""
from __future__ import annotations

from ..learn import CheckpointHeader, assign_parameters, load_checkpoint, save_checkpoint
from ..preprocess import Band
from .config import Architecture, ModelConfig
from .networks import ClusterVae, Model, build_model

BANDS = list(Band)


def save_model(model: Model, path, band: Band = Band.DIRECT) -> int:
    cfg = model.config
    vae = isinstance(model, ClusterVae)
    header = CheckpointHeader(
        cfg.architecture.arch_id, cfg.rows, cfg.cols,
        cfg.latent_dim if vae else 0, BANDS.index(band),
        cfg.gamma if vae else 0.0, cfg.kl_weight if vae else 0.0,
        float(model.norm_mean), float(model.norm_std),
    )
    return save_checkpoint(path, header, model.params)


def load_model(path) -> tuple[Model, Band]:
    """Rebuild a trained model and the row band it was trained on."""
    header, arrays = load_checkpoint(path)
    arch = Architecture.from_id(header.arch_id)
    kwargs = {}
    if arch is Architecture.CLUSTER_VAE:
        kwargs = {"latent_dim": header.latent_dim, "gamma": header.gamma, "kl_weight": header.kl_weight}
    model = build_model(ModelConfig(arch, header.rows, header.cols, **kwargs))
    assign_parameters(model.params, arrays, str(path))
    model.norm_mean, model.norm_std = header.norm_mean, header.norm_std
    model.trained = True
    if isinstance(model, ClusterVae):
        model.clustering = True
    return model, BANDS[header.band]
