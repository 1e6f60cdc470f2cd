"""Terrain classifiers, the clustering VAE, training and evaluation."""
from .clustering import KMeansResult, best_cluster_mapping, cluster_accuracy, kmeans
from .config import (
    VAE_EPOCHS,
    VAE_EPOCHS_REDUCED,
    Architecture,
    ConfigError,
    ModelConfig,
    TrainConfig,
)
from .evaluation import CLASS_COLUMNS, EvalReport, aggregate, evaluate, report_from_predictions
from .networks import (
    Classifier,
    ClusterVae,
    Cnn1d,
    Model,
    build_cluster_vae,
    build_cnn1d,
    build_cnn2d,
    build_model,
)
from .training import TrainResult, train
from .store import load_model, save_model
