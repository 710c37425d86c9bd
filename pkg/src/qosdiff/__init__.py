"""QoS matrix completion with diffusion-refined embeddings and an
adversarial bidirectional-attention interaction model."""

from .autodiff import AdamW, Tensor, no_grad
from .data import (
    QoSDataset,
    Split,
    corrupt_test,
    load_triplets_csv,
    load_wsdream,
    make_split,
    normalize,
)
from .delm import DiffusionSchedule, EmbeddingBank, kaiming_init
from .metrics import aggregate, degradation, mae, rmse
from .model import QoSDiffModel
from .train import LossConfig, fit

__version__ = "0.1.0"

__all__ = [
    "AdamW", "Tensor", "no_grad",
    "QoSDataset", "Split", "corrupt_test", "load_triplets_csv",
    "load_wsdream", "make_split", "normalize",
    "DiffusionSchedule", "EmbeddingBank", "kaiming_init",
    "aggregate", "degradation", "mae", "rmse",
    "QoSDiffModel", "LossConfig", "fit",
]
