from .checkpoint import TrainedModel, load_checkpoint, save_checkpoint
from .layers import downsample2, upsample2
from .losses import LossWeights, loss_dirichlet, loss_inside, loss_laplacian, loss_neumann, total_loss
from .models import MSNET, UNET, NetConfig, Network, build_network
from .rf import effective_receptive_field, empirical_rf, formula_is_exact, optimal_params, receptive_field
from .train import (
    TrainConfig,
    TrainingData,
    TrainingDiverged,
    field_metrics,
    history_csv,
    infer,
    mode_amplitude_error,
    package,
    typical_input_scale,
    predict_batch,
    train,
)

__all__ = [
    "MSNET", "UNET", "LossWeights", "NetConfig", "Network", "TrainConfig", "TrainedModel",
    "TrainingData", "TrainingDiverged", "build_network", "downsample2", "effective_receptive_field",
    "empirical_rf", "formula_is_exact", "infer", "load_checkpoint", "loss_dirichlet", "loss_inside",
    "loss_laplacian", "loss_neumann", "optimal_params", "receptive_field", "save_checkpoint",
    "total_loss", "train", "upsample2", "field_metrics", "history_csv", "mode_amplitude_error",
    "predict_batch", "package", "typical_input_scale",
]
