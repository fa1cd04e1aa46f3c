"""BasisFormer: learnable-basis time series forecasting on a small numpy autodiff."""

from .config import BASIS_KINDS, LOSS_ARMS, ConfigError, LossWeights, ModelConfig
from .datapipe import (
    DataError, Normalizer, PreparedData, RawSeries, SynthSpec, Windows, load_csv,
    make_windows, persistence_forecast, prepare_data, synth_generate,
)
from .diffcore import ContractError, DimensionError, NonFiniteError, Tensor, grad_check
from .model import BasisFormer, LossParts
from .trainer import (
    AdaBelief, CheckpointError, TrainReport, evaluate, load_checkpoint, run_ablation,
    save_checkpoint, train,
)

__version__ = "0.1.0"

__all__ = [
    "AdaBelief", "BASIS_KINDS", "BasisFormer", "CheckpointError", "ConfigError", "ContractError",
    "DataError", "DimensionError", "LOSS_ARMS", "LossParts", "LossWeights", "ModelConfig",
    "NonFiniteError", "Normalizer", "PreparedData", "RawSeries", "SynthSpec", "Tensor",
    "TrainReport", "Windows", "evaluate", "grad_check", "load_checkpoint", "load_csv",
    "make_windows", "persistence_forecast", "prepare_data", "run_ablation", "save_checkpoint",
    "synth_generate", "train",
]
