"""Spiking neural networks for multi-modal time series analysis."""

from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    GraphError,
    InvariantError,
    ShapeError,
    SpikeTSAError,
)
from .numerics import Parameter, Tape, Tensor, fft1d, gradient_check
from .lif import LifParams, LifState, SpikeTensor, lif_sequence, lif_step, pulse_accumulate
from .wavelet import SubbandSet, haar_dwt2d, haar_idwt2d, subband_stack, wavelet_packet1d
from .encoders import ImageEncoder, ImageEncoderConfig, SeriesEncoder, SeriesEncoderConfig, encode_image, encode_series
from .fusion import JointLearningModule, JointSpaceConfig, Task
from .model import ModelConfig, SpikingFusionModel
from .data import CsvSchema, Normalizer, Sample, SeriesDataset, gasf, load_csv, split, synth_multimodal, window
from .train import TrainConfig, Trainer, evaluate, metrics, train_loop
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, load_run_config

__version__ = "0.1.0"
__all__ = [
    "SpikeTSAError", "ShapeError", "GraphError", "ConfigError", "DataError", "CheckpointError", "InvariantError",
    "Tensor", "Parameter", "Tape", "fft1d", "gradient_check",
    "LifParams", "LifState", "SpikeTensor", "lif_step", "lif_sequence", "pulse_accumulate",
    "SubbandSet", "haar_dwt2d", "haar_idwt2d", "wavelet_packet1d", "subband_stack",
    "ImageEncoder", "ImageEncoderConfig", "SeriesEncoder", "SeriesEncoderConfig", "encode_image", "encode_series",
    "JointLearningModule", "JointSpaceConfig", "Task",
    "ModelConfig", "SpikingFusionModel",
    "CsvSchema", "SeriesDataset", "Sample", "Normalizer", "load_csv", "window", "gasf", "synth_multimodal", "split",
    "TrainConfig", "Trainer", "train_loop", "evaluate", "metrics",
    "Checkpoint", "save_checkpoint", "load_checkpoint",
    "RunConfig", "load_run_config",
]
