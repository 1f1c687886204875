"""Run configuration: a flat YAML mapping validated in full before any work starts."""

import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional

import yaml

from .errors import ConfigError
from .fusion import CLASSIFICATION, REGRESSION
from .lif import LifParams
from .model import ModelConfig
from .train import LOSS_KINDS, TrainConfig

logger = logging.getLogger(__name__)

SOURCES = ("synthetic", "beats", "series")
SPLIT_MODES = ("chronological", "shuffled")

# key: (accepted types, description)
RUN_CONFIG_KEYS = {
    "task": (str, "classification or regression"),
    "source": (str, "synthetic, beats (one beat per CSV row) or series (timestamped CSV)"),
    "data_path": (str, "CSV file for the beats and series sources"),
    "timestamp_column": (str, "series source: timestamp column"),
    "value_columns": (list, "series source: channel columns; empty takes every other column"),
    "target_column": (str, "series source: channel forecast by regression"),
    "label_column": (str, "column holding integer class labels"),
    "fill_gaps": (bool, "forward-fill isolated missing cells instead of rejecting them"),
    "gasf_channels": (list, "channel names or indices rendered as GASF images; empty means the target or channel 0"),
    "lookback": (int, "window length L"),
    "horizon": (int, "forecast horizon H (also the windowing gap for labelled series)"),
    "stride": (int, "window stride"),
    "num_classes": (int, "number of classes for classification"),
    "synthetic_samples": (int, "number of synthetic samples"),
    "split": (list, "train, validation and test ratios summing to 1"),
    "split_mode": (str, "chronological or shuffled; empty picks shuffled for classification"),
    "steps": (int, "SNN time steps T"),
    "use_wavelet": (bool, "apply the Haar subband preprocessing"),
    "image_stages": (list, "output channels of each image encoder stage"),
    "series_hidden": (list, "hidden width of each series encoder stage"),
    "kernel_size": (int, "image encoder convolution kernel size"),
    "padding": (int, "image encoder convolution padding"),
    "pool": (int, "image encoder average-pool window"),
    "d_j": (int, "joint space width"),
    "epsilon": (float, "floor of the adaptive similarity variance"),
    "tau": (float, "membrane time constant"),
    "v_rest": (float, "resting potential"),
    "v_th": (float, "firing threshold"),
    "v_reset": (float, "reset potential"),
    "surrogate_slope": (float, "surrogate gradient slope"),
    "epochs": (int, "maximum training epochs"),
    "batch_size": (int, "samples per batch"),
    "lr": (float, "Adam learning rate"),
    "seed": (int, "seed for initialization, shuffling, splits and synthetic data"),
    "patience": (int, "early-stopping patience in epochs"),
    "clip_norm": (float, "global gradient norm limit"),
    "loss": (str, "regression loss: mse or mae"),
    "out": (str, "output directory"),
}


@dataclass(frozen=True)
class RunConfig:
    """Every setting of a run. Keys and meanings are listed in :data:`RUN_CONFIG_KEYS`."""

    task: str = CLASSIFICATION
    source: str = "synthetic"
    data_path: Optional[str] = None
    timestamp_column: str = "date"
    value_columns: Optional[List[str]] = None
    target_column: Optional[str] = "OT"
    label_column: Optional[str] = None
    fill_gaps: bool = True
    gasf_channels: Optional[List] = None
    lookback: int = 64
    horizon: int = 24
    stride: int = 1
    num_classes: int = 2
    synthetic_samples: int = 800
    split: List[float] = (0.7, 0.15, 0.15)
    split_mode: Optional[str] = None
    steps: int = 8
    use_wavelet: bool = True
    image_stages: List[int] = (16, 32)
    series_hidden: List[int] = (64, 64)
    kernel_size: int = 3
    padding: int = 1
    pool: int = 2
    d_j: int = 64
    epsilon: float = 1e-6
    tau: float = 2.0
    v_rest: float = 0.0
    v_th: float = 1.0
    v_reset: float = 0.0
    surrogate_slope: float = 2.0
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    patience: int = 10
    clip_norm: float = 5.0
    loss: str = "mse"
    out: str = "runs"

    def __post_init__(self):
        for name in ("value_columns", "gasf_channels", "split", "image_stages", "series_hidden"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, list(value))
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ConfigError(f"task: expected '{CLASSIFICATION}' or '{REGRESSION}', got '{self.task}'")
        if self.source not in SOURCES:
            raise ConfigError(f"source: expected one of {SOURCES}, got '{self.source}'")
        if self.source != "synthetic" and not self.data_path:
            raise ConfigError(f"data_path: required for source '{self.source}'")
        if self.source == "beats" and self.task != CLASSIFICATION:
            raise ConfigError("task: the beats source only supports classification")
        if self.split_mode is not None and self.split_mode not in SPLIT_MODES:
            raise ConfigError(f"split_mode: expected one of {SPLIT_MODES}, got '{self.split_mode}'")
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"loss: expected one of {LOSS_KINDS}, got '{self.loss}'")
        for name in ("lookback", "horizon", "stride", "num_classes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be positive, got {getattr(self, name)}")
        if self.synthetic_samples < 0:
            raise ConfigError(f"synthetic_samples: must not be negative, got {self.synthetic_samples}")
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) < 0:
            raise ConfigError(f"split: expected three non-negative ratios summing to 1, got {self.split}")
        if self.task == CLASSIFICATION and self.num_classes < 2:
            raise ConfigError(f"num_classes: classification needs at least 2 classes, got {self.num_classes}")
        self.lif_params()
        self.to_train_config()

    @classmethod
    def from_mapping(cls, mapping: Optional[Dict], overrides: Optional[Dict] = None) -> "RunConfig":
        """Build from a flat mapping; ``overrides`` (command-line flags) win over file keys."""
        merged = dict(mapping or {})
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        for key, value in merged.items():
            if key not in RUN_CONFIG_KEYS:
                raise ConfigError(f"unknown config key '{key}'")
            _check_type(key, value)
        return cls(**merged)

    def to_dict(self) -> Dict:
        return asdict(self)

    def resolved_split_mode(self) -> str:
        if self.split_mode:
            return self.split_mode
        return "shuffled" if self.task == CLASSIFICATION else "chronological"

    def lif_params(self) -> LifParams:
        return LifParams(tau=self.tau, v_rest=self.v_rest, v_th=self.v_th, v_reset=self.v_reset,
                         surrogate_slope=self.surrogate_slope)

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, lr=self.lr, seed=self.seed,
                           steps=self.steps, task=self.task, patience=self.patience,
                           clip_norm=self.clip_norm, loss=self.loss)

    def to_model_config(self, image_channels: int, image_size, series_channels: int, series_length: int,
                        outputs: int, gasf_channels=None) -> ModelConfig:
        return ModelConfig(
            task=self.task,
            outputs=outputs,
            image_channels=image_channels,
            image_size=tuple(image_size),
            series_channels=series_channels,
            series_length=series_length,
            steps=self.steps,
            use_wavelet=self.use_wavelet,
            image_stages=tuple(self.image_stages),
            series_hidden=tuple(self.series_hidden),
            kernel_size=self.kernel_size,
            padding=self.padding,
            pool=self.pool,
            d_j=self.d_j,
            epsilon=self.epsilon,
            gasf_channels=gasf_channels,
            lif=self.lif_params(),
        )


def _check_type(key, value):
    expected = RUN_CONFIG_KEYS[key][0]
    if value is None:
        if key in {f.name for f in fields(RunConfig) if f.default is None}:
            return
        raise ConfigError(f"{key}: a value is required")
    if expected is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif expected is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, expected)
    if not ok:
        raise ConfigError(f"{key}: expected {expected.__name__}, got {type(value).__name__} ({value!r})")


def load_run_config(path, overrides: Optional[Dict] = None) -> RunConfig:
    """Read a flat YAML run configuration; every error names the file and, where known, the key."""
    if not path:
        return RunConfig.from_mapping({}, overrides)
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            mapping = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}")
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: expected a mapping of keys to values, got {type(mapping).__name__}")
    try:
        config = RunConfig.from_mapping(mapping, overrides)
    except TypeError as e:
        raise ConfigError(f"{path}: {e}")
    logger.info("loaded run config %s", path)
    return config


def dump_run_config(config: RunConfig) -> str:
    """The configuration as flat YAML text with keys in :data:`RUN_CONFIG_KEYS` order."""
    data = config.to_dict()
    return yaml.safe_dump({key: data[key] for key in RUN_CONFIG_KEYS}, sort_keys=False)
