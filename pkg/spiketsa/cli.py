"""train, eval, predict and inspect commands.

Each command validates its configuration and inputs before writing anything,
and every output file is written atomically.
"""

import logging
import os
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .checkpoint import Checkpoint, encode, load_checkpoint
from .config import RunConfig, load_run_config
from .data import (
    CsvSchema,
    Normalizer,
    Sample,
    batch_arrays,
    load_beats,
    load_csv,
    lookback_windows,
    normalize,
    split,
    synth_multimodal,
    window,
)
from .errors import ConfigError, DataError
from .files import atomic_path, atomic_paths, atomic_write_csv, ensure_dir, write_csv
from .fusion import CLASSIFICATION
from .model import ModelConfig, SpikingFusionModel
from .numerics import fft1d
from .train import Trainer, evaluate, metric_names, naive_forecast, regression_loss

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "model.ckpt"
HISTORY_FILE = "history.csv"
METRICS_FILE = "metrics.csv"
PREDICTIONS_FILE = "predictions.csv"
SPECTRUM_FILE = "spectrum.csv"
SPLITS = ("train", "val", "test", "all")
FIXED_BY_CHECKPOINT = ("seed", "split", "split_mode", "lookback", "horizon", "stride", "use_wavelet")


@dataclass
class PreparedData:
    """Normalized splits plus what the model needs to know about the channels."""

    train: List[Sample]
    val: List[Sample]
    test: List[Sample]
    normalizer: Normalizer
    channels: Tuple[str, ...]
    target_index: Optional[int]

    def part(self, name: str) -> List[Sample]:
        if name == "all":
            return self.train + self.val + self.test
        if name not in SPLITS:
            raise ConfigError(f"split: expected one of {SPLITS}, got '{name}'")
        return getattr(self, name)


def _schema(cfg: RunConfig) -> CsvSchema:
    return CsvSchema(timestamp=cfg.timestamp_column, columns=cfg.value_columns or None,
                     target=cfg.target_column, label=cfg.label_column, fill_gaps=cfg.fill_gaps)


def load_samples(cfg: RunConfig) -> Tuple[List[Sample], Tuple[str, ...], Optional[int]]:
    """Raw (unnormalized) samples of the configured source, with channel names and target index."""
    if cfg.source == "synthetic":
        kind = "classify" if cfg.task == CLASSIFICATION else "forecast"
        samples = synth_multimodal(cfg.seed, cfg.synthetic_samples, kind, classes=cfg.num_classes,
                                   length=cfg.lookback, horizon=cfg.horizon)
        return samples, ("value",), (None if cfg.task == CLASSIFICATION else 0)
    if cfg.source == "beats":
        samples = load_beats(cfg.data_path, cfg.label_column or "label")
        return samples, ("value",), None
    dataset = load_csv(cfg.data_path, _schema(cfg))
    samples = window(dataset, cfg.lookback, cfg.horizon, cfg.stride, task=cfg.task)
    return samples, dataset.channels, (dataset.target_index if cfg.task != CLASSIFICATION else None)


def resolve_gasf_channels(cfg: RunConfig, channels: Sequence[str], target_index: Optional[int]) -> Tuple[int, ...]:
    if not cfg.gasf_channels:
        return (target_index if target_index is not None else 0,)
    resolved = []
    for entry in cfg.gasf_channels:
        if isinstance(entry, int) and not isinstance(entry, bool) and 0 <= entry < len(channels):
            resolved.append(entry)
        elif entry in channels:
            resolved.append(list(channels).index(entry))
        else:
            raise ConfigError(f"gasf_channels: '{entry}' is not one of {list(channels)}")
    return tuple(resolved)


def prepare_data(cfg: RunConfig, normalizer: Optional[Normalizer] = None) -> PreparedData:
    """Load, split and normalize; the normalizer is fitted on the training split unless given."""
    samples, channels, target_index = load_samples(cfg)
    if not samples:
        raise DataError("the configured source produced no samples")
    if cfg.task == CLASSIFICATION:
        labels = {s.label for s in samples}
        if max(labels) >= cfg.num_classes:
            raise DataError(f"label {max(labels)} found but num_classes is {cfg.num_classes}")
    # series windows overlap; keep whole windows from crossing split boundaries
    gap = cfg.lookback + cfg.horizon if cfg.source == "series" else 0
    train, val, test = split(samples, cfg.split, cfg.seed, cfg.resolved_split_mode(), gap=gap)
    if not train:
        raise DataError("training split is empty")
    if normalizer is None:
        normalizer = Normalizer.fit_samples(train, channels, target_index)
    return PreparedData(normalize(train, normalizer), normalize(val, normalizer), normalize(test, normalizer),
                        normalizer, tuple(channels), target_index)


def build_model_config(cfg: RunConfig, data: PreparedData) -> ModelConfig:
    series_channels, length = data.train[0].series.shape
    gasf_channels = resolve_gasf_channels(cfg, data.channels, data.target_index)
    outputs = cfg.num_classes if cfg.task == CLASSIFICATION else cfg.horizon
    return cfg.to_model_config(len(gasf_channels), (length, length), series_channels, length, outputs,
                               gasf_channels)


def restore(checkpoint_path, overrides: Optional[Dict] = None):
    """Model, run configuration and normalizer stored in a checkpoint.

    Overrides may redirect inputs and outputs but not change a setting in
    ``FIXED_BY_CHECKPOINT``; those decide which samples the model trained on.
    """
    checkpoint = load_checkpoint(checkpoint_path)
    for key, value in (overrides or {}).items():
        if key in FIXED_BY_CHECKPOINT and value is not None and value != checkpoint.config.get(key):
            raise ConfigError(f"{key}: the checkpoint was trained with {checkpoint.config.get(key)!r}; "
                              f"evaluating with {value!r} would mix training samples into other splits")
    cfg = RunConfig.from_mapping(checkpoint.config, overrides)
    model = SpikingFusionModel(ModelConfig.from_dict(checkpoint.model_config), seed=cfg.seed)
    model.load_state_dict(checkpoint.tensors)
    normalizer = Normalizer.from_dict(checkpoint.normalizer) if checkpoint.normalizer else None
    return model, cfg, normalizer, checkpoint


def _naive_mse(samples: Sequence[Sample], horizon: int, channel: int) -> float:
    series = np.stack([s.series for s in samples])
    targets = np.stack([s.target for s in samples])
    return regression_loss(naive_forecast(series, horizon, channel), targets, "mse")[0]


def cmd_train(config_path: Optional[str], overrides: Optional[Dict] = None) -> int:
    """Train from a run configuration; writes the checkpoint and history.csv to ``out``."""
    cfg = load_run_config(config_path, overrides)
    data = prepare_data(cfg)
    model_cfg = build_model_config(cfg, data)
    model = SpikingFusionModel(model_cfg, seed=cfg.seed)
    logger.info("training on %d samples, validating on %d", len(data.train), len(data.val))

    trainer = Trainer(model, cfg.to_train_config())
    history = trainer.fit(data.train, data.val)
    if cfg.task != CLASSIFICATION and data.val:
        logger.info("naive last-value baseline val mse=%.6f", _naive_mse(data.val, cfg.horizon, data.target_index))

    checkpoint = Checkpoint(
        tensors=model.state_dict(),
        config=cfg.to_dict(),
        model_config=model_cfg.to_dict(),
        normalizer=data.normalizer.to_dict(),
        rng_state=trainer.rng.bit_generator.state,
        history=history,
        probe_traces=trainer.probe_traces,
    )
    encoded = encode(checkpoint)
    columns = ["epoch", "train_loss", "val_loss", *metric_names(cfg.task)]
    ensure_dir(cfg.out)
    with atomic_paths(os.path.join(cfg.out, CHECKPOINT_FILE), os.path.join(cfg.out, HISTORY_FILE)) as temps:
        with open(temps[0], "wb") as f:
            f.write(encoded)
        write_csv(pd.DataFrame(history, columns=columns), temps[1])
    return 0


def format_report(task: str, values: Dict[str, float], split_name: str, extra: Optional[Dict] = None) -> str:
    lines = [f"{task} metrics on {split_name} split"]
    lines += [f"  {name:<10} {values[name]:.6f}" for name in metric_names(task)]
    for name, value in (extra or {}).items():
        lines.append(f"  {name:<10} {value:.6f}")
    return "\n".join(lines)


def cmd_eval(checkpoint_path, overrides: Optional[Dict] = None, split_name: str = "test",
             out: Optional[str] = None) -> int:
    """Evaluate a checkpoint on one split of its dataset; prints a report and writes metrics.csv."""
    model, cfg, normalizer, _ = restore(checkpoint_path, overrides)
    if split_name not in SPLITS:
        raise ConfigError(f"split: expected one of {SPLITS}, got '{split_name}'")
    data = prepare_data(cfg, normalizer)
    samples = data.part(split_name)
    if not samples:
        raise DataError(f"the {split_name} split is empty")
    result = evaluate(model, samples, cfg.batch_size, cfg.loss)
    extra = {"loss": result.loss}
    if cfg.task != CLASSIFICATION:
        extra["naive_mse"] = _naive_mse(samples, cfg.horizon, data.target_index)
    print(format_report(cfg.task, result.metrics, split_name, extra))
    out = out or cfg.out
    ensure_dir(out)
    frame = pd.DataFrame([result.metrics], columns=list(metric_names(cfg.task)))
    atomic_write_csv(frame, os.path.join(out, METRICS_FILE))
    return 0


def _predict_inputs(cfg: RunConfig, input_path, normalizer: Optional[Normalizer]) -> List[Sample]:
    if cfg.source == "series":
        # labels are optional; a label column, if present, is ignored
        schema = replace(_schema(cfg), label=None)
        if normalizer is not None and normalizer.channels:
            schema = replace(schema, columns=tuple(normalizer.channels))
        return lookback_windows(load_csv(input_path, schema), cfg.lookback, cfg.stride)
    return load_beats(input_path, cfg.label_column or "label", labeled=False)


def cmd_predict(checkpoint_path, input_path, output_path: Optional[str] = None) -> int:
    """Predict every input window; forecasts are written back in the target channel's units."""
    model, cfg, normalizer, _ = restore(checkpoint_path)
    samples = _predict_inputs(cfg, input_path, normalizer)
    expected = (model.cfg.series_channels, model.cfg.series_length)
    if samples[0].series.shape != expected:
        raise DataError(f"input windows are {samples[0].series.shape}, the model expects {expected}")
    if normalizer is not None:
        samples = normalize(samples, normalizer)

    outputs = []
    for start in range(0, len(samples), cfg.batch_size):
        images, series, _ = batch_arrays(samples[start:start + cfg.batch_size], model.cfg.gasf_channels)
        if model.task.kind == CLASSIFICATION:
            outputs.append(model.predict_proba(images, series))
        else:
            outputs.append(model.forward(images, series).value)
    outputs = np.concatenate(outputs)

    if model.task.kind == CLASSIFICATION:
        frame = pd.DataFrame(outputs, columns=[f"p_{k}" for k in range(outputs.shape[1])])
        frame.insert(0, "label", outputs.argmax(axis=1))
    else:
        if normalizer is not None and normalizer.target is not None:
            outputs = normalizer.invert_target(outputs)
        frame = pd.DataFrame(outputs, columns=[f"h{k + 1}" for k in range(outputs.shape[1])])
    output_path = output_path or os.path.join(cfg.out, PREDICTIONS_FILE)
    atomic_write_csv(frame, output_path)
    logger.info("wrote %d predictions to %s", len(frame), output_path)
    return 0


def heatmap_frame(rates: Dict[str, np.ndarray]) -> pd.DataFrame:
    """Rows are neurons, columns are components; shorter components are padded with empty cells."""
    return pd.DataFrame({name: pd.Series(values) for name, values in rates.items()})


def heatmap_file(use_wavelet: bool) -> str:
    return "heatmap_wavelet.csv" if use_wavelet else "heatmap_nowavelet.csv"


def spectrum_frame(probe_traces: Mapping[str, Sequence[Sequence[float]]]) -> pd.DataFrame:
    """FFT amplitude of each epoch's trace, one row per component and epoch.

    Encoder rows sit next to the fused rows so their epoch-to-epoch stability can be compared.
    """
    frames = []
    for component, traces in probe_traces.items():
        if not traces:
            continue
        amplitudes = np.abs(fft1d(np.asarray(traces, dtype=np.float64), axis=-1))
        frame = pd.DataFrame(amplitudes, columns=[f"bin_{k}" for k in range(amplitudes.shape[1])])
        frame.insert(0, "epoch", np.arange(1, len(traces) + 1))
        frame.insert(0, "component", component)
        frames.append(frame)
    if not frames:
        raise DataError("checkpoint holds no per-epoch traces")
    return pd.concat(frames, ignore_index=True)


def render_heatmap(frame: pd.DataFrame, path):
    """PNG rendering of a heatmap frame; needs the optional ``plot`` extra."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib is not installed; skipping %s", path)
        return None
    fig, axes = plt.subplots(1, frame.shape[1], figsize=(3 * frame.shape[1], 4))
    for ax, name in zip(np.atleast_1d(axes), frame.columns):
        values = frame[name].dropna().to_numpy()
        side = int(np.ceil(np.sqrt(len(values))))
        grid = np.full(side * side, np.nan)
        grid[:len(values)] = values
        ax.imshow(grid.reshape(side, side), vmin=0.0, vmax=1.0, cmap="viridis")
        ax.set_title(name)
        ax.axis("off")
    with atomic_path(path) as temp:
        fig.savefig(temp, format="png", dpi=100)
    plt.close(fig)
    return path


def cmd_inspect(checkpoint_path, what: str = "heatmap", overrides: Optional[Dict] = None,
                split_name: str = "val", samples: int = 32, out: Optional[str] = None, render: bool = False) -> int:
    """Write activation heatmaps or per-epoch spectra of a trained model as CSV matrices."""
    if what not in ("heatmap", "spectrum"):
        raise ConfigError(f"inspect: expected 'heatmap' or 'spectrum', got '{what}'")
    if samples < 1:
        raise ConfigError(f"samples: must be positive, got {samples}")
    model, cfg, normalizer, checkpoint = restore(checkpoint_path, overrides)
    out = out or cfg.out
    if what == "spectrum":
        frame = spectrum_frame(checkpoint.probe_traces)
        ensure_dir(out)
        atomic_write_csv(frame, os.path.join(out, SPECTRUM_FILE))
        return 0

    data = prepare_data(cfg, normalizer)
    chosen = data.part(split_name) or data.train
    images, series, _ = batch_arrays(chosen[:samples], model.cfg.gasf_channels)
    frame = heatmap_frame(model.activation_rates(images, series))
    ensure_dir(out)
    path = os.path.join(out, heatmap_file(model.cfg.use_wavelet))
    atomic_write_csv(frame, path)
    if render:
        render_heatmap(frame, os.path.splitext(path)[0] + ".png")
    logger.info("wrote %s (%d neurons max, components %s)", path, len(frame), list(frame.columns))
    return 0
