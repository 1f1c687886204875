"""Dataset ingestion, windowing, normalization, GASF imaging, synthetic generators and splits."""

import logging
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import (
    ConfigError,
    CsvParseError,
    DataError,
    DuplicateTimestampError,
    EmptyFileError,
    GapError,
    MissingColumnError,
    ShapeError,
    ZeroVarianceError,
)
from .fusion import CLASSIFICATION, REGRESSION

logger = logging.getLogger(__name__)

CHRONOLOGICAL = "chronological"
SHUFFLED = "shuffled"
ETT_CHANNELS = ("HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT")
AR_COEFFICIENTS = (0.6, -0.3)
_MISSING = {"", "nan", "NaN", "NA", "null"}


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping of a series CSV.

    ``columns=None`` takes every column except the timestamp and label columns.
    """

    timestamp: str = "date"
    columns: Optional[Tuple[str, ...]] = None
    target: Optional[str] = "OT"
    label: Optional[str] = None
    fill_gaps: bool = True

    def __post_init__(self):
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(self.columns))
            if not self.columns:
                raise ConfigError("schema columns must not be empty")

    @classmethod
    def stock(cls) -> "CsvSchema":
        return cls(timestamp="date", columns=("open", "close"), target="close")


@dataclass
class SeriesDataset:
    """Time-ordered multichannel rows with no missing values."""

    name: str
    channels: Tuple[str, ...]
    timestamps: np.ndarray
    values: np.ndarray
    target: Optional[str] = None
    labels: Optional[np.ndarray] = None
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.channels):
            raise ShapeError(f"values {self.values.shape} do not match {len(self.channels)} channels")
        if len(self.timestamps) != self.values.shape[0]:
            raise ShapeError("timestamps and values differ in length")
        if np.isnan(self.values).any():
            raise GapError(f"dataset '{self.name}' contains missing values")
        if self.target is not None and self.target not in self.channels:
            raise MissingColumnError(f"target channel '{self.target}' is not one of {list(self.channels)}")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def target_index(self) -> Optional[int]:
        return None if self.target is None else self.channels.index(self.target)


@dataclass
class Sample:
    """One training example: a C x L series window, an optional native image and its target.

    ``index`` orders samples in time (the window's first row for sliced datasets).
    """

    series: np.ndarray
    target: Union[int, np.ndarray]
    index: int = 0
    image: Optional[np.ndarray] = None

    @property
    def label(self) -> int:
        return int(self.target)


def _parse_error(name, column, row_position, raw):
    return CsvParseError(
        f"{name}: cannot parse '{raw}' in column '{column}' at data row {row_position + 1}",
        row=row_position + 1,
        column=column,
    )


def _read_frame(path) -> pd.DataFrame:
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyFileError(f"{path} is empty")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise CsvParseError(f"{path}: {e}")
    if frame.empty:
        raise EmptyFileError(f"{path} has a header but no data rows")
    return frame


def _numeric_column(frame, column, name):
    raw = frame[column].str.strip()
    missing = raw.isin(_MISSING)
    parsed = pd.to_numeric(raw.where(~missing), errors="coerce")
    bad = parsed.isna() & ~missing
    if bad.any():
        position = int(np.flatnonzero(bad.to_numpy())[0])
        raise _parse_error(name, column, position, raw.iloc[position])
    return parsed.to_numpy(dtype=np.float64)


def _timestamps(frame, column, name):
    raw = frame[column].str.strip()
    numeric = pd.to_numeric(raw, errors="coerce")
    if not numeric.isna().any():
        return numeric.to_numpy(dtype=np.float64)
    parsed = pd.to_datetime(raw, errors="coerce")
    if parsed.isna().any():
        position = int(np.flatnonzero(parsed.isna().to_numpy())[0])
        raise _parse_error(name, column, position, raw.iloc[position])
    return parsed.to_numpy()


def load_csv(path, schema: Optional[CsvSchema] = None) -> SeriesDataset:
    """Read a series CSV, sort it by time and forward-fill isolated gaps.

    Raises:
        MissingColumnError: the header lacks a schema column.
        CsvParseError: a cell is not a number (``row``/``column`` name it).
        EmptyFileError: no header or no data rows.
        DuplicateTimestampError: a timestamp repeats.
        GapError: a channel starts with a missing value, or gaps are present
            and ``schema.fill_gaps`` is off.
    """
    schema = schema or CsvSchema()
    name = os.path.basename(str(path))
    frame = _read_frame(path)
    frame.columns = [c.strip() for c in frame.columns]
    reserved = {schema.timestamp, schema.label}
    columns = schema.columns or tuple(c for c in frame.columns if c not in reserved)
    required = [schema.timestamp, *columns] + ([schema.label] if schema.label else [])
    absent = [c for c in required if c not in frame.columns]
    if absent:
        raise MissingColumnError(f"{name}: missing column(s) {absent}; header is {list(frame.columns)}")
    if not columns:
        raise MissingColumnError(f"{name}: no value columns besides '{schema.timestamp}'")

    stamps = _timestamps(frame, schema.timestamp, name)
    values = np.column_stack([_numeric_column(frame, c, name) for c in columns])
    labels = None
    if schema.label:
        labels = _numeric_column(frame, schema.label, name)
        if np.isnan(labels).any() or np.any(labels != np.round(labels)) or np.any(labels < 0):
            raise CsvParseError(f"{name}: labels must be non-negative integers", column=schema.label)
        labels = labels.astype(np.int64)

    order = np.argsort(stamps, kind="mergesort")
    stamps, values = stamps[order], values[order]
    if labels is not None:
        labels = labels[order]
    repeated = stamps[1:] == stamps[:-1]
    if repeated.any():
        raise DuplicateTimestampError(f"{name}: duplicate timestamp {stamps[1:][repeated][0]}")

    missing = np.isnan(values)
    filled = int(missing.sum())
    if filled:
        if missing[0].any():
            leading = [c for c, m in zip(columns, missing[0]) if m]
            raise GapError(f"{name}: leading gap in column(s) {leading} cannot be forward-filled")
        if not schema.fill_gaps:
            raise GapError(f"{name}: {filled} missing value(s) and gap filling is disabled")
        gap_columns = [c for c, m in zip(columns, missing.any(axis=0)) if m]
        values = pd.DataFrame(values).ffill().to_numpy()
        logger.warning("%s: forward-filled %d missing value(s) in %s", name, filled, gap_columns)

    target = schema.target if schema.target in columns else None
    dataset = SeriesDataset(name, tuple(columns), stamps, values, target=target, labels=labels,
                            metadata={"path": str(path), "forward_filled": filled})
    logger.info("loaded %s: %d rows, %d channels", name, dataset.rows, len(columns))
    return dataset


def write_series_csv(dataset: SeriesDataset, path, timestamp: str = "date"):
    """Write a dataset in the layout :func:`load_csv` reads."""
    frame = pd.DataFrame(dataset.values, columns=list(dataset.channels))
    frame.insert(0, timestamp, dataset.timestamps)
    if dataset.labels is not None:
        frame["label"] = dataset.labels
    frame.to_csv(path, index=False)


def load_beats(path, label_column: str = "label", labeled: bool = True) -> List[Sample]:
    """Pre-extracted beat windows, one per row: the values followed by an integer class label.

    With ``labeled=False`` the label column is optional and absent labels are -1.
    """
    name = os.path.basename(str(path))
    frame = _read_frame(path)
    frame.columns = [c.strip() for c in frame.columns]
    has_labels = label_column in frame.columns
    if labeled and not has_labels:
        raise MissingColumnError(f"{name}: missing label column '{label_column}'")
    value_columns = [c for c in frame.columns if c != label_column]
    if not value_columns:
        raise MissingColumnError(f"{name}: no beat value columns")
    values = np.column_stack([_numeric_column(frame, c, name) for c in value_columns])
    if np.isnan(values).any():
        row, col = np.argwhere(np.isnan(values))[0]
        raise GapError(f"{name}: empty cell in column '{value_columns[col]}' at data row {row + 1}")
    if not has_labels:
        labels = np.full(len(frame), -1)
    else:
        labels = _numeric_column(frame, label_column, name)
        if np.isnan(labels).any() or np.any(labels != np.round(labels)) or np.any(labels < 0):
            raise CsvParseError(f"{name}: labels must be non-negative integers", column=label_column)
    logger.info("loaded %s: %d beats of length %d", name, len(labels), len(value_columns))
    return [Sample(values[i][None, :], int(labels[i]), index=i) for i in range(len(labels))]


def window_count(rows: int, lookback: int, horizon: int, stride: int = 1) -> int:
    if rows < lookback + horizon:
        return 0
    return (rows - lookback - horizon) // stride + 1


def window(dataset: SeriesDataset, lookback: int, horizon: int, stride: int = 1,
           task: str = REGRESSION) -> List[Sample]:
    """Sliding windows over the dataset.

    Regression targets are the next ``horizon`` values of the target channel;
    classification targets are the label of the window's last row.
    """
    if lookback < 1 or horizon < 1 or stride < 1:
        raise ConfigError(f"lookback, horizon and stride must be positive, got {lookback}, {horizon}, {stride}")
    count = window_count(dataset.rows, lookback, horizon, stride)
    if count == 0:
        raise DataError(f"{dataset.name}: {dataset.rows} rows cannot hold lookback {lookback} + horizon {horizon}")
    if task == REGRESSION and dataset.target_index is None:
        raise ConfigError(f"{dataset.name}: regression windows need a target channel")
    if task == CLASSIFICATION and dataset.labels is None:
        raise ConfigError(f"{dataset.name}: classification windows need a label column")

    samples = []
    transposed = dataset.values.T
    for k in range(count):
        start = k * stride
        end = start + lookback
        if task == CLASSIFICATION:
            target = int(dataset.labels[end - 1])
        else:
            target = transposed[dataset.target_index, end:end + horizon].copy()
        samples.append(Sample(transposed[:, start:end].copy(), target, index=start))
    logger.info("built %d windows (lookback %d, horizon %d, stride %d)", count, lookback, horizon, stride)
    return samples


def lookback_windows(dataset: SeriesDataset, lookback: int, stride: int = 1) -> List[Sample]:
    """Input-only windows for prediction: every complete lookback window, with no target."""
    if lookback < 1 or stride < 1:
        raise ConfigError(f"lookback and stride must be positive, got {lookback}, {stride}")
    count = window_count(dataset.rows, lookback, 0, stride)
    if count == 0:
        raise DataError(f"{dataset.name}: {dataset.rows} rows are fewer than lookback {lookback}")
    transposed = dataset.values.T
    return [Sample(transposed[:, k * stride:k * stride + lookback].copy(), -1, index=k * stride)
            for k in range(count)]


@dataclass
class Normalizer:
    """Per-channel z-score statistics; ``target`` is the channel regression targets come from."""

    mean: np.ndarray
    std: np.ndarray
    channels: Tuple[str, ...] = ()
    target: Optional[int] = None

    @classmethod
    def fit(cls, values, channels: Sequence[str] = (), target: Optional[int] = None) -> "Normalizer":
        """Fit on rows x C values."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] == 0:
            raise ShapeError(f"Normalizer.fit needs a non-empty rows x channels array, got {values.shape}")
        mean = values.mean(axis=0)
        std = values.std(axis=0)
        flat = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
        if flat.any():
            names = [channels[i] if i < len(channels) else str(i) for i in np.flatnonzero(flat)]
            raise ZeroVarianceError(f"channel(s) {names} have zero variance")
        return cls(mean, std, tuple(channels), target)

    @classmethod
    def fit_samples(cls, samples: Sequence[Sample], channels: Sequence[str] = (),
                    target: Optional[int] = None) -> "Normalizer":
        """Fit on the concatenated series windows of ``samples`` (the training split)."""
        if not samples:
            raise DataError("cannot fit a normalizer on zero samples")
        return cls.fit(np.concatenate([s.series for s in samples], axis=1).T, channels, target)

    def _view(self, stats, ndim, axis):
        shape = [1] * ndim
        shape[axis] = stats.shape[0]
        return stats.reshape(shape)

    def apply(self, values, axis: int = -1) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        axis %= values.ndim
        return (values - self._view(self.mean, values.ndim, axis)) / self._view(self.std, values.ndim, axis)

    def invert(self, values, axis: int = -1) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        axis %= values.ndim
        return values * self._view(self.std, values.ndim, axis) + self._view(self.mean, values.ndim, axis)

    def apply_target(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean[self.target]) / self.std[self.target]

    def invert_target(self, values) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std[self.target] + self.mean[self.target]

    def to_dict(self) -> Dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "channels": list(self.channels),
            "target": self.target,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Normalizer":
        return cls(np.asarray(data["mean"], dtype=np.float64), np.asarray(data["std"], dtype=np.float64),
                   tuple(data.get("channels", ())), data.get("target"))


def normalize(obj, normalizer: Normalizer, direction: str = "apply"):
    """z-score (``apply``) or restore (``invert``) a dataset, a sample or a list of samples."""
    if direction not in ("apply", "invert"):
        raise ConfigError(f"direction must be 'apply' or 'invert', got '{direction}'")
    forward = direction == "apply"
    if isinstance(obj, list):
        return [normalize(item, normalizer, direction) for item in obj]
    if isinstance(obj, SeriesDataset):
        values = normalizer.apply(obj.values) if forward else normalizer.invert(obj.values)
        return replace(obj, values=values)
    if isinstance(obj, Sample):
        series = normalizer.apply(obj.series, axis=0) if forward else normalizer.invert(obj.series, axis=0)
        target = obj.target
        if isinstance(target, np.ndarray) and normalizer.target is not None:
            target = normalizer.apply_target(target) if forward else normalizer.invert_target(target)
        return replace(obj, series=series, target=target)
    values = np.asarray(obj, dtype=np.float64)
    return normalizer.apply(values) if forward else normalizer.invert(values)


def rescale_unit(window) -> np.ndarray:
    """Min-max rescale to [-1, 1]; a constant window maps to zeros."""
    x = np.asarray(window, dtype=np.float64)
    low, high = x.min(), x.max()
    if high - low <= 0:
        return np.zeros_like(x)
    return np.clip((2 * x - high - low) / (high - low), -1.0, 1.0)


def gasf(window, rescale: bool = True) -> np.ndarray:
    """Gramian Angular Summation Field of a length-L window: G[j, k] = cos(phi_j + phi_k)."""
    x = np.asarray(window, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ShapeError(f"gasf needs a non-empty 1-D window, got shape {x.shape}")
    x = rescale_unit(x) if rescale else np.clip(x, -1.0, 1.0)
    sine = np.sqrt(1.0 - x ** 2)
    return np.outer(x, x) - np.outer(sine, sine)


def gasf_images(series, channels: Optional[Sequence[int]] = None) -> np.ndarray:
    """GASF image per selected channel: B x C x L windows -> B x C' x L x L."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 3:
        raise ShapeError(f"gasf_images needs B x C x L windows, got {series.shape}")
    channels = range(series.shape[1]) if channels is None else channels
    return np.stack([np.stack([gasf(s[c]) for c in channels]) for s in series])


def make_samples(samples: Sequence[Sample], channels: Optional[Sequence[int]] = None) -> List[Sample]:
    """Attach GASF images derived from each sample's own window."""
    return [replace(s, image=gasf_images(s.series[None], channels)[0]) for s in samples]


def batch_arrays(samples: Sequence[Sample], channels: Optional[Sequence[int]] = None):
    """Stack samples into (images, series, targets); missing images are rendered as GASF."""
    if not samples:
        raise DataError("cannot batch zero samples")
    series = np.stack([s.series for s in samples])
    if all(s.image is not None for s in samples):
        images = np.stack([s.image for s in samples])
    else:
        images = gasf_images(series, channels)
    if isinstance(samples[0].target, np.ndarray):
        targets = np.stack([s.target for s in samples])
    else:
        targets = np.array([s.label for s in samples], dtype=np.int64)
    return images, series, targets


def synth_multimodal(seed: int, n: int, task: str = "classify", classes: int = 2, length: int = 64,
                     horizon: int = 8, frequencies: Optional[Sequence[float]] = None,
                     noise: float = 0.1) -> List[Sample]:
    """Deterministic toy task.

    ``classify``: class c is a sinusoid of frequency f_c (cycles per window,
    default 1, 4, 7, ...) with random phase plus Gaussian noise. ``forecast``:
    windows over one AR(2) process with coefficients :data:`AR_COEFFICIENTS`.
    """
    rng = np.random.default_rng(seed)
    if n < 0:
        raise ConfigError(f"n must be non-negative, got {n}")
    if n == 0:
        return []
    if task == "classify":
        frequencies = tuple(frequencies or (1 + 3 * c for c in range(classes)))
        if len(frequencies) != classes:
            raise ConfigError(f"{classes} classes need {classes} frequencies, got {len(frequencies)}")
        labels = rng.permutation(np.arange(n) % classes)
        t = np.arange(length) / length
        samples = []
        for i, label in enumerate(labels):
            phase = rng.uniform(0, 2 * np.pi)
            wave = np.sin(2 * np.pi * frequencies[label] * t + phase) + noise * rng.standard_normal(length)
            samples.append(Sample(wave[None, :], int(label), index=i))
        return samples
    if task == "forecast":
        total = n + length + horizon - 1
        phi1, phi2 = AR_COEFFICIENTS
        x = np.zeros(total + 2)
        shocks = rng.standard_normal(total + 2)
        for t in range(2, total + 2):
            x[t] = phi1 * x[t - 1] + phi2 * x[t - 2] + shocks[t]
        x = x[2:]
        return [Sample(x[None, i:i + length].copy(), x[i + length:i + length + horizon].copy(), index=i)
                for i in range(n)]
    raise ConfigError(f"unknown synthetic task '{task}'; use 'classify' or 'forecast'")


def _bump(t, center, width, height):
    return height * np.exp(-0.5 * ((t - center) / width) ** 2)


# Per class: (P height, QRS center, QRS width, T height).
_BEAT_MORPHOLOGY = {
    0: (0.15, 0.40, 0.020, 0.30),
    1: (0.15, 0.40, 0.050, 0.30),
    2: (0.15, 0.40, 0.020, -0.30),
    3: (0.00, 0.40, 0.020, 0.30),
    4: (0.15, 0.30, 0.030, 0.20),
}


def synth_beats(seed: int, n: int, classes: int = 5, length: int = 64, noise: float = 0.05) -> List[Sample]:
    """ECG-like beats built from P, QRS and T bumps whose shape depends on the class."""
    if not 1 <= classes <= len(_BEAT_MORPHOLOGY):
        raise ConfigError(f"classes must be between 1 and {len(_BEAT_MORPHOLOGY)}, got {classes}")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % classes)
    t = np.linspace(0.0, 1.0, length)
    samples = []
    for i, label in enumerate(labels):
        p_height, qrs_center, qrs_width, t_height = _BEAT_MORPHOLOGY[int(label)]
        shift = rng.normal(0.0, 0.01)
        beat = (_bump(t, qrs_center - 0.15 + shift, 0.03, p_height)
                + _bump(t, qrs_center + shift, qrs_width, 1.0)
                - _bump(t, qrs_center + shift + 0.04, 0.015, 0.2)
                + _bump(t, qrs_center + 0.30 + shift, 0.06, t_height)
                + noise * rng.standard_normal(length))
        samples.append(Sample(beat[None, :], int(label), index=i))
    return samples


def synth_series(seed: int, rows: int, channels: Sequence[str] = ETT_CHANNELS, start: str = "2016-07-01",
                 freq: str = "h", target: str = "OT") -> SeriesDataset:
    """ETT-style hourly loads with daily and weekly cycles; the target follows the loads with a lag."""
    if rows < 1:
        raise ConfigError(f"rows must be positive, got {rows}")
    rng = np.random.default_rng(seed)
    hours = np.arange(rows)
    daily = np.sin(2 * np.pi * hours / 24)
    weekly = np.sin(2 * np.pi * hours / (24 * 7))
    loads = []
    for k in range(len(channels) - 1):
        phase = 2 * np.pi * k / len(channels)
        noise = np.convolve(rng.standard_normal(rows), np.ones(6) / 6, mode="same")
        loads.append(5 + 2 * np.roll(daily, k) * np.cos(phase) + 0.5 * weekly + 0.3 * noise)
    lagged = np.roll(np.mean(loads, axis=0), 3) if loads else np.zeros(rows)
    oil = 20 + 4 * daily + 1.5 * weekly + 0.5 * (lagged - 5) + 0.2 * rng.standard_normal(rows)
    values = np.column_stack(loads + [oil])
    names = tuple(channels[:-1]) + (target,)
    stamps = pd.date_range(start, periods=rows, freq=freq).to_numpy()
    return SeriesDataset("synthetic-ett", names, stamps, values, target=target)


def _starting_after(earlier: List[Sample], later: List[Sample], gap: int) -> List[Sample]:
    if not earlier:
        return later
    boundary = earlier[-1].index + gap
    return [s for s in later if s.index >= boundary]


def split(samples: Sequence[Sample], ratios=(0.7, 0.15, 0.15), seed: int = 0,
          mode: str = CHRONOLOGICAL, gap: int = 0) -> Tuple[List[Sample], List[Sample], List[Sample]]:
    """Train/val/test split.

    ``chronological`` keeps time order (train strictly before val before test);
    ``shuffled`` is stratified by class label with a seeded shuffle.

    ``gap`` applies to chronological splits of overlapping windows: a val or test
    window must start at least ``gap`` rows after the last window of the part
    before it, so with ``gap = lookback + horizon`` no row is shared across parts.
    Windows inside the gap are dropped.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    if gap < 0:
        raise ConfigError(f"split gap must be non-negative, got {gap}")
    samples = list(samples)
    if mode == CHRONOLOGICAL:
        ordered = sorted(samples, key=lambda s: s.index)
        n_train = int(round(len(ordered) * ratios[0]))
        n_val = min(int(round(len(ordered) * ratios[1])), len(ordered) - n_train)
        train, val, test = ordered[:n_train], ordered[n_train:n_train + n_val], ordered[n_train + n_val:]
        if gap:
            val = _starting_after(train, val, gap)
            test = _starting_after(val or train, test, gap)
            dropped = len(ordered) - len(train) - len(val) - len(test)
            if dropped:
                logger.info("dropped %d window(s) overlapping the preceding split (gap %d rows)", dropped, gap)
        return train, val, test
    if mode != SHUFFLED:
        raise ConfigError(f"unknown split mode '{mode}'; use '{CHRONOLOGICAL}' or '{SHUFFLED}'")

    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    by_class: Dict[int, List[Sample]] = {}
    for s in samples:
        by_class.setdefault(s.label, []).append(s)
    for label in sorted(by_class):
        members = by_class[label]
        members = [members[i] for i in rng.permutation(len(members))]
        n_train = int(round(len(members) * ratios[0]))
        n_val = min(int(round(len(members) * ratios[1])), len(members) - n_train)
        parts[0].extend(members[:n_train])
        parts[1].extend(members[n_train:n_train + n_val])
        parts[2].extend(members[n_train + n_val:])
    shuffled = tuple([part[i] for i in rng.permutation(len(part))] for part in parts)
    logger.info("split %d samples into %d/%d/%d", len(samples), *(len(p) for p in shuffled))
    return shuffled
