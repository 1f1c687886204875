"""Single-modality pulse encoders built from feature/mapping layers and LIF neurons."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigError, ShapeError
from .lif import LifParams, SpikeTensor, recurrent_spike_sequence, spike_sequence
from .numerics import Parameter, Tensor, as_tensor, avg_pool2d, conv2d, linear, repeat_leading, reshape, transpose

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImageEncoderConfig:
    """Stage plan of the image encoder: each stage is conv -> average pool -> LIF."""

    in_channels: int
    height: int
    width: int
    channels: Tuple[int, ...] = (16, 32)
    kernel_size: int = 3
    padding: int = 1
    pool: int = 2
    init_gain: float = 2.0
    lif: LifParams = field(default_factory=LifParams)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if len(self.channels) < 1:
            raise ConfigError("image encoder needs at least one stage")
        if min(self.channels) < 1 or self.in_channels < 1:
            raise ConfigError(f"channel counts must be positive, got {self.in_channels} -> {self.channels}")
        if self.kernel_size < 1 or self.pool < 1 or self.padding < 0:
            raise ConfigError("kernel_size and pool must be positive and padding non-negative")
        self.output_shape()

    def stage_extents(self) -> List[Tuple[int, int]]:
        extents = []
        height, width = self.height, self.width
        for stage in range(len(self.channels)):
            height = height + 2 * self.padding - self.kernel_size + 1
            width = width + 2 * self.padding - self.kernel_size + 1
            if height < self.pool or width < self.pool:
                raise ConfigError(
                    f"image encoder stage {stage} collapses the spatial extent below 1x1 "
                    f"(input {self.height}x{self.width})"
                )
            height = (height - self.pool) // self.pool + 1
            width = (width - self.pool) // self.pool + 1
            extents.append((height, width))
        return extents

    def output_shape(self) -> Tuple[int, int, int]:
        height, width = self.stage_extents()[-1]
        return self.channels[-1], height, width


@dataclass(frozen=True)
class SeriesEncoderConfig:
    """Stage plan of the series encoder: each stage maps channels to a hidden width, then recurrent LIF."""

    in_channels: int
    length: int
    hidden: Tuple[int, ...] = (64, 64)
    init_gain: float = 2.0
    feedback_gain: float = 0.5
    lif: LifParams = field(default_factory=LifParams)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if len(self.hidden) < 1:
            raise ConfigError("series encoder needs at least one stage")
        if min(self.hidden) < 1 or self.in_channels < 1 or self.length < 1:
            raise ConfigError(f"widths must be positive, got {self.in_channels} -> {self.hidden}, length {self.length}")

    def output_shape(self) -> Tuple[int, int]:
        return self.hidden[-1], self.length


def _normal(rng, shape, std):
    return rng.standard_normal(shape) * std


class ImageEncoder:
    """Alternates feature extraction (conv + pool) and LIF layers over T steps.

    The static image is presented as a constant input current at every step.
    """

    def __init__(self, cfg: ImageEncoderConfig, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        self.kernels: List[Parameter] = []
        self.biases: List[Parameter] = []
        in_channels = cfg.in_channels
        for stage, out_channels in enumerate(cfg.channels):
            fan_in = in_channels * cfg.kernel_size ** 2
            shape = (out_channels, in_channels, cfg.kernel_size, cfg.kernel_size)
            self.kernels.append(Parameter(_normal(rng, shape, cfg.init_gain * np.sqrt(2.0 / fan_in)),
                                          f"image.stage{stage}.kernel"))
            self.biases.append(Parameter(np.zeros(out_channels), f"image.stage{stage}.bias"))
            in_channels = out_channels

    def parameters(self) -> List[Parameter]:
        params = []
        for kernel, bias in zip(self.kernels, self.biases):
            params.extend((kernel, bias))
        return params

    def _feature_map(self, x, stage):
        features = conv2d(x, self.kernels[stage], self.biases[stage], stride=1, padding=self.cfg.padding)
        return avg_pool2d(features, self.cfg.pool)

    def forward(self, images, steps: int) -> Tuple[SpikeTensor, List[Tensor]]:
        """Encode B x C x H x W images; return the final spike train and every stage's spikes."""
        images = as_tensor(images)
        cfg = self.cfg
        if images.ndim != 4 or images.shape[1:] != (cfg.in_channels, cfg.height, cfg.width):
            raise ShapeError(
                f"image encoder expects B x {cfg.in_channels} x {cfg.height} x {cfg.width}, got {images.shape}"
            )
        if steps < 1:
            raise ShapeError(f"time steps must be at least 1, got {steps}")
        batch = images.shape[0]
        stage_spikes = []
        currents = repeat_leading(self._feature_map(images, 0), steps)
        spikes = spike_sequence(currents, cfg.lif)
        stage_spikes.append(spikes)
        for stage in range(1, len(cfg.channels)):
            flat = reshape(spikes, (steps * batch,) + spikes.shape[2:])
            features = self._feature_map(flat, stage)
            spikes = spike_sequence(reshape(features, (steps, batch) + features.shape[1:]), cfg.lif)
            stage_spikes.append(spikes)
        logger.debug("image encoder output %s", spikes.shape)
        return SpikeTensor(spikes, "TBCHW"), stage_spikes


class SeriesEncoder:
    """Alternates mapping layers and LIF neurons with self-feedback across time steps.

    Each stage maps the channel axis to a hidden width at every series position;
    the neuron's input current at step t also receives a learned projection of
    its own spikes at step t-1, while the membrane potential carries over.
    """

    def __init__(self, cfg: SeriesEncoderConfig, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(1)
        self.cfg = cfg
        self.weights: List[Parameter] = []
        self.biases: List[Parameter] = []
        self.feedback: List[Parameter] = []
        in_width = cfg.in_channels
        for stage, width in enumerate(cfg.hidden):
            self.weights.append(Parameter(_normal(rng, (width, in_width), cfg.init_gain * np.sqrt(2.0 / in_width)),
                                          f"series.stage{stage}.weight"))
            self.biases.append(Parameter(np.zeros(width), f"series.stage{stage}.bias"))
            self.feedback.append(Parameter(_normal(rng, (width, width), cfg.feedback_gain / np.sqrt(width)),
                                           f"series.stage{stage}.feedback"))
            in_width = width

    def parameters(self) -> List[Parameter]:
        params = []
        for weight, bias, feedback in zip(self.weights, self.biases, self.feedback):
            params.extend((weight, bias, feedback))
        return params

    def forward(self, series, steps: int) -> Tuple[SpikeTensor, List[Tensor]]:
        """Encode B x C x L series; return T x B x H x L spikes and every stage's spikes."""
        series = as_tensor(series)
        cfg = self.cfg
        if series.ndim != 3 or series.shape[1] != cfg.in_channels:
            raise ShapeError(f"series encoder expects B x {cfg.in_channels} x L, got {series.shape}")
        if series.shape[2] != cfg.length:
            raise ShapeError(f"series encoder expects length {cfg.length}, got {series.shape[2]}")
        if steps < 1:
            raise ShapeError(f"time steps must be at least 1, got {steps}")
        stage_spikes = []
        drive = repeat_leading(linear(transpose(series, (0, 2, 1)), self.weights[0], self.biases[0]), steps)
        spikes = recurrent_spike_sequence(drive, self.feedback[0], cfg.lif)
        stage_spikes.append(spikes)
        for stage in range(1, len(cfg.hidden)):
            drive = linear(spikes, self.weights[stage], self.biases[stage])
            spikes = recurrent_spike_sequence(drive, self.feedback[stage], cfg.lif)
            stage_spikes.append(spikes)
        output = transpose(spikes, (0, 1, 3, 2))
        logger.debug("series encoder output %s", output.shape)
        return SpikeTensor(output, "TBCL"), stage_spikes


def encode_image(images, cfg: ImageEncoderConfig, steps: int, seed: int = 0) -> SpikeTensor:
    """Encode images with a freshly initialized encoder seeded by ``seed``."""
    return ImageEncoder(cfg, np.random.default_rng(seed)).forward(images, steps)[0]


def encode_series(series, cfg: SeriesEncoderConfig, steps: int, seed: int = 0) -> SpikeTensor:
    """Encode series with a freshly initialized encoder seeded by ``seed``."""
    return SeriesEncoder(cfg, np.random.default_rng(seed)).forward(series, steps)[0]
