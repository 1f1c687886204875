"""End-to-end spiking fusion network: wavelet preprocessing, two encoders, joint learning, output head."""

import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .encoders import ImageEncoder, ImageEncoderConfig, SeriesEncoder, SeriesEncoderConfig
from .errors import CheckpointError, ConfigError, ShapeError
from .fusion import (
    CLASSIFICATION,
    FusionBundle,
    JointLearningModule,
    JointSpaceConfig,
    OutputHead,
    Task,
    head_steps,
)
from .lif import LifParams, SpikeTensor, pulse_accumulate
from .numerics import Parameter, Tensor, as_tensor, next_power_of_two
from .wavelet import haar_dwt2d, pad_to_multiple, subband_stack, wavelet_packet1d

logger = logging.getLogger(__name__)

TRACE_COMPONENTS = ("image_encoder", "series_encoder", "fused")


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to rebuild a :class:`SpikingFusionModel`.

    ``image_channels``/``image_size`` and ``series_channels``/``series_length``
    describe the raw inputs; the encoder configurations are derived from them
    after the optional wavelet step.
    """

    task: str
    outputs: int
    image_channels: int
    image_size: Tuple[int, int]
    series_channels: int
    series_length: int
    steps: int = 8
    use_wavelet: bool = True
    image_stages: Tuple[int, ...] = (16, 32)
    series_hidden: Tuple[int, ...] = (64, 64)
    kernel_size: int = 3
    padding: int = 1
    pool: int = 2
    d_j: int = 64
    epsilon: float = 1e-6
    gasf_channels: Optional[Tuple[int, ...]] = None
    lif: LifParams = field(default_factory=LifParams)

    def __post_init__(self):
        object.__setattr__(self, "image_size", tuple(int(s) for s in self.image_size))
        object.__setattr__(self, "image_stages", tuple(int(c) for c in self.image_stages))
        object.__setattr__(self, "series_hidden", tuple(int(h) for h in self.series_hidden))
        if isinstance(self.lif, dict):
            object.__setattr__(self, "lif", LifParams(**self.lif))
        if self.steps < 1:
            raise ConfigError(f"steps must be at least 1, got {self.steps}")
        if len(self.image_size) != 2 or min(self.image_size) < 1:
            raise ConfigError(f"image_size must be two positive extents, got {self.image_size}")
        if self.image_channels < 1 or self.series_channels < 1 or self.series_length < 1:
            raise ConfigError("input channels and series length must be positive")
        if self.gasf_channels is not None:
            object.__setattr__(self, "gasf_channels", tuple(int(c) for c in self.gasf_channels))
            self._check_gasf_channels()
        self.task_spec()
        self.joint_config()

    def _check_gasf_channels(self):
        if len(self.gasf_channels) != self.image_channels:
            raise ConfigError(f"gasf_channels {self.gasf_channels} must name {self.image_channels} series channel(s)")
        if max(self.gasf_channels) >= self.series_channels or min(self.gasf_channels) < 0:
            raise ConfigError(f"gasf_channels {self.gasf_channels} out of range for {self.series_channels} channel(s)")

    def task_spec(self) -> Task:
        return Task(self.task, self.outputs)

    def _image_input(self):
        height, width = self.image_size
        if self.use_wavelet:
            return 4 * self.image_channels, (height + 1) // 2, (width + 1) // 2
        return self.image_channels, height, width

    def _series_input(self):
        if self.use_wavelet:
            return 4 * self.series_channels, -(-self.series_length // 4)
        return self.series_channels, self.series_length

    def image_encoder_config(self) -> ImageEncoderConfig:
        channels, height, width = self._image_input()
        return ImageEncoderConfig(channels, height, width, channels=self.image_stages,
                                  kernel_size=self.kernel_size, padding=self.padding,
                                  pool=self.pool, lif=self.lif)

    def series_encoder_config(self) -> SeriesEncoderConfig:
        channels, length = self._series_input()
        return SeriesEncoderConfig(channels, length, hidden=self.series_hidden, lif=self.lif)

    def joint_config(self) -> JointSpaceConfig:
        image_neurons = int(np.prod(self.image_encoder_config().output_shape()))
        series_neurons = int(np.prod(self.series_encoder_config().output_shape()))
        return JointSpaceConfig(2 * image_neurons, 2 * series_neurons, d_j=self.d_j, epsilon=self.epsilon)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["image_size"] = list(self.image_size)
        data["image_stages"] = list(self.image_stages)
        data["series_hidden"] = list(self.series_hidden)
        if self.gasf_channels is not None:
            data["gasf_channels"] = list(self.gasf_channels)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "ModelConfig":
        return cls(**data)


@dataclass
class ForwardPass:
    """Intermediate results of one forward pass, kept for inspection."""

    image_spikes: SpikeTensor
    image_stages: List[Tensor]
    series_spikes: SpikeTensor
    series_stages: List[Tensor]
    bundle: FusionBundle
    output: Tensor


def wavelet_inputs(images, series) -> Tuple[np.ndarray, np.ndarray]:
    """Channel-stacked Haar subbands of B x C x H x W images and B x C x L series."""
    images = np.asarray(images, dtype=np.float64)
    series = np.asarray(series, dtype=np.float64)
    padded, _ = pad_to_multiple(series, 4, axis=-1)
    return subband_stack(haar_dwt2d(images)), subband_stack(wavelet_packet1d(padded))


class SpikingFusionModel:
    """Image and series pulse encoders joined in a shared frequency-domain space."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        image_rng, series_rng, joint_rng, head_rng = (np.random.default_rng(s)
                                                      for s in np.random.SeedSequence(seed).spawn(4))
        self.image_encoder = ImageEncoder(cfg.image_encoder_config(), image_rng)
        self.series_encoder = SeriesEncoder(cfg.series_encoder_config(), series_rng)
        self.joint = JointLearningModule(cfg.joint_config(), joint_rng)
        self.head = OutputHead(cfg.d_j, cfg.task_spec(), head_rng)
        logger.debug("built model with %d parameters", sum(p.size for p in self.parameters()))

    @property
    def task(self) -> Task:
        return self.head.task

    def parameters(self) -> List[Parameter]:
        return (self.image_encoder.parameters() + self.series_encoder.parameters()
                + self.joint.parameters() + self.head.parameters())

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((p.name, p.value.copy()) for p in self.parameters())

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        params = {p.name: p for p in self.parameters()}
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise CheckpointError(f"parameter names differ: missing {missing}, unexpected {unexpected}")
        for name, param in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != param.shape:
                raise CheckpointError(f"parameter '{name}' has shape {param.shape}, stored {value.shape}")
            param.assign(value)

    def preprocess(self, images, series) -> Tuple[np.ndarray, np.ndarray]:
        images = as_tensor(images).value
        series = as_tensor(series).value
        if images.ndim != 4 or series.ndim != 3:
            raise ShapeError(f"expected B x C x H x W images and B x C x L series, got {images.shape}, {series.shape}")
        if images.shape[0] != series.shape[0]:
            raise ShapeError(f"batch sizes differ: {images.shape[0]} images, {series.shape[0]} series")
        if self.cfg.use_wavelet:
            return wavelet_inputs(images, series)
        return images, series

    def run(self, images, series, sigma2: Optional[float] = None) -> ForwardPass:
        """Full forward pass; differentiable when run under a :class:`~spiketsa.numerics.Tape`."""
        images, series = self.preprocess(images, series)
        image_spikes, image_stages = self.image_encoder.forward(images, self.cfg.steps)
        series_spikes, series_stages = self.series_encoder.forward(series, self.cfg.steps)
        bundle = self.joint.forward(image_spikes, series_spikes, sigma2=sigma2)
        output = self.head(bundle.j_fusion)
        return ForwardPass(image_spikes, image_stages, series_spikes, series_stages, bundle, output)

    def forward(self, images, series) -> Tensor:
        """B x N logits for classification, B x H horizon values for regression."""
        return self.run(images, series).output

    __call__ = forward

    def predict_proba(self, images, series) -> np.ndarray:
        if self.task.kind != CLASSIFICATION:
            raise ConfigError("predict_proba is only defined for classification models")
        logits = self.forward(images, series).value
        shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
        return shifted / shifted.sum(axis=1, keepdims=True)

    def predict(self, images, series) -> np.ndarray:
        output = self.forward(images, series).value
        if self.task.kind == CLASSIFICATION:
            return output.argmax(axis=1)
        return output

    def activation_rates(self, images, series) -> Dict[str, np.ndarray]:
        """Time- and batch-averaged activity per neuron of each component, all in [0, 1].

        Encoders report spike rates; the fused component reports the fraction
        of frequency bins and samples where its J_fusion unit is positive.
        """
        result = self.run(images, series)
        rates = {}
        for name, spikes in (("image_encoder", result.image_spikes), ("series_encoder", result.series_spikes)):
            stats = pulse_accumulate(spikes)
            rates[name] = stats.rates.mean(axis=0).reshape(-1)
        rates["fused"] = (result.bundle.j_fusion.value > 0).mean(axis=(0, 1))
        return rates

    def probe_traces(self, images, series) -> Dict[str, np.ndarray]:
        """Per-component traces for spectra, keyed by ``TRACE_COMPONENTS``.

        Encoders give the fraction of neurons firing at each time step, zero-padded
        to the fused path's bin count; ``fused`` is the batch- and feature-averaged
        head output at every frequency bin.
        """
        result = self.run(images, series)
        bins = next_power_of_two(self.cfg.steps)
        traces = {}
        for name, spikes in (("image_encoder", result.image_spikes), ("series_encoder", result.series_spikes)):
            values = spikes.numpy()
            fraction = pulse_accumulate(values).trace / (values.size // values.shape[0])
            traces[name] = np.pad(fraction, (0, bins - len(fraction)))
        traces["fused"] = head_steps(result.bundle.j_fusion, self.head.weights()).value.mean(axis=(1, 2))
        return traces
