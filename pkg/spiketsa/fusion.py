"""Multi-modal pulse joint learning: Fourier alignment, weight allocation, fusion and output head."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, InvariantError, ShapeError
from .lif import SpikeTensor
from .numerics import (
    Parameter,
    Tensor,
    add,
    as_tensor,
    exp,
    fft_features,
    linear,
    mean,
    mul,
    mul_along,
    next_power_of_two,
    pad_leading,
    relu,
    reshape,
    scale,
    softmax,
    stack,
    sub,
    take,
)

logger = logging.getLogger(__name__)

CLASSIFICATION = "classification"
REGRESSION = "regression"
BATCH_AXIS = -2


@dataclass(frozen=True)
class Task:
    """Output task: ``classification`` with N classes or ``regression`` with H horizon values."""

    kind: str
    outputs: int

    def __post_init__(self):
        if self.kind not in (CLASSIFICATION, REGRESSION):
            raise ConfigError(f"unknown task '{self.kind}'; use '{CLASSIFICATION}' or '{REGRESSION}'")
        if self.outputs < 1:
            raise ConfigError(f"task outputs must be positive, got {self.outputs}")


@dataclass(frozen=True)
class JointSpaceConfig:
    """Widths of the two frequency-feature inputs and of the joint space."""

    image_width: int
    series_width: int
    d_j: int = 64
    epsilon: float = 1e-6
    init_gain: float = 1.0

    def __post_init__(self):
        if self.d_j < 1:
            raise ConfigError(f"d_j must be at least 1, got {self.d_j}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.image_width < 1 or self.series_width < 1:
            raise ConfigError("feature widths must be positive")


@dataclass
class FusionBundle:
    """Everything the joint learning module computes for one batch."""

    freq_image: Tensor
    freq_series: Tensor
    s_image: Tensor
    s_series: Tensor
    j_align: Tensor
    sigma2: float
    sim_image: Tensor
    sim_series: Tensor
    modality_weights: Tensor
    j_fusion: Tensor

    def validate(self, tolerance=1e-12):
        weights = self.modality_weights.value
        if np.any(weights <= 0) or np.max(np.abs(weights.sum(axis=-1) - 1.0)) > tolerance:
            raise InvariantError("modality weights must be positive and sum to 1")
        for sim in (self.sim_image.value, self.sim_series.value):
            if np.any(sim <= 0) or np.any(sim > 1):
                raise InvariantError("similarity scores must lie in (0, 1]")
        return self


def fourier_align(spikes) -> Tensor:
    """Move spikes to the frequency domain along time.

    T x B x ... spikes are flattened to T x B x S, zero-padded in time to a power
    of two, and transformed; the result is bins x B x 2S with real parts
    followed by imaginary parts.
    """
    values = spikes.values if isinstance(spikes, SpikeTensor) else as_tensor(spikes)
    if values.ndim < 2 or values.shape[0] == 0:
        raise ShapeError(f"fourier_align needs a T x B x ... tensor with T >= 1, got {values.shape}")
    steps, batch = values.shape[:2]
    flat = reshape(values, (steps, batch, -1))
    return fft_features(pad_leading(flat, next_power_of_two(steps)))


def psi(features: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """One modality's map into the joint space: affine followed by ReLU."""
    return relu(linear(features, weight, bias))


def joint_project(freq_image: Tensor, freq_series: Tensor, psi_image, psi_series) -> Tensor:
    """J_align as the sum of the two modality projections; ``psi_*`` are (weight, bias) pairs."""
    return add(psi(freq_image, *psi_image), psi(freq_series, *psi_series))


def _sample_axes(ndim, batch_axis):
    if batch_axis is None:
        return None
    batch_axis %= ndim
    return tuple(a for a in range(ndim) if a != batch_axis)


def similarity(a: Tensor, b: Tensor, sigma2: float, batch_axis: Optional[int] = None) -> Tensor:
    """exp(-d^2 / (2 sigma^2)) with d^2 the mean squared elementwise difference.

    With ``batch_axis`` set, one score per sample along that axis; otherwise a scalar.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"similarity: shapes {a.shape} and {b.shape} differ")
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    diff = sub(a, b)
    distance = mean(mul(diff, diff), axis=_sample_axes(a.ndim, batch_axis))
    return exp(scale(distance, -1.0 / (2.0 * sigma2)))


def adapt_sigma(diffs, epsilon: float = 1e-6) -> float:
    """Population variance of the cross-modal differences, floored at ``epsilon``."""
    values = np.asarray(diffs.value if isinstance(diffs, Tensor) else diffs, dtype=np.float64)
    if values.size == 0:
        raise ShapeError("adapt_sigma needs at least one sample")
    return max(float(np.var(values)), epsilon)


def jwam_weights(sim_image: Tensor, sim_series: Tensor) -> Tensor:
    """Softmax over the two modality scores; the trailing axis holds (w_image, w_series)."""
    return softmax(stack([sim_image, sim_series], axis=-1), axis=-1)


def _weighted(x: Tensor, weights: Tensor) -> Tensor:
    if x.ndim == 1:
        return mul(x, stack([weights] * x.shape[0]))
    return mul_along(x, weights, BATCH_AXIS)


def fuse(s_image: Tensor, s_series: Tensor, j_align: Tensor, modality_weights: Tensor, d_j: int) -> Tensor:
    """Scaled gating of J_align by each modality, mixed by the modality weights.

    score_m = softmax over features of (s_m * J_align / sqrt(d_j));
    J_fusion = w_image * score_image * J_align + w_series * score_series * J_align.
    """
    s_image, s_series, j_align = as_tensor(s_image), as_tensor(s_series), as_tensor(j_align)
    for name, operand in (("s_image", s_image), ("s_series", s_series), ("j_align", j_align)):
        if operand.shape[-1] != d_j:
            raise ShapeError(f"fuse: {name} width {operand.shape[-1]} does not match d_j={d_j}")
    root = 1.0 / np.sqrt(d_j)
    fused = []
    for index, modality in enumerate((s_image, s_series)):
        score = softmax(scale(mul(modality, j_align), root), axis=-1)
        fused.append(_weighted(mul(score, j_align), take(modality_weights, index, axis=-1)))
    return add(fused[0], fused[1])


@dataclass
class HeadWeights:
    """Two affine layers with a residual projection around them."""

    hidden_weight: Tensor
    hidden_bias: Tensor
    out_weight: Tensor
    skip_weight: Tensor
    out_bias: Tensor


def head_steps(j_fusion: Tensor, weights: HeadWeights) -> Tensor:
    """Per-step head output: out(relu(hidden(x))) + skip(x)."""
    x = as_tensor(j_fusion)
    if x.ndim == 2:
        x = reshape(x, (1,) + x.shape)
    inner = linear(relu(linear(x, weights.hidden_weight, weights.hidden_bias)), weights.out_weight)
    return add(inner, linear(x, weights.skip_weight, weights.out_bias))


def output_head(j_fusion: Tensor, weights: HeadWeights, task: Optional[Task]) -> Tensor:
    """The head applied at every step, averaged over the leading axis (B x N)."""
    if task is None:
        raise ConfigError("output head has no configured task")
    if weights.out_bias.shape != (task.outputs,):
        raise ShapeError(f"head produces {weights.out_bias.shape[0]} outputs, task expects {task.outputs}")
    return mean(head_steps(j_fusion, weights), axis=0)


def fusion_graph(freq_image: Tensor, freq_series: Tensor, psi_image, psi_series, d_j: int,
                 sigma2: Optional[float] = None, epsilon: float = 1e-6) -> FusionBundle:
    """Joint learning from frequency features to J_fusion.

    sim_image and sim_series compare each modality's projection with J_align;
    sigma^2 adapts to the batch's cross-modal differences unless given, and is
    held constant for the backward pass.
    """
    s_image = psi(freq_image, *psi_image)
    s_series = psi(freq_series, *psi_series)
    j_align = add(s_image, s_series)
    if sigma2 is None:
        sigma2 = adapt_sigma(s_image.value - s_series.value, epsilon)
        logger.debug("adapted sigma^2 = %.6g", sigma2)
    sim_image = similarity(s_image, j_align, sigma2, batch_axis=BATCH_AXIS)
    sim_series = similarity(s_series, j_align, sigma2, batch_axis=BATCH_AXIS)
    modality_weights = jwam_weights(sim_image, sim_series)
    j_fusion = fuse(s_image, s_series, j_align, modality_weights, d_j)
    return FusionBundle(freq_image, freq_series, s_image, s_series, j_align, sigma2,
                        sim_image, sim_series, modality_weights, j_fusion)


class OutputHead:
    """Learned parameters of the output layer for one task."""

    def __init__(self, d_j: int, task: Task, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(3)
        self.task = task
        std = np.sqrt(2.0 / d_j)
        self.hidden_weight = Parameter(rng.standard_normal((d_j, d_j)) * std, "head.hidden.weight")
        self.hidden_bias = Parameter(np.zeros(d_j), "head.hidden.bias")
        self.out_weight = Parameter(rng.standard_normal((task.outputs, d_j)) * std, "head.out.weight")
        self.skip_weight = Parameter(rng.standard_normal((task.outputs, d_j)) * std, "head.skip.weight")
        self.out_bias = Parameter(np.zeros(task.outputs), "head.out.bias")

    def weights(self) -> HeadWeights:
        return HeadWeights(self.hidden_weight, self.hidden_bias, self.out_weight, self.skip_weight, self.out_bias)

    def parameters(self):
        w = self.weights()
        return [w.hidden_weight, w.hidden_bias, w.out_weight, w.skip_weight, w.out_bias]

    def __call__(self, j_fusion: Tensor) -> Tensor:
        return output_head(j_fusion, self.weights(), self.task)


class JointLearningModule:
    """Owns the two joint-space maps and runs :func:`fusion_graph` on encoder spikes."""

    def __init__(self, cfg: JointSpaceConfig, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(2)
        self.cfg = cfg
        self.psi_image = (
            Parameter(rng.standard_normal((cfg.d_j, cfg.image_width)) * cfg.init_gain * np.sqrt(2.0 / cfg.image_width),
                      "joint.psi_image.weight"),
            Parameter(np.zeros(cfg.d_j), "joint.psi_image.bias"),
        )
        self.psi_series = (
            Parameter(rng.standard_normal((cfg.d_j, cfg.series_width))
                      * cfg.init_gain * np.sqrt(2.0 / cfg.series_width),
                      "joint.psi_series.weight"),
            Parameter(np.zeros(cfg.d_j), "joint.psi_series.bias"),
        )

    def parameters(self):
        return [*self.psi_image, *self.psi_series]

    def forward(self, spikes_image, spikes_series, sigma2: Optional[float] = None) -> FusionBundle:
        freq_image = fourier_align(spikes_image)
        freq_series = fourier_align(spikes_series)
        if freq_image.shape[:2] != freq_series.shape[:2]:
            raise ShapeError(
                f"modalities disagree on time bins or batch: {freq_image.shape[:2]} vs {freq_series.shape[:2]}"
            )
        for name, features, width in (("image", freq_image, self.cfg.image_width),
                                      ("series", freq_series, self.cfg.series_width)):
            if features.shape[-1] != width:
                raise ShapeError(f"{name} frequency width {features.shape[-1]} does not match configured {width}")
        bundle = fusion_graph(freq_image, freq_series, self.psi_image, self.psi_series, self.cfg.d_j,
                              sigma2=sigma2, epsilon=self.cfg.epsilon)
        return bundle.validate()
