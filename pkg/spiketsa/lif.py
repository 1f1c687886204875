"""Leaky integrate-and-fire dynamics with surrogate-gradient training support."""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError, ShapeError
from .numerics import Tensor, as_tensor, emit

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LifParams:
    """Neuron constants. Membrane resistance is folded into the input current."""

    tau: float = 2.0
    v_rest: float = 0.0
    v_th: float = 1.0
    v_reset: float = 0.0
    surrogate_slope: float = 2.0

    def __post_init__(self):
        if not self.tau > 1:
            raise ConfigError(f"tau must be greater than 1, got {self.tau}")
        if not self.v_th > self.v_rest:
            raise ConfigError(f"v_th ({self.v_th}) must exceed v_rest ({self.v_rest})")
        if not self.v_reset <= self.v_th:
            raise ConfigError(f"v_reset ({self.v_reset}) must not exceed v_th ({self.v_th})")
        if not self.surrogate_slope > 0:
            raise ConfigError(f"surrogate_slope must be positive, got {self.surrogate_slope}")

    @property
    def decay(self) -> float:
        return 1.0 - 1.0 / self.tau


@dataclass
class LifState:
    """Membrane potentials, one per neuron per batch element."""

    v: np.ndarray

    @classmethod
    def at_rest(cls, shape, params: LifParams) -> "LifState":
        return cls(np.full(shape, params.v_rest, dtype=np.float64))


LAYOUTS = {"TBCHW": 5, "TBCL": 4}


class SpikeTensor:
    """Time-major binary spike train with a layout tag."""

    def __init__(self, values, layout: Optional[str] = None):
        values = as_tensor(values)
        if values.ndim < 1 or values.shape[0] < 1:
            raise ShapeError(f"spike tensor needs a non-empty leading time axis, got {values.shape}")
        if layout is not None and LAYOUTS.get(layout) != values.ndim:
            raise ShapeError(f"layout {layout} does not fit shape {values.shape}")
        if not np.all((values.value == 0.0) | (values.value == 1.0)):
            raise ShapeError("spike tensor values must be 0 or 1")
        self.values = values
        self.layout = layout

    @property
    def shape(self):
        return self.values.shape

    @property
    def time_steps(self) -> int:
        return self.values.shape[0]

    def numpy(self) -> np.ndarray:
        return self.values.value

    def __repr__(self):
        return f"SpikeTensor(shape={self.shape}, layout={self.layout})"


def _advance(v, current, params):
    v_pre = v + (current - (v - params.v_rest)) / params.tau
    spikes = (v_pre >= params.v_th).astype(np.float64)
    v_post = np.where(spikes > 0, params.v_reset, v_pre)
    return v_pre, spikes, v_post


def lif_step(state: LifState, current, params: LifParams) -> Tuple[LifState, Tensor]:
    """One discrete membrane update followed by threshold spiking and hard reset."""
    current = as_tensor(current).value
    if current.shape != state.v.shape:
        raise ShapeError(f"lif_step: state {state.v.shape} and current {current.shape} differ")
    _, spikes, v_post = _advance(state.v, current, params)
    return LifState(v_post), Tensor._wrap(spikes)


def surrogate_grad(v_minus_th, slope: float) -> np.ndarray:
    """Fast-sigmoid derivative 1 / (1 + slope*|x|)^2 standing in for the Heaviside derivative."""
    if not slope > 0:
        raise ConfigError(f"surrogate slope must be positive, got {slope}")
    x = np.asarray(v_minus_th, dtype=np.float64)
    return 1.0 / (1.0 + slope * np.abs(x)) ** 2


def _initial_potential(shape, params, initial):
    if initial is None:
        return np.full(shape, params.v_rest, dtype=np.float64)
    if initial.v.shape != shape:
        raise ShapeError(f"initial state {initial.v.shape} does not match per-step shape {shape}")
    return initial.v


def spike_sequence(currents: Tensor, params: LifParams, initial: Optional[LifState] = None) -> Tensor:
    """Fold the LIF update over the leading time axis; differentiable through the surrogate."""
    currents = as_tensor(currents)
    if currents.ndim < 1 or currents.shape[0] == 0:
        raise ShapeError("spike_sequence needs at least one time step")
    steps = currents.shape[0]
    v = _initial_potential(currents.shape[1:], params, initial)
    v_pre = np.empty(currents.shape)
    spikes = np.empty(currents.shape)
    for t in range(steps):
        v_pre[t], spikes[t], v = _advance(v, currents.value[t], params)

    def backward(g):
        grad_current = np.empty_like(g)
        carry = np.zeros(g.shape[1:])
        slope = surrogate_grad(v_pre - params.v_th, params.surrogate_slope)
        for t in reversed(range(steps)):
            g_pre = g[t] * slope[t] + carry * (1.0 - spikes[t])
            grad_current[t] = g_pre / params.tau
            carry = g_pre * params.decay
        return (grad_current,)

    return emit("spike_sequence", spikes, (currents,), backward)


def recurrent_spike_sequence(drive: Tensor, feedback: Tensor, params: LifParams,
                             initial: Optional[LifState] = None) -> Tensor:
    """LIF over time where each step's current adds a projection of the previous step's spikes.

    ``drive`` is T x ... x H and ``feedback`` is H x H; the input current at step t
    is ``drive[t] + spikes[t-1] @ feedback.T``.
    """
    drive, feedback = as_tensor(drive), as_tensor(feedback)
    if drive.ndim < 2 or drive.shape[0] == 0:
        raise ShapeError(f"recurrent_spike_sequence needs T x ... x H drive, got {drive.shape}")
    width = drive.shape[-1]
    if feedback.shape != (width, width):
        raise ShapeError(f"feedback shape {feedback.shape} does not match hidden width {width}")
    steps = drive.shape[0]
    weights = feedback.value
    v = _initial_potential(drive.shape[1:], params, initial)
    v_pre = np.empty(drive.shape)
    spikes = np.empty(drive.shape)
    previous = np.zeros(drive.shape[1:])
    for t in range(steps):
        current = drive.value[t] + previous @ weights.T
        v_pre[t], spikes[t], v = _advance(v, current, params)
        previous = spikes[t]

    def backward(g):
        grad_drive = np.empty_like(g)
        grad_feedback = np.zeros_like(weights)
        carry_v = np.zeros(g.shape[1:])
        carry_s = np.zeros(g.shape[1:])
        slope = surrogate_grad(v_pre - params.v_th, params.surrogate_slope)
        for t in reversed(range(steps)):
            g_pre = (g[t] + carry_s) * slope[t] + carry_v * (1.0 - spikes[t])
            g_current = g_pre / params.tau
            grad_drive[t] = g_current
            if t > 0:
                grad_feedback += g_current.reshape(-1, width).T @ spikes[t - 1].reshape(-1, width)
                carry_s = g_current @ weights
            carry_v = g_pre * params.decay
        return grad_drive, grad_feedback

    return emit("recurrent_spike_sequence", spikes, (drive, feedback), backward)


def lif_sequence(currents, params: LifParams, initial: Optional[LifState] = None,
                 layout: Optional[str] = None) -> SpikeTensor:
    """Spike train produced by folding :func:`lif_step` over the time axis."""
    return SpikeTensor(spike_sequence(currents, params, initial), layout)


@dataclass
class PulseStats:
    """Discrete cumulative pulse effect of a spike train."""

    counts: np.ndarray
    rates: np.ndarray
    trace: np.ndarray


def pulse_accumulate(spikes) -> PulseStats:
    """Per-neuron spike counts and rates over time, plus the population trace P(t)."""
    values = spikes.numpy() if isinstance(spikes, SpikeTensor) else as_tensor(spikes).value
    if values.ndim < 1 or values.shape[0] == 0:
        raise ShapeError("pulse_accumulate needs a non-empty time axis")
    counts = values.sum(axis=0)
    trace = values.reshape(values.shape[0], -1).sum(axis=1)
    return PulseStats(counts=counts, rates=counts / values.shape[0], trace=trace)
