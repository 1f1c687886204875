"""Losses, metrics, Adam and the surrogate-gradient training loop."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import Sample, batch_arrays
from .errors import ConfigError, DataError, ShapeError
from .fusion import CLASSIFICATION, REGRESSION
from .model import TRACE_COMPONENTS, SpikingFusionModel
from .numerics import Parameter, Tape

logger = logging.getLogger(__name__)

CLASSIFICATION_METRICS = ("accuracy", "f1", "precision", "recall")
REGRESSION_METRICS = ("mse", "mae")
LOSS_KINDS = ("mse", "mae")


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters. ``steps`` and ``task`` must agree with the model being trained."""

    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    steps: int = 8
    task: str = CLASSIFICATION
    patience: int = 10
    clip_norm: float = 5.0
    loss: str = "mse"
    probe_size: int = 8

    def __post_init__(self):
        for name in ("epochs", "batch_size", "steps", "patience", "probe_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr < 0:
            raise ConfigError(f"lr must not be negative, got {self.lr}")
        if not self.clip_norm > 0:
            raise ConfigError(f"clip_norm must be positive, got {self.clip_norm}")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ConfigError(f"unknown task '{self.task}'")
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"unknown regression loss '{self.loss}'; use one of {LOSS_KINDS}")


def _softmax(logits):
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels) -> Tuple[float, np.ndarray]:
    """Softmax cross-entropy averaged over the batch.

    Returns:
        The loss and its gradient with respect to ``logits``,
        ``(softmax(logits) - onehot(labels)) / B``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy needs B x N logits and B labels, got {logits.shape} and {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise DataError(f"labels must lie in [0, {logits.shape[1]}), got range [{labels.min()}, {labels.max()}]")
    batch = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(batch)
    loss = -float(log_probs[rows, labels].mean())
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    return loss, grad / batch


def regression_loss(pred, target, kind: str = "mse") -> Tuple[float, np.ndarray]:
    """Mean squared or mean absolute error over every element, with its gradient."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    diff = pred - target
    n = diff.size
    if kind == "mse":
        return float(np.mean(diff ** 2)), 2.0 * diff / n
    if kind == "mae":
        return float(np.mean(np.abs(diff))), np.sign(diff) / n
    raise ConfigError(f"unknown regression loss '{kind}'")


def _safe_ratio(numerator, denominator, what, label):
    if denominator == 0:
        logger.warning("%s undefined for class %s; counted as 0", what, label)
        return 0.0
    return numerator / denominator


def metrics(predictions, targets, task: str, num_classes: Optional[int] = None) -> Dict[str, float]:
    """Accuracy with macro F1/precision/recall for classification; MSE and MAE for regression."""
    predictions = np.asarray(predictions)
    targets = np.asarray(targets)
    if predictions.size == 0 or targets.size == 0:
        raise DataError("metrics need at least one prediction")
    if predictions.shape != targets.shape:
        raise ShapeError(f"predictions {predictions.shape} and targets {targets.shape} differ")
    if task == REGRESSION:
        diff = predictions.astype(np.float64) - targets.astype(np.float64)
        return {"mse": float(np.mean(diff ** 2)), "mae": float(np.mean(np.abs(diff)))}
    if task != CLASSIFICATION:
        raise ConfigError(f"unknown task '{task}'")

    if num_classes is None:
        classes = np.union1d(predictions, targets)
    else:
        classes = np.arange(num_classes)
    precisions, recalls, f1s = [], [], []
    for label in classes:
        tp = int(np.sum((predictions == label) & (targets == label)))
        fp = int(np.sum((predictions == label) & (targets != label)))
        fn = int(np.sum((predictions != label) & (targets == label)))
        precision = _safe_ratio(tp, tp + fp, "precision", label)
        recall = _safe_ratio(tp, tp + fn, "recall", label)
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(_safe_ratio(2 * precision * recall, precision + recall, "F1", label))
    return {
        "accuracy": float(np.mean(predictions == targets)),
        "f1": float(np.mean(f1s)),
        "precision": float(np.mean(precisions)),
        "recall": float(np.mean(recalls)),
    }


def metric_names(task: str) -> Tuple[str, ...]:
    return CLASSIFICATION_METRICS if task == CLASSIFICATION else REGRESSION_METRICS


@dataclass
class AdamState:
    """First and second moment estimates keyed by parameter name."""

    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Parameter], grads: Sequence[np.ndarray], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """One bias-corrected Adam update; parameters are reassigned in place."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for param, grad in zip(params, grads):
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != param.shape:
            raise ShapeError(f"gradient for '{param.name}' has shape {grad.shape}, expected {param.shape}")
        m = beta1 * state.m.get(param.name, 0.0) + (1.0 - beta1) * grad
        v = beta2 * state.v.get(param.name, 0.0) + (1.0 - beta2) * grad ** 2
        state.m[param.name], state.v[param.name] = m, v
        param.assign(param.value - lr * (m / correction1) / (np.sqrt(v / correction2) + eps))
    return state


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float = 5.0) -> Tuple[List[np.ndarray], float]:
    """Scale gradients so their global L2 norm is at most ``max_norm``; return them with the original norm."""
    norm = float(np.sqrt(sum(float(np.sum(g ** 2)) for g in grads)))
    if norm <= max_norm or norm == 0.0:
        return list(grads), norm
    factor = max_norm / norm
    return [g * factor for g in grads], norm


def naive_forecast(series, horizon: int, channel: int = 0) -> np.ndarray:
    """Last value of ``channel`` carried ``horizon`` steps forward, for B x C x L windows."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 3:
        raise ShapeError(f"naive_forecast needs B x C x L windows, got {series.shape}")
    return np.repeat(series[:, channel, -1:], horizon, axis=1)


@dataclass
class Evaluation:
    loss: float
    predictions: np.ndarray
    targets: np.ndarray
    metrics: Dict[str, float]
    outputs: np.ndarray


def _loss(output, targets, task, kind):
    if task == CLASSIFICATION:
        return cross_entropy(output, targets)
    return regression_loss(output, targets, kind)


def evaluate(model: SpikingFusionModel, samples: Sequence[Sample], batch_size: int = 64,
             loss: str = "mse") -> Evaluation:
    """Forward ``samples`` in fixed-order batches; return the sample-weighted loss and task metrics."""
    if not samples:
        raise DataError("cannot evaluate on zero samples")
    task = model.task.kind
    outputs, targets, total = [], [], 0.0
    for start in range(0, len(samples), batch_size):
        images, series, batch_targets = batch_arrays(samples[start:start + batch_size], model.cfg.gasf_channels)
        output = model.forward(images, series).value
        batch_loss, _ = _loss(output, batch_targets, task, loss)
        total += batch_loss * len(batch_targets)
        outputs.append(output)
        targets.append(batch_targets)
    outputs = np.concatenate(outputs)
    targets = np.concatenate(targets)
    predictions = outputs.argmax(axis=1) if task == CLASSIFICATION else outputs
    num_classes = model.task.outputs if task == CLASSIFICATION else None
    return Evaluation(total / len(samples), predictions, targets,
                      metrics(predictions, targets, task, num_classes), outputs)


class Trainer:
    """Owns the optimizer state, the shuffling RNG, the history and the best parameters seen."""

    def __init__(self, model: SpikingFusionModel, cfg: TrainConfig):
        if cfg.task != model.task.kind:
            raise ConfigError(f"train task '{cfg.task}' does not match model task '{model.task.kind}'")
        if cfg.steps != model.cfg.steps:
            raise ConfigError(f"train steps {cfg.steps} do not match model steps {model.cfg.steps}")
        self.model = model
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.adam = AdamState()
        self.history: List[Dict[str, float]] = []
        self.probe_traces: Dict[str, List[List[float]]] = {name: [] for name in TRACE_COMPONENTS}
        self.best_state = None
        self.best_loss = np.inf
        self.stopped_early = False

    def train_step(self, samples: Sequence[Sample]) -> float:
        """Forward, backward through time and one Adam update on a batch."""
        params = self.model.parameters()
        images, series, targets = batch_arrays(samples, self.model.cfg.gasf_channels)
        with Tape() as tape:
            output = self.model.forward(images, series)
        loss, grad = _loss(output.value, targets, self.cfg.task, self.cfg.loss)
        leaves = tape.backward(output, grad)
        grads = [leaves.get(p, np.zeros(p.shape)) for p in params]
        for p in params:
            p.grad = None
        grads, norm = clip_grad_norm(grads, self.cfg.clip_norm)
        if norm > self.cfg.clip_norm:
            logger.debug("clipped gradient norm %.4g to %.4g", norm, self.cfg.clip_norm)
        adam_step(params, grads, self.adam, self.cfg.lr)
        return loss

    def run_epoch(self, train: Sequence[Sample]) -> float:
        order = self.rng.permutation(len(train))
        total = 0.0
        for start in range(0, len(train), self.cfg.batch_size):
            batch = [train[i] for i in order[start:start + self.cfg.batch_size]]
            total += self.train_step(batch) * len(batch)
        return total / len(train)

    def fit(self, train: Sequence[Sample], val: Sequence[Sample]) -> List[Dict[str, float]]:
        """Train until ``epochs`` or early stopping; the model ends with the best parameters seen."""
        if not train:
            raise DataError("training split is empty")
        if not val:
            logger.warning("validation split is empty; monitoring training loss")
        probe = list(val or train)[:self.cfg.probe_size]
        probe_images, probe_series, _ = batch_arrays(probe, self.model.cfg.gasf_channels)
        names = metric_names(self.cfg.task)
        waited = 0
        for epoch in range(1, self.cfg.epochs + 1):
            train_loss = self.run_epoch(train)
            row = {"epoch": epoch, "train_loss": train_loss}
            if val:
                result = evaluate(self.model, val, self.cfg.batch_size, self.cfg.loss)
                row["val_loss"] = result.loss
                row.update(result.metrics)
                monitored = result.loss
            else:
                row["val_loss"] = float("nan")
                row.update({name: float("nan") for name in names})
                monitored = train_loss
            self.history.append(row)
            for name, trace in self.model.probe_traces(probe_images, probe_series).items():
                self.probe_traces[name].append(trace.tolist())
            logger.info("epoch %d: train_loss=%.6f val_loss=%.6f %s", epoch, train_loss, row["val_loss"],
                        " ".join(f"{name}={row[name]:.4f}" for name in names))
            if monitored < self.best_loss:
                self.best_loss = monitored
                self.best_state = self.model.state_dict()
                waited = 0
            else:
                waited += 1
                if waited >= self.cfg.patience:
                    logger.warning("early stop after epoch %d: no improvement for %d epoch(s)", epoch, waited)
                    self.stopped_early = True
                    break
        if self.best_state is not None:
            self.model.load_state_dict(self.best_state)
        return self.history


def train_loop(model: SpikingFusionModel, datasets: Tuple[Sequence[Sample], Sequence[Sample]],
               cfg: TrainConfig) -> List[Dict[str, float]]:
    """Train ``model`` on ``(train, val)``; returns the per-epoch history."""
    train, val = datasets
    return Trainer(model, cfg).fit(train, val)
