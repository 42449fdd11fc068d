"""
Training loop for the prediction head: binary cross-entropy, AdamW with decoupled
weight decay, cosine learning-rate annealing, global-norm gradient clipping and
early stopping on validation AP.

Every random draw is derived from ``TrainConfig.seed``: the batch order from
(seed, epoch) and each clip's dropout stream from (seed, epoch, clip index), so a run
is a deterministic function of its inputs.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigError, MetricInputError, NonFiniteGradientError, ShapeError
from src.head import HeadConfig, HeadParams, head_forward, init_head, loss_and_gradients
from src.metrics import average_precision
from src.records import EmbeddingClip, ScoreTrace

logger = logging.getLogger(__name__)

BCE_EPS = 1e-12
FREEZABLE = ("probe", "mlp")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-5
    weight_decay: float = 1e-4
    clip_norm: float = 5.0
    betas: Tuple[float, ...] = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 16
    patience: int = 5
    seed: int = 0
    lr_min: float = 0.0
    freeze: frozenset = frozenset()

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if not self.clip_norm > 0:
            raise ConfigError("clip_norm must be positive")
        if self.patience < 1:
            raise ConfigError("patience must be at least 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be at least 1")
        if len(self.betas) != 2 or not all(0.0 <= b < 1.0 for b in self.betas):
            raise ConfigError(f"betas {self.betas} must be two values in [0, 1)")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        unknown = set(self.freeze) - set(FREEZABLE)
        if unknown:
            raise ConfigError(f"cannot freeze {sorted(unknown)}; choose from {FREEZABLE}")


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_ap: float
    lr: float

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "train_loss": self.train_loss, "val_ap": self.val_ap, "lr": self.lr}


class EarlyStopping:
    """Tracks the best validation score and counts epochs without improvement."""

    def __init__(self, patience: int):
        if patience < 1:
            raise ConfigError("patience must be at least 1")
        self.patience = patience
        self.best: Optional[float] = None
        self.best_epoch: Optional[int] = None
        self.bad_epochs = 0

    def update(self, epoch: int, value: float) -> bool:
        """Record one epoch's score; returns True when it is a new best."""
        if self.best is None or value > self.best:
            self.best = value
            self.best_epoch = epoch
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


def bce_loss(p: float, y: int) -> float:
    p = min(max(float(p), BCE_EPS), 1.0 - BCE_EPS)
    return float(-(y * math.log(p) + (1 - y) * math.log(1.0 - p)))


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(math.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: Mapping[str, np.ndarray], clip_norm: float) -> Dict[str, np.ndarray]:
    """Scale every gradient by clip_norm/g when the global L2 norm g exceeds clip_norm."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for {name}")
    norm = global_norm(grads)
    if norm <= clip_norm:
        return dict(grads)
    scale = clip_norm / norm
    return {name: g * scale for name, g in grads.items()}


def cosine_lr(step: int, total_steps: int, lr: float, lr_min: float = 0.0) -> float:
    if total_steps < 1:
        raise ConfigError("total_steps must be at least 1")
    if not 0 <= step <= total_steps:
        raise ConfigError(f"step {step} outside [0, {total_steps}]")
    return lr_min + 0.5 * (lr - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


def optimizer_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
    lr_t: float,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One AdamW update.

    Tensors without a gradient entry (frozen components) are returned unchanged. Weight
    decay shrinks the parameter directly and does not pass through the moment estimates.
    """
    beta1, beta2 = config.betas
    step = state.step + 1
    new_params: Dict[str, np.ndarray] = {}
    new_m = dict(state.m)
    new_v = dict(state.v)
    for name, theta in params.items():
        g = grads.get(name)
        if g is None:
            new_params[name] = theta
            continue
        if g.shape != theta.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} does not match parameter {theta.shape}")
        m = beta1 * state.m.get(name, np.zeros_like(theta)) + (1.0 - beta1) * g
        v = beta2 * state.v.get(name, np.zeros_like(theta)) + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        decayed = theta - lr_t * config.weight_decay * theta
        new_params[name] = decayed - lr_t * m_hat / (np.sqrt(v_hat) + config.eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(step=step, m=new_m, v=new_v)


def _trainable(name: str, freeze: frozenset) -> bool:
    if name.startswith("probe.") and "probe" in freeze:
        return False
    if name.startswith("mlp.") and "mlp" in freeze:
        return False
    return True


def predict(params: HeadParams, clips: Sequence[EmbeddingClip]) -> List[float]:
    """Eval-mode probabilities, one per clip."""
    return [head_forward(clip.patches, params) for clip in clips]


def validation_ap(params: HeadParams, clips: Sequence[EmbeddingClip]) -> float:
    return average_precision(list(zip(predict(params, clips), (clip.label for clip in clips))))


def score_traces(params: HeadParams, clips: Sequence[EmbeddingClip]) -> Dict[str, ScoreTrace]:
    """Per-video score traces from clip probabilities, ordered by clip end time."""
    by_video: Dict[str, List[Tuple[float, float]]] = {}
    for clip, p in zip(clips, predict(params, clips)):
        by_video.setdefault(clip.video_id, []).append((clip.clip_end_t, p))
    return {video_id: ScoreTrace.from_samples(video_id, sorted(samples)) for video_id, samples in by_video.items()}


def _check_datasets(train_clips: Sequence[EmbeddingClip], val_clips: Sequence[EmbeddingClip]) -> int:
    if not train_clips:
        raise MetricInputError("training set is empty")
    if not val_clips:
        raise MetricInputError("validation set is empty")
    labels = {clip.label for clip in val_clips}
    if labels != {0, 1}:
        raise MetricInputError("validation set must contain both classes for AP-based early stopping")
    dims = {clip.patches.shape[1] for clip in list(train_clips) + list(val_clips)}
    if len(dims) != 1:
        raise ShapeError(f"clips disagree on feature dimension: {sorted(dims)}")
    return dims.pop()


def train(
    train_clips: Sequence[EmbeddingClip],
    val_clips: Sequence[EmbeddingClip],
    config: TrainConfig = TrainConfig(),
    head_config: HeadConfig = HeadConfig(),
    init: Optional[HeadParams] = None,
) -> Tuple[HeadParams, List[EpochRecord]]:
    """
    Train a head and keep the parameters of the best validation-AP epoch.

    Args:
        train_clips: Labeled training clips; oversampled duplicates are independent items
        val_clips: Labeled validation clips with both classes present
        config: Optimizer, schedule and stopping settings
        head_config: Architecture of a freshly initialized head
        init: Start from these parameters instead of a fresh initialization

    Returns:
        (best parameters, one EpochRecord per completed epoch)
    """
    input_dim = _check_datasets(train_clips, val_clips)
    params = init if init is not None else init_head(input_dim, head_config, config.seed)
    tensors = params.named_tensors()
    trainable = [name for name in tensors if _trainable(name, config.freeze)]

    n = len(train_clips)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    state = AdamState()
    stopper = EarlyStopping(config.patience)
    best_params = params
    history: List[EpochRecord] = []
    step = 0
    lr_t = config.lr

    for epoch in range(1, config.epochs + 1):
        order = np.random.default_rng((config.seed, epoch)).permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            summed = {name: np.zeros_like(tensors[name]) for name in trainable}
            for index in batch:
                clip = train_clips[int(index)]
                rng = np.random.default_rng((config.seed, epoch, int(index)))
                _, p, grads = loss_and_gradients(clip.patches, params, clip.label, rng)
                epoch_loss += bce_loss(p, clip.label)
                for name in trainable:
                    summed[name] += grads[name]
            averaged = {name: g / len(batch) for name, g in summed.items()}
            clipped = clip_gradients(averaged, config.clip_norm)
            lr_t = cosine_lr(step, total_steps, config.lr, config.lr_min)
            tensors, state = optimizer_step(tensors, clipped, state, config, lr_t)
            params = params.with_tensors(tensors)
            step += 1

        val_ap = validation_ap(params, val_clips)
        record = EpochRecord(epoch=epoch, train_loss=epoch_loss / n, val_ap=val_ap, lr=lr_t)
        history.append(record)
        logger.info("epoch %d: train_loss=%.6f val_ap=%.6f lr=%.3g", epoch, record.train_loss, val_ap, lr_t)

        if stopper.update(epoch, val_ap):
            best_params = params
        elif stopper.should_stop:
            logger.info("Early stop after epoch %d; best val AP %.6f at epoch %d", epoch, stopper.best, stopper.best_epoch)
            break

    return best_params, history
