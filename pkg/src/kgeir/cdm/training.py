"""Mini-batch training of cognitive-diagnosis models with Adam."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..ingest import InteractionLog, InteractionRecord
from .base import CognitiveModel, build_dataset


class DivergenceError(FloatingPointError):
    def __init__(self, epoch: int, detail: str):
        super().__init__(f"training diverged at epoch {epoch}: {detail}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.002
    epochs: int = 100
    dropout: float = 0.2
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainResult:
    model: CognitiveModel
    losses: list[float]


def train(
    model: CognitiveModel,
    log: InteractionLog,
    cfg: TrainConfig = TrainConfig(),
    include: set[InteractionRecord] | None = None,
) -> TrainResult:
    """Fit ``model`` in place on mean binary cross-entropy; returns the per-epoch mean loss."""
    data = build_dataset(model, log, include)
    if len(data) == 0:
        raise ValueError("cannot train on an empty log")
    if hasattr(model, "dropout"):
        model.dropout = cfg.dropout
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.params, cfg.learning_rate)
    losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(data))
        total = 0.0
        for start in range(0, len(data), cfg.batch_size):
            batch = data.subset(order[start:start + cfg.batch_size])
            try:
                loss, grads = ad.grad(lambda P: model.loss(P, batch, training=True, rng=rng), model.params)
            except ad.NonFiniteError as exc:
                raise DivergenceError(epoch, str(exc)) from None
            if not np.isfinite(loss):
                raise DivergenceError(epoch, f"loss {loss}")
            opt.step(model.params, grads)
            model.project()
            total += loss * len(batch)
        model.invalidate()
        losses.append(total / len(data))
    return TrainResult(model, losses)


def evaluate_auc(model: CognitiveModel, log: InteractionLog, include: set[InteractionRecord] | None = None) -> float:
    from ..harness.metrics import auc

    data = build_dataset(model, log, include)
    return auc(model.predict_batch(data), data.labels)
