"""Mini-batch training with binary cross-entropy and Adam.

A batch is processed as consecutive micro-batches whose gradients are summed
in a fixed order before one optimizer step, which bounds peak memory. BN
batch statistics are therefore computed per micro-batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError, EmptyDataset
from . import autodiff as ad
from .model import logits

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    micro_batch: int = 16
    loss: str = "bce"
    optimizer: str = "adam"

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1 or self.micro_batch < 1:
            raise ValueError("batch sizes must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.loss != "bce" or self.optimizer != "adam":
            raise ValueError("only bce loss with adam is supported")


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)
            p -= update.astype(p.dtype)


def _as_arrays(fragments):
    if isinstance(fragments, tuple) and len(fragments) == 2:
        x, y = fragments
        return np.asarray(x), np.asarray(y, dtype=np.float64)
    if len(fragments) == 0:
        return np.zeros((0, 0)), np.zeros(0)
    x = np.stack([np.asarray(f.samples) for f in fragments])
    y = np.array([f.label for f in fragments], dtype=np.float64)
    return x, y


def batch_gradients(model, x, y, micro_batch, update_stats=True):
    """Gradient of the batch-mean BCE, accumulated over micro-batches.

    Returns ``(grads, summed_loss)``.
    """
    n = x.shape[0]
    grads = None
    loss_sum = 0.0
    for i in range(0, n, micro_batch):
        xb, yb = x[i:i + micro_batch], y[i:i + micro_batch]
        z, _, P = logits(model, xb, training=True, requires_grad=True, update_stats=update_stats)
        loss = ad.bce_with_logits(z, yb)
        loss.backward(np.asarray(len(xb) / n, dtype=z.data.dtype))
        loss_sum += float(loss.data) * len(xb)
        if grads is None:
            grads = {k: t.grad for k, t in P.items()}
        else:
            for k, t in P.items():
                grads[k] = grads[k] + t.grad
    return grads, loss_sum


def train(model, fragments, tc=None, progress=None):
    """Fit ``model`` in place; returns ``(model, per_epoch_mean_loss)``.

    ``fragments`` is a list of fragments or an ``(x, y)`` pair of arrays.
    ``progress``, if given, is called as ``progress(epoch, loss)``.
    """
    tc = tc or TrainConfig()
    x, y = _as_arrays(fragments)
    n = x.shape[0]
    if n == 0:
        raise EmptyDataset("no training fragments")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    rng = np.random.default_rng(tc.seed)
    opt = Adam(model.params, tc.learning_rate, tc.beta1, tc.beta2, tc.adam_eps)
    model.train()
    history = []
    for epoch in range(tc.epochs):
        order = rng.permutation(n)
        total = 0.0
        for i in range(0, n, tc.batch_size):
            # keep the shuffled order inside the batch: sorted indices would
            # group fragments by record and label, and BN statistics of such
            # micro-batches leak the label
            idx = order[i:i + tc.batch_size]
            grads, loss_sum = batch_gradients(model, x[idx], y[idx], tc.micro_batch)
            if not np.isfinite(loss_sum) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise DivergenceError(f"non-finite loss or gradient in epoch {epoch}")
            opt.step(grads)
            total += loss_sum
        mean_loss = total / n
        history.append(mean_loss)
        logger.info("epoch %d loss %.6f", epoch, mean_loss)
        if progress is not None:
            progress(epoch, mean_loss)
    model.eval()
    return model, history
