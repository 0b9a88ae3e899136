"""Central finite-difference check of backpropagated gradients."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .model import _samples, logits

DEFAULT_H = 1e-4
# relative errors are measured against max(|analytic|, |numeric|, floor)
REL_FLOOR = 1e-8


def relative_error(a, n):
    return abs(a - n) / max(abs(a), abs(n), REL_FLOOR)


def check_gradients(loss_fn, params, analytic, picks, h=DEFAULT_H):
    """Max relative error between ``analytic`` and central differences.

    ``loss_fn()`` evaluates the loss from the current contents of ``params``
    (a name -> array dict, perturbed in place); ``picks`` lists
    ``(name, flat_index)`` entries to check.
    """
    worst = 0.0
    for name, i in picks:
        arr = params[name].reshape(-1)
        orig = arr[i]
        arr[i] = orig + h
        up = loss_fn()
        arr[i] = orig - h
        down = loss_fn()
        arr[i] = orig
        num = (up - down) / (2 * h)
        worst = max(worst, relative_error(float(analytic[name].reshape(-1)[i]), num))
    return worst


def sample_parameters(params, n, rng):
    """``n`` random scalar positions: a tensor uniformly, then an element in it."""
    names = sorted(params)
    picks = []
    for _ in range(n):
        name = names[rng.integers(len(names))]
        picks.append((name, int(rng.integers(params[name].size))))
    return picks


def grad_check(model, window, n_params=50, label=1.0, seed=0, h=DEFAULT_H, training=False):
    """Check BCE-loss gradients of ``n_params`` random parameters in float64.

    Runs on a float64 copy of ``model``; the original is not touched. In
    training mode BN uses batch statistics and running buffers are left
    unchanged.
    """
    m64 = model.astype(np.float64)
    x = np.asarray(_samples(window), dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    y = np.full(x.shape[0], float(label))

    def loss_fn():
        z, _, _ = logits(m64, x, training=training, update_stats=False)
        return float(ad.bce_with_logits(z, y).data)

    z, _, P = logits(m64, x, training=training, requires_grad=True, update_stats=False)
    ad.bce_with_logits(z, y).backward()
    analytic = {k: t.grad for k, t in P.items()}
    picks = sample_parameters(m64.params, n_params, np.random.default_rng(seed))
    return check_gradients(loss_fn, m64.params, analytic, picks, h)
