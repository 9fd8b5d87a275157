"""Training loops shared by the PDN and the baselines."""

import logging
from dataclasses import dataclass

import numpy as np

from . import mixture
from .errors import DomainError, TrainingError
from .models import PDNModel, RegressorModel
from .net import AdamState, adam_step, backward, dense_specs, forward, init_weights, minibatches

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 256
    epochs: int = 1000
    weight_decay: float = 0.0
    seed: int = 0
    hidden: tuple = (400, 800, 1600, 3200)
    mixture_count: int = 50
    activation: str = "relu"
    batch_norm: bool = True
    isotropic: bool = False

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.learning_rate <= 0 or self.batch_size < 2 or self.epochs < 0:
            raise DomainError("learning_rate, batch_size (>= 2) and epochs must be positive")
        if self.weight_decay < 0:
            raise DomainError("weight_decay must be >= 0")
        if not self.hidden or min(self.hidden) < 1 or self.mixture_count < 1:
            raise DomainError("hidden widths and mixture_count must be positive")


def fit(params, owners, step, n, config: TrainConfig, on_epoch=None):
    """Run Adam over seeded minibatches.

    ``step(index)`` returns ``(loss, grads)`` for the rows in ``index``;
    ``on_epoch(epoch, loss)`` is called after every completed epoch.
    Returns the per-epoch mean losses.
    """
    state = AdamState.create(params, config.learning_rate, owners)
    losses = []
    for epoch in range(config.epochs):
        total = 0.0
        for b, index in enumerate(minibatches(n, config.batch_size, config.seed, epoch)):
            try:
                # overflow shows up as a non-finite loss, reported below
                with np.errstate(over="ignore", invalid="ignore"):
                    loss, grads = step(index)
                if not np.isfinite(loss):
                    raise TrainingError("non-finite loss")
                adam_step(params, grads, state, config.weight_decay)
            except TrainingError as exc:
                raise TrainingError(exc.reason, epoch=epoch, batch=b,
                                    layer=exc.layer) from exc
            total += loss * index.size
        losses.append(total / n)
        if on_epoch is not None:
            on_epoch(epoch, losses[-1])
    return losses


def _check_xy(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DomainError(f"inputs {x.shape} and labels {y.shape} must be 2-D with equal rows")
    if x.shape[0] < 2:
        raise DomainError("need at least 2 training samples")
    return x, y


def train_pdn(x, y, config: TrainConfig, scaler, context=None, on_epoch=None):
    """Maximum-likelihood training of trunk + mixture head.

    ``y`` holds labels in design units. Returns ``(PDNModel, losses)``.
    """
    x, y = _check_xy(x, y)
    trunk = init_weights(dense_specs(x.shape[1], config.hidden, None, config.activation,
                                     config.batch_norm), config.seed)
    head = mixture.init_head(config.hidden[-1], config.mixture_count, y.shape[1],
                             config.seed + 1, config.isotropic)
    model = PDNModel(trunk, head, scaler, dict(context or {}))
    params = trunk.parameters() + head.parameters()
    owners = trunk.owners() + [len(trunk.layers)] * len(head.parameters())

    def step(index):
        out, cache = forward(trunk, x[index], "train")
        logits, means, s = mixture.head_forward(out, head)
        loss, (d_logits, d_means, d_s), _ = mixture.nll_loss(logits, means, s, y[index])
        head_grads, dh = mixture.head_backward(out, head, d_logits, d_means, d_s)
        trunk_grads, _ = backward(trunk, cache, dh)
        return loss, trunk_grads + head_grads

    return model, fit(params, owners, step, x.shape[0], config,
                      _wrap(on_epoch, model))


def mse_regression(net, x, y, config: TrainConfig, on_epoch=None):
    """Train ``net`` in place on mean squared error; returns per-epoch losses."""
    x, y = _check_xy(x, y)

    def step(index):
        out, cache = forward(net, x[index], "train")
        diff = out - y[index]
        grads, _ = backward(net, cache, 2.0 * diff / diff.size)
        return float(np.mean(diff * diff)), grads

    return fit(net.parameters(), net.owners(), step, x.shape[0], config, on_epoch)


def train_regressor(x, y, config: TrainConfig, scaler=None, context=None, kind="ann",
                    on_epoch=None):
    x, y = _check_xy(x, y)
    net = init_weights(dense_specs(x.shape[1], config.hidden, y.shape[1], config.activation,
                                   config.batch_norm), config.seed)
    model = RegressorModel(net, scaler, dict(context or {}), kind)
    return model, mse_regression(net, x, y, config, _wrap(on_epoch, model))


def _wrap(on_epoch, model):
    if on_epoch is None:
        return None
    return lambda epoch, loss: on_epoch(epoch, loss, model)
