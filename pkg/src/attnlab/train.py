"""Plain momentum SGD and the batched training loop."""

from __future__ import annotations

import numpy as np

from .errors import NumericFault


class Momentum:
    """SGD with a velocity buffer per parameter.

    Each parameter carries an lr_scale that multiplies the global rate at
    update time, so a step with rate r on a 0.1-scaled parameter matches
    a step with rate 0.1*r on an unscaled one exactly, buffer and all.
    """

    def __init__(self, params, lr, momentum=0.9):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.bufs = [np.zeros(p.shape) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        for p, buf in zip(self.params, self.bufs):
            if p.grad is None:
                continue
            buf *= self.momentum
            buf += p.grad
            p.data -= (self.lr * p.lr_scale) * buf


def clip_gradients(params, max_norm):
    """Scale all gradients down so their global norm is at most max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = np.sqrt(total)
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= factor
    return norm


def train_model(model, task, steps, batch_size=16, lr=0.1, momentum=0.9,
                clip=None):
    """Run the loop; raises NumericFault if the loss stops being finite."""
    params = model.parameters()
    opt = Momentum(params, lr=lr, momentum=momentum)
    last = None
    for step in range(steps):
        batch = task.train_batch(step, batch_size)
        opt.zero_grad()
        loss = model.loss(batch[0])
        for sample in batch[1:]:
            loss = loss + model.loss(sample)
        loss = loss / float(len(batch))
        if not np.isfinite(loss.data):
            raise NumericFault(f"loss became non-finite at step {step}")
        loss.backward()
        if clip is not None:
            clip_gradients(params, clip)
        opt.step()
        last = float(loss.data)
    return last


def evaluate(model, task):
    """Mean per-sample accuracy over the held-out set."""
    scores = [model.accuracy(s) for s in task.eval_set()]
    return float(np.mean(scores))
