"""Small models wiring the mechanisms to the synthetic tasks.

Two families, matched to the task geometry:

attended-block (grids)
    regular 3x3 conv backbone, then a gated-attention residual with a
    zero-initialized scale, then mean pooling into a linear classifier.
    "+deformable" swaps the backbone for the deformable conv;
    "+dynamic" swaps the attention residual for a dynamic conv one.
    The backbone and classifier stay linear on purpose: with balanced
    payloads this keeps every input-independent weighting provably at
    chance, so any lift must come from the attention term under test.

transformer (sequences)
    For permuted-copy: one cross-attention read from the query token
    over the source, straight into a linear classifier. There is no
    residual path around the attention, so the logits see the source
    only through the attention output. "+deformable" inserts a
    deformable unit (zero-initialized residual) on the source first.
    For windowed-denoise: a self-attention residual per position;
    "+dynamic" replaces the attention with a dynamic conv.
"""

from __future__ import annotations

import numpy as np

from .attention import (
    AttentionConfig,
    AttentionParams,
    attention_forward,
    local_mask,
    offset_map_1d,
    offset_map_2d,
)
from .conv import ConvParams, deformable_conv1d, deformable_conv2d, regular_conv2d
from .dynconv import DynamicConvParams, dynamic_conv1d, dynamic_conv2d
from .errors import ContractViolation
from .tensor import Rng, Tensor, counting, zeros

# model init draws from rng branches 50+; task sampling owns the low branches
STACKS = (
    "attended-block",
    "attended-block+deformable",
    "attended-block+dynamic",
    "transformer",
    "transformer+deformable",
    "transformer+dynamic",
)


def cross_entropy(logits, labels):
    """Mean negative log likelihood of integer labels under row softmax.

    Computed as shifted log-sum-exp rather than log(softmax) so extreme
    logits cannot underflow the picked probability to zero. Shifting by
    the detached row max is exact: the derivative of log-sum-exp is the
    softmax either way.
    """
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n, v = logits.shape
    if labels.shape != (n,):
        raise ContractViolation(f"expected {n} labels, got shape {labels.shape}")
    centered = logits - Tensor(logits.data.max(axis=-1, keepdims=True))
    log_probs = centered - centered.exp().sum(axis=-1, keepdims=True).log()
    picked = log_probs.reshape(n * v, 1).take_rows(labels + np.arange(n) * v)
    return -(picked.mean())


class _Head:
    """Linear classifier head, bias included."""

    def __init__(self, c_in, n_out, rng):
        self.w = rng.param((c_in, n_out), fan_in=c_in)
        self.b = zeros((1, n_out), requires_grad=True)

    def __call__(self, h):
        return h @ self.w + self.b

    def parameters(self):
        return [self.w, self.b]


class RetrievalModel:
    """Permuted-copy: one cross-attention read, then classify the result."""

    def __init__(self, task, beta, seed, heads=2, deformable=False, window=None):
        c = task.channels
        rng = Rng(seed)
        self.task = task
        self.config = AttentionConfig.from_beta(beta, heads=heads)
        self.attn = AttentionParams(c, heads, enc_dim=c, rng=rng.child(50))
        self.offsets = offset_map_1d(1, task.extent, enc_dim=c)
        self.mask = local_mask(self.offsets, window) if window else None
        self.head = _Head(c, task.vocab, rng.child(53))
        self.deform = None
        if deformable:
            self.deform = ConvParams(c, c, kernel=3, ndim=1, rng=rng.child(51),
                                     deformable=True)
            self.deform_scale = zeros((), requires_grad=True)

    def logits(self, sample):
        x = Tensor(sample["inputs"])
        if self.deform is not None:
            x = x + deformable_conv1d(x, self.deform) * self.deform_scale
        z = Tensor(sample["query"])
        y = attention_forward(z, x, self.attn, self.config, offsets=self.offsets,
                              mask=self.mask, mode="cross")
        return self.head(y)

    def loss(self, sample):
        return cross_entropy(self.logits(sample), sample["label"])

    def predict(self, sample):
        return int(np.argmax(self.logits(sample).data))

    def accuracy(self, sample):
        return float(self.predict(sample) == sample["label"])

    def parameters(self):
        params = self.attn.parameters() + self.head.parameters()
        if self.deform is not None:
            params += self.deform.parameters() + [self.deform_scale]
        return params


class GridClassifier:
    """Salient-detection: conv backbone, attention residual, pooled read-out."""

    def __init__(self, task, beta, seed, heads=2, backbone="regular",
                 core="attention", window=None, n_groups=4):
        c = task.channels
        h, w = task.extent
        rng = Rng(seed)
        self.task = task
        self.extent = (h, w)
        self.backbone = ConvParams(c, c, kernel=3, ndim=2, rng=rng.child(51),
                                   deformable=(backbone == "deformable"))
        self.core = core
        if core == "attention":
            self.config = AttentionConfig.from_beta(beta, heads=heads)
            self.attn = AttentionParams(c, heads, enc_dim=c, rng=rng.child(50))
            self.offsets = offset_map_2d(h, w, enc_dim=c)
            self.mask = local_mask(self.offsets, window) if window else None
        elif core == "dynamic":
            self.dyn = DynamicConvParams(c, c, kernel=3, n_groups=n_groups,
                                         rng=rng.child(52), ndim=2)
            self.dyn_scale = zeros((), requires_grad=True)
        else:
            raise ContractViolation(f"unknown core {core!r}")
        self.head = _Head(c, task.vocab, rng.child(53))

    def logits(self, sample):
        x = Tensor(sample["inputs"])
        if self.backbone.offset_w is not None:
            h = deformable_conv2d(x, self.backbone, self.extent)
        else:
            h = regular_conv2d(x, self.backbone, self.extent)
        if self.core == "attention":
            h = attention_forward(h, h, self.attn, self.config,
                                  offsets=self.offsets, mask=self.mask,
                                  residual=True)
        else:
            h = h + dynamic_conv2d(h, self.dyn, self.extent) * self.dyn_scale
        pooled = h.sum(axis=0, keepdims=True) / float(h.shape[0])
        return self.head(pooled)

    def loss(self, sample):
        return cross_entropy(self.logits(sample), sample["label"])

    def predict(self, sample):
        return int(np.argmax(self.logits(sample).data))

    def accuracy(self, sample):
        return float(self.predict(sample) == sample["label"])

    def parameters(self):
        params = self.backbone.parameters() + self.head.parameters()
        if self.core == "attention":
            params += self.attn.parameters()
        else:
            params += self.dyn.parameters() + [self.dyn_scale]
        return params


class DenoiseModel:
    """Windowed-denoise: per-position residual attention or dynamic conv."""

    def __init__(self, task, beta, seed, heads=2, core="attention",
                 deformable=False, window=None, n_groups=4):
        c = task.channels
        length = task.extent
        rng = Rng(seed)
        self.task = task
        self.core = core
        self.deform = None
        if deformable:
            self.deform = ConvParams(c, c, kernel=3, ndim=1, rng=rng.child(51),
                                     deformable=True)
            self.deform_scale = zeros((), requires_grad=True)
        if core == "attention":
            self.config = AttentionConfig.from_beta(beta, heads=heads)
            self.attn = AttentionParams(c, heads, enc_dim=c, rng=rng.child(50))
            self.offsets = offset_map_1d(length, length, enc_dim=c)
            self.mask = local_mask(self.offsets, window) if window else None
        elif core == "dynamic":
            self.dyn = DynamicConvParams(c, c, kernel=3, n_groups=n_groups,
                                         rng=rng.child(52), ndim=1)
            self.dyn_scale = zeros((), requires_grad=True)
        else:
            raise ContractViolation(f"unknown core {core!r}")
        self.head = _Head(c, task.vocab, rng.child(53))

    def logits(self, sample):
        x = Tensor(sample["inputs"])
        if self.deform is not None:
            x = x + deformable_conv1d(x, self.deform) * self.deform_scale
        if self.core == "attention":
            h = attention_forward(x, x, self.attn, self.config,
                                  offsets=self.offsets, mask=self.mask,
                                  residual=True)
        else:
            h = x + dynamic_conv1d(x, self.dyn) * self.dyn_scale
        return self.head(h)

    def loss(self, sample):
        return cross_entropy(self.logits(sample), sample["label"])

    def predict(self, sample):
        return np.argmax(self.logits(sample).data, axis=-1)

    def accuracy(self, sample):
        return float((self.predict(sample) == sample["label"]).mean())

    def parameters(self):
        params = self.head.parameters()
        if self.deform is not None:
            params += self.deform.parameters() + [self.deform_scale]
        if self.core == "attention":
            params += self.attn.parameters()
        else:
            params += self.dyn.parameters() + [self.dyn_scale]
        return params


def count_forward(model, sample):
    """MAC record of one un-batched forward pass up to the logits."""
    with counting() as counter:
        model.logits(sample)
    return counter


def build_model(task, stack, beta, seed, heads=2, window=None, n_groups=4):
    """Assemble the model for one (task, stack) cell of the ablation grid."""
    if stack not in STACKS:
        raise ContractViolation(f"unknown stack {stack!r}")
    base, _, extra = stack.partition("+")
    if task.kind == "salient-detection":
        if base != "attended-block":
            raise ContractViolation("grid tasks use the attended-block stacks")
        return GridClassifier(
            task, beta, seed, heads=heads, window=window, n_groups=n_groups,
            backbone="deformable" if extra == "deformable" else "regular",
            core="dynamic" if extra == "dynamic" else "attention",
        )
    if base != "transformer":
        raise ContractViolation("sequence tasks use the transformer stacks")
    if task.kind == "permuted-copy":
        if extra == "dynamic":
            raise ContractViolation(
                "dynamic conv is a local self-mechanism; it cannot take the "
                "cross-attention slot of permuted-copy")
        return RetrievalModel(task, beta, seed, heads=heads, window=window,
                              deformable=(extra == "deformable"))
    if task.kind == "windowed-denoise":
        return DenoiseModel(
            task, beta, seed, heads=heads, window=window, n_groups=n_groups,
            deformable=(extra == "deformable"),
            core="dynamic" if extra == "dynamic" else "attention",
        )
    raise ContractViolation(f"no model family for task kind {task.kind!r}")
