"""Multi-head attention factored into four switchable energy terms.

A weight on query q and key k is softmax-normalized from a sum of up to
four energies: query-key content match, query content against relative
position, key saliency alone, and a pure relative-position bias. Each
term can be toggled independently, which is the knob the ablation
harness turns. With every term off the weights are uniform over the
unmasked region.

Per head, the query projection is shared between the two query-driven
terms and the key projection between the two key-driven terms, so a
layer with several terms active is cheaper than the sum of standalone
terms. Encoded relative offsets are projected once per layer from a
precomputed table covering every realizable offset; the two positional
terms then read table rows per query-key pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, ShapeMismatch
from .relpos import DEFAULT_BASE, encode_1d, encode_2d
from .tensor import Rng, Tensor

# gate order matches the 4-character switch string
TERMS = ("query_key", "query_pos", "key_only", "pos_only")


@dataclass(frozen=True)
class AttentionConfig:
    """Which energy terms are active, and how many heads."""

    gates: tuple
    heads: int = 8
    allow_uniform: bool = False

    def __post_init__(self):
        if len(self.gates) != 4 or not all(isinstance(g, bool) for g in self.gates):
            raise ContractViolation("gates must be four booleans")
        if self.heads < 1:
            raise ContractViolation("head count must be positive")
        if not any(self.gates) and not self.allow_uniform:
            raise ContractViolation(
                "no energy term active; pass allow_uniform=True to run uniform attention"
            )

    @classmethod
    def from_beta(cls, beta, heads=8):
        """Parse a switch string like "0110" (term order: query_key,
        query_pos, key_only, pos_only)."""
        if len(beta) != 4 or any(ch not in "01" for ch in beta):
            raise ContractViolation(f"switch string must be four 0/1 chars, got {beta!r}")
        gates = tuple(ch == "1" for ch in beta)
        return cls(gates=gates, heads=heads, allow_uniform=not any(gates))

    @property
    def beta(self):
        return "".join("1" if g else "0" for g in self.gates)


class AttentionParams:
    """Per-head projections for the four-term attention.

    query_embed and key_embed_ are the shared content projections,
    pos_embed maps encoded offsets into head space, content_bias and
    position_bias are the learned probe vectors of the two
    query-independent terms, and value_proj/out_proj do the usual
    low-rank value aggregation. res_scale is the residual gain,
    initialized to zero so a freshly inserted layer is the identity.
    """

    def __init__(self, channels, heads, enc_dim, rng: Rng):
        if channels % heads != 0:
            raise ShapeMismatch(f"heads ({heads}) must divide channels ({channels})")
        self.channels = channels
        self.heads = heads
        self.head_dim = channels // heads
        self.enc_dim = enc_dim
        d, c, p = self.head_dim, channels, enc_dim
        self.query_embed = [rng.param((d, c), fan_in=c) for _ in range(heads)]
        self.key_embed_ = [rng.param((d, c), fan_in=c) for _ in range(heads)]
        self.pos_embed = [rng.param((d, p), fan_in=p) for _ in range(heads)]
        self.content_bias = [rng.param((d, 1), fan_in=d) for _ in range(heads)]
        self.position_bias = [rng.param((d, 1), fan_in=d) for _ in range(heads)]
        self.value_proj = [rng.param((d, c), fan_in=c) for _ in range(heads)]
        self.out_proj = [rng.param((d, c), fan_in=d) for _ in range(heads)]
        self.res_scale = Tensor(0.0, requires_grad=True)

    def parameters(self):
        out = []
        for group in (
            self.query_embed,
            self.key_embed_,
            self.pos_embed,
            self.content_bias,
            self.position_bias,
            self.value_proj,
            self.out_proj,
        ):
            out.extend(group)
        out.append(self.res_scale)
        return out


@dataclass
class OffsetMap:
    """Precomputed relative-position geometry for one layer.

    ``table`` holds the sinusoid encoding of every realizable offset,
    ``index`` maps a (query, key) pair to its table row, and ``delta``
    keeps the raw integer offsets for building region masks.
    """

    table: np.ndarray
    index: np.ndarray
    delta: np.ndarray
    ndim: int = field(default=1)

    @property
    def n_offsets(self):
        return self.table.shape[0]

    @property
    def enc_dim(self):
        return self.table.shape[1]


def offset_map_1d(n_q, n_k, enc_dim, base=DEFAULT_BASE, clip=None):
    """Offsets k - q for aligned sequence positions."""
    delta = np.arange(n_k)[None, :] - np.arange(n_q)[:, None]
    lo, hi = int(delta.min()), int(delta.max())
    table = encode_1d(np.arange(lo, hi + 1), enc_dim, base, clip)
    return OffsetMap(table=table, index=delta - lo, delta=delta, ndim=1)


def offset_map_2d(height, width, enc_dim, base=DEFAULT_BASE, clip=None):
    """Offsets (dy, dx) between all cell pairs of a height x width grid."""
    ys, xs = np.divmod(np.arange(height * width), width)
    dy = ys[None, :] - ys[:, None]
    dx = xs[None, :] - xs[:, None]
    span = 2 * width - 1
    all_dy, all_dx = np.divmod(np.arange((2 * height - 1) * span), span)
    offsets = np.stack([all_dy - (height - 1), all_dx - (width - 1)], axis=1)
    table = encode_2d(offsets, enc_dim, base, clip)
    index = (dy + height - 1) * span + (dx + width - 1)
    return OffsetMap(table=table, index=index, delta=np.stack([dy, dx], axis=2), ndim=2)


def local_mask(offsets: OffsetMap, window):
    """Keep pairs within a centered window of odd extent ``window``."""
    if window % 2 != 1 or window < 1:
        raise ContractViolation(f"window must be odd and positive, got {window}")
    reach = window // 2
    if offsets.ndim == 1:
        return np.abs(offsets.delta) <= reach
    return np.abs(offsets.delta).max(axis=2) <= reach


def causal_mask(offsets: OffsetMap):
    """Keep keys at or before the query (sequences only)."""
    if offsets.ndim != 1:
        raise ContractViolation("causal regions are defined for sequences only")
    return offsets.delta <= 0


# -- standalone energy terms (each embeds its own inputs) ---------------------


def query_key_energy(z, x, params):
    """Content match: projected query dotted with projected key."""
    out = []
    for m in range(params.heads):
        qe = z @ params.query_embed[m].T
        ke = x @ params.key_embed_[m].T
        out.append(qe @ ke.T)
    return out


def query_pos_energy(z, offsets, params):
    """Projected query content dotted with the pair's offset embedding."""
    n_q = z.shape[0]
    out = []
    for m in range(params.heads):
        qe = z @ params.query_embed[m].T
        tbl = Tensor(offsets.table) @ params.pos_embed[m].T
        gathered = tbl.take_rows(offsets.index)
        out.append((gathered * qe.reshape(n_q, 1, params.head_dim)).sum(axis=2))
    return out


def key_only_energy(x, params):
    """Key saliency, one value per key, identical for every query."""
    out = []
    for m in range(params.heads):
        ke = x @ params.key_embed_[m].T
        out.append((ke @ params.content_bias[m]).reshape(1, x.shape[0]))
    return out


def pos_only_energy(offsets, params):
    """Pure positional bias materialized per query-key pair.

    The value depends only on the pair's relative offset, but the layer
    charges it per pair (a traversal of the full pair grid), matching
    how the cost model accounts for this term. ``pos_only_profile``
    gives the cheap per-offset view of the same numbers.
    """
    out = []
    for m in range(params.heads):
        tbl = Tensor(offsets.table) @ params.pos_embed[m].T
        gathered = tbl.take_rows(offsets.index)
        v = params.position_bias[m].reshape(1, 1, params.head_dim)
        out.append((gathered * v).sum(axis=2))
    return out


def pos_only_profile(offsets, params):
    """Positional bias per table offset: list of (n_offsets,) tensors."""
    out = []
    for m in range(params.heads):
        tbl = Tensor(offsets.table) @ params.pos_embed[m].T
        out.append((tbl @ params.position_bias[m]).reshape(offsets.n_offsets))
    return out


# -- the layer ----------------------------------------------------------------


def attention_weights(z, x, params, config, offsets=None, mask=None):
    """Per-head attention weight matrices, shape (n_q, n_k) each.

    Shared projections are computed once: the query projection feeds
    both query-driven terms and the key projection both key-driven
    terms. Positional terms need ``offsets``.
    """
    g_qk, g_qp, g_ko, g_po = config.gates
    if config.heads != params.heads:
        raise ShapeMismatch(f"config has {config.heads} heads, params {params.heads}")
    if (g_qp or g_po) and offsets is None:
        raise ContractViolation("positional terms need an OffsetMap")
    n_q, n_k = z.shape[0], x.shape[0]
    d = params.head_dim
    weights = []
    for m in range(params.heads):
        qe = z @ params.query_embed[m].T if (g_qk or g_qp) else None
        ke = x @ params.key_embed_[m].T if (g_qk or g_ko) else None
        gathered = None
        if g_qp or g_po:
            tbl = Tensor(offsets.table) @ params.pos_embed[m].T
            gathered = tbl.take_rows(offsets.index)
        energy = Tensor(np.zeros((n_q, n_k)))
        if g_qk:
            energy = energy + qe @ ke.T
        if g_qp:
            energy = energy + (gathered * qe.reshape(n_q, 1, d)).sum(axis=2)
        if g_ko:
            energy = energy + (ke @ params.content_bias[m]).reshape(1, n_k)
        if g_po:
            v = params.position_bias[m].reshape(1, 1, d)
            energy = energy + (gathered * v).sum(axis=2)
        weights.append(energy.softmax(axis=-1, mask=mask))
    return weights


def attention_forward(z, x, params, config, offsets=None, mask=None, mode="self", residual=False):
    """Full layer: switched attention weights, low-rank value aggregation,
    per-head output projection, optional gated residual.

    In "self" mode ``z`` and ``x`` must be the same tensor; "cross" mode
    attends from one set onto another. With ``residual=True`` the output
    is ``z + res_scale * y`` and ``res_scale`` starts at zero, so an
    untrained layer passes its input through untouched.
    """
    if mode == "self":
        if z is not x:
            raise ContractViolation("self mode requires z and x to be the same tensor")
    elif mode != "cross":
        raise ContractViolation(f"mode must be 'self' or 'cross', got {mode!r}")
    if z.shape[1] != params.channels or x.shape[1] != params.channels:
        raise ShapeMismatch(
            f"inputs have {z.shape[1]}/{x.shape[1]} channels, params expect {params.channels}"
        )
    weights = attention_weights(z, x, params, config, offsets, mask)
    y = None
    for m in range(params.heads):
        vm = x @ params.value_proj[m].T
        head = weights[m] @ vm
        contrib = head @ params.out_proj[m]
        y = contrib if y is None else y + contrib
    if residual:
        return z + y * params.res_scale
    return y
