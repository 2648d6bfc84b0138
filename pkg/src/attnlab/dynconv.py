"""Dynamic convolution: kernels predicted per position from content.

The input first passes a gated linear unit (two full projections, one
squashed through a sigmoid and multiplied onto the other). From the
gated feature, a shared projection predicts one kernel per channel
group and position; a softmax over the window turns it into mixing
weights. Channels within a group share their kernel, so the predictor
costs N_s * C * N_g * N_k instead of a full per-channel kernel. The
window is then applied depthwise and a pointwise projection mixes
channels at the end.

At sequence edges, window positions falling outside contribute zero
and the remaining weights are used as they are; ``renormalize=True``
rescales the in-range weights to sum to one instead.
"""

from __future__ import annotations

import numpy as np

from .conv import _neighbor_index_1d, _neighbor_index_2d, kernel_points
from .errors import ContractViolation, ShapeMismatch
from .tensor import Rng, Tensor

DEFAULT_GROUPS = 16


def group_of_channel(channel, channels, n_groups):
    """1-indexed group of a 1-indexed channel; groups are contiguous."""
    if channels % n_groups != 0:
        raise ShapeMismatch(f"groups ({n_groups}) must divide channels ({channels})")
    if not 1 <= channel <= channels:
        raise ContractViolation(f"channel {channel} out of range 1..{channels}")
    return (channel - 1) // (channels // n_groups) + 1


class DynamicConvParams:
    """GLU projections, grouped kernel predictor, pointwise output."""

    def __init__(self, c_in, c_out, kernel, n_groups, rng: Rng, ndim=1):
        if c_in % n_groups != 0:
            raise ShapeMismatch(f"groups ({n_groups}) must divide channels ({c_in})")
        self.c_in = c_in
        self.c_out = c_out
        self.kernel = kernel
        self.n_groups = n_groups
        self.ndim = ndim
        self.points = kernel_points(kernel, ndim)
        self.glu_lin_w = rng.param((c_in, c_in), fan_in=c_in)
        self.glu_lin_b = rng.param((1, c_in), fan_in=c_in)
        self.glu_gate_w = rng.param((c_in, c_in), fan_in=c_in)
        self.glu_gate_b = rng.param((1, c_in), fan_in=c_in)
        # column g * n_points + j predicts kernel slot j of group g
        self.kernel_pred = rng.param((c_in, n_groups * len(self.points)), fan_in=c_in)
        self.point_w = rng.param((c_out, c_in), fan_in=c_in)

    def parameters(self):
        return [
            self.glu_lin_w,
            self.glu_lin_b,
            self.glu_gate_w,
            self.glu_gate_b,
            self.kernel_pred,
            self.point_w,
        ]


def glu(x, params: DynamicConvParams):
    """Gated linear unit, both branches keeping the channel width."""
    lin = x @ params.glu_lin_w + params.glu_lin_b
    gate = (x @ params.glu_gate_w + params.glu_gate_b).sigmoid()
    return lin * gate


def dynamic_kernel(h, params: DynamicConvParams):
    """Window weights per position and group, shape (n, n_groups, n_k).

    Softmax runs over the window, so every (position, group) row is a
    distribution regardless of content.
    """
    n = h.shape[0]
    n_pts = len(params.points)
    logits = h @ params.kernel_pred
    return logits.reshape(n, params.n_groups, n_pts).softmax(axis=-1)


def _mix(h, kernel3, params, neighbor_index, renormalize):
    n = h.shape[0]
    n_pts = len(params.points)
    size = params.c_in // params.n_groups
    flat = kernel3.reshape(n, params.n_groups * n_pts)
    # channel c reads its group's kernel: duplication happens in the gather
    col_of_channel = np.repeat(np.arange(params.n_groups) * n_pts, size)
    coeffs = [flat.take_cols(col_of_channel + j) for j in range(n_pts)]
    indices = [neighbor_index(point) for point in params.points]
    if renormalize:
        mass = None
        for coeff, idx in zip(coeffs, indices):
            inside = Tensor((idx >= 0).astype(np.float64).reshape(n, 1))
            piece = coeff * inside
            mass = piece if mass is None else mass + piece
        scale = mass.reciprocal()
        coeffs = [c * scale for c in coeffs]
    mixed = None
    for coeff, idx in zip(coeffs, indices):
        shifted = h.take_rows(idx, oob_zero=True)
        piece = coeff * shifted
        mixed = piece if mixed is None else mixed + piece
    return mixed @ params.point_w.T


def dynamic_conv1d(x, params: DynamicConvParams, renormalize=False):
    """Full dynamic convolution on a sequence (n, c_in)."""
    if params.ndim != 1:
        raise ContractViolation("params were built for a different layout")
    if x.shape[1] != params.c_in:
        raise ShapeMismatch(f"input has {x.shape[1]} channels, params expect {params.c_in}")
    n = x.shape[0]
    h = glu(x, params)
    kernel3 = dynamic_kernel(h, params)
    return _mix(h, kernel3, params, lambda p: _neighbor_index_1d(n, p[0]), renormalize)


def dynamic_conv2d(x, params: DynamicConvParams, extent, renormalize=False):
    """Grid variant: an n_k x n_k window with the same channel grouping."""
    if params.ndim != 2:
        raise ContractViolation("params were built for a different layout")
    h_ext, w_ext = extent
    if x.shape[0] != h_ext * w_ext:
        raise ShapeMismatch(f"input has {x.shape[0]} cells, extent {extent} implies {h_ext * w_ext}")
    if x.shape[1] != params.c_in:
        raise ShapeMismatch(f"input has {x.shape[1]} channels, params expect {params.c_in}")
    h = glu(x, params)
    kernel3 = dynamic_kernel(h, params)
    return _mix(
        h, kernel3, params, lambda p: _neighbor_index_2d(h_ext, w_ext, p[0], p[1]), renormalize
    )
