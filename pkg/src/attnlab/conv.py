"""Convolutions realized on the attention path.

A regular convolution is attention with one head per sampling point:
the head attends with weight one to the key sitting at the query plus
that point's offset (keys off the edge contribute zero), the value
projection is the identity, and the head's output projection carries
the learnable kernel slice. The forward here reads those indicator
weights as a gather, which is the same arithmetic without storing the
one-hot matrices; ``indicator_weights`` materializes them for anyone
who wants the literal attention view.

The deformable variant displaces every sampling point by an offset
predicted from the query's content (a shared 1x1 projection, zero
initialized, stepped at a tenth of the global learning rate) and reads
features at the fractional result through the linear interpolation
kernel g(a, b) = max(0, 1 - |a - b|), axes multiplied in 2-d. Reads
outside the extent return zero. With the predictor at zero it
reproduces the regular convolution bit for bit.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation, ShapeMismatch
from .tensor import Rng, Tensor, zeros

OFFSET_LR_SCALE = 0.1


def kernel_points(kernel, ndim):
    """Sampling offsets of a centered kernel, row-major, center included."""
    if kernel % 2 != 1 or kernel < 1:
        raise ContractViolation(f"kernel must be odd and positive, got {kernel}")
    reach = kernel // 2
    if ndim == 1:
        return [(d,) for d in range(-reach, reach + 1)]
    if ndim == 2:
        return [
            (dy, dx)
            for dy in range(-reach, reach + 1)
            for dx in range(-reach, reach + 1)
        ]
    raise ContractViolation(f"ndim must be 1 or 2, got {ndim}")


class ConvParams:
    """One (c_out, c_in) weight per sampling point; optionally an offset
    predictor for the deformable variant."""

    def __init__(self, c_in, c_out, kernel, ndim, rng: Rng, deformable=False):
        self.c_in = c_in
        self.c_out = c_out
        self.kernel = kernel
        self.ndim = ndim
        self.points = kernel_points(kernel, ndim)
        fan_in = c_in * len(self.points)
        self.point_weights = [rng.param((c_out, c_in), fan_in=fan_in) for _ in self.points]
        if deformable:
            self.offset_w = zeros(
                (c_in, ndim * len(self.points)), requires_grad=True, lr_scale=OFFSET_LR_SCALE
            )
        else:
            self.offset_w = None

    def parameters(self):
        out = list(self.point_weights)
        if self.offset_w is not None:
            out.append(self.offset_w)
        return out


def _check_extent(x, extent):
    n = int(np.prod(extent))
    if x.shape[0] != n:
        raise ShapeMismatch(f"input has {x.shape[0]} cells, extent {extent} implies {n}")


def indicator_weights(extent, kernel):
    """The regular convolution's attention matrices, one per point.

    Entry [q, k] is 1.0 exactly when key k sits at query q displaced by
    the point's offset; rows whose target falls off the edge are all
    zero. Returned as plain arrays for inspection and testing.
    """
    ndim = 1 if np.isscalar(extent) else len(extent)
    if ndim == 1:
        n = int(extent)
        shape = (n,)
    else:
        shape = tuple(extent)
        n = int(np.prod(shape))
    mats = []
    for point in kernel_points(kernel, ndim):
        mat = np.zeros((n, n))
        for q in range(n):
            cell = np.unravel_index(q, shape)
            target = tuple(c + d for c, d in zip(cell, point))
            if all(0 <= t < s for t, s in zip(target, shape)):
                mat[q, np.ravel_multi_index(target, shape)] = 1.0
        mats.append(mat)
    return mats


def _neighbor_index_1d(n, dp):
    idx = np.arange(n) + dp
    return np.where((idx >= 0) & (idx < n), idx, -1)

def _neighbor_index_2d(h, w, dy, dx):
    ys, xs = np.divmod(np.arange(h * w), w)
    ny, nx = ys + dy, xs + dx
    ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
    return np.where(ok, ny * w + nx, -1)


def regular_conv1d(x, params: ConvParams):
    """Sequence convolution with zero padding; x is (n, c_in)."""
    if params.ndim != 1:
        raise ContractViolation("params were built for a different layout")
    n = x.shape[0]
    out = None
    for wm, (dp,) in zip(params.point_weights, params.points):
        feat = x.take_rows(_neighbor_index_1d(n, dp), oob_zero=True)
        contrib = feat @ wm.T
        out = contrib if out is None else out + contrib
    return out


def regular_conv2d(x, params: ConvParams, extent):
    """Grid convolution with zero padding; x is (h*w, c_in), row-major."""
    if params.ndim != 2:
        raise ContractViolation("params were built for a different layout")
    _check_extent(x, extent)
    h, w = extent
    out = None
    for wm, (dy, dx) in zip(params.point_weights, params.points):
        feat = x.take_rows(_neighbor_index_2d(h, w, dy, dx), oob_zero=True)
        contrib = feat @ wm.T
        out = contrib if out is None else out + contrib
    return out


def linear_kernel(a, b):
    """Interpolation kernel g(a, b) = max(0, 1 - |a - b|) on tensors."""
    diff = a - b
    return (1.0 - diff.abs()).relu() if isinstance(diff, Tensor) else np.maximum(0.0, 1.0 - np.abs(diff))


def _require_deformable(params):
    if params.offset_w is None:
        raise ContractViolation("params carry no offset predictor; build with deformable=True")


def deformable_conv1d(x, params: ConvParams):
    """Deformable sequence convolution; x is (n, c_in)."""
    if params.ndim != 1:
        raise ContractViolation("params were built for a different layout")
    _require_deformable(params)
    n = x.shape[0]
    disp = x @ params.offset_w
    base = np.arange(n, dtype=np.float64).reshape(n, 1)
    out = None
    for m, (wm, (dp,)) in enumerate(zip(params.point_weights, params.points)):
        pos = disp.slice_cols(m, m + 1) + Tensor(base + dp)
        lo = np.floor(pos.data).astype(np.int64)
        sampled = None
        for nb in (lo, lo + 1):
            weight = linear_kernel(pos, Tensor(nb.astype(np.float64)))
            idx = np.where((nb >= 0) & (nb < n), nb, -1).reshape(n)
            feat = x.take_rows(idx, oob_zero=True)
            piece = feat * weight
            sampled = piece if sampled is None else sampled + piece
        contrib = sampled @ wm.T
        out = contrib if out is None else out + contrib
    return out


def deformable_conv2d(x, params: ConvParams, extent):
    """Deformable grid convolution; x is (h*w, c_in), row-major."""
    if params.ndim != 2:
        raise ContractViolation("params were built for a different layout")
    _require_deformable(params)
    _check_extent(x, extent)
    h, w = extent
    n = h * w
    disp = x @ params.offset_w
    ys, xs = np.divmod(np.arange(n), w)
    ys = ys.astype(np.float64).reshape(n, 1)
    xs = xs.astype(np.float64).reshape(n, 1)
    out = None
    for m, (wm, (dy, dx)) in enumerate(zip(params.point_weights, params.points)):
        pos_y = disp.slice_cols(2 * m, 2 * m + 1) + Tensor(ys + dy)
        pos_x = disp.slice_cols(2 * m + 1, 2 * m + 2) + Tensor(xs + dx)
        y0 = np.floor(pos_y.data).astype(np.int64)
        x0 = np.floor(pos_x.data).astype(np.int64)
        sampled = None
        for ny in (y0, y0 + 1):
            gy = linear_kernel(pos_y, Tensor(ny.astype(np.float64)))
            for nx in (x0, x0 + 1):
                gx = linear_kernel(pos_x, Tensor(nx.astype(np.float64)))
                gw = gy * gx
                ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
                idx = np.where(ok, ny * w + nx, -1).reshape(n)
                feat = x.take_rows(idx, oob_zero=True)
                piece = feat * gw
                sampled = piece if sampled is None else sampled + piece
        contrib = sampled @ wm.T
        out = contrib if out is None else out + contrib
    return out
