"""Regular, deformable, and dynamic convolution in the attention mold.

All three share the same aggregation skeleton as the attention layer:
a weighted sum of (projected) values over a support region. What varies
is how the weights arise:

    regular     fixed one-hot weights at integer offsets
    deformable  bilinear weights at learned fractional displacements
    dynamic     a softmax kernel predicted from the query's own content
"""

import numpy as np

from attnlab import ConvParams, DynamicConvParams, Rng, Tensor
from attnlab.conv import (
    deformable_conv2d,
    indicator_weights,
    linear_kernel,
    regular_conv2d,
)
from attnlab.dynconv import dynamic_conv1d, dynamic_kernel, glu

rng = Rng(11)
h, w, c = 4, 5, 3
x = Tensor(rng.normal((h * w, c)))

# A regular 3x3 conv is attention with indicator weights: each sampling
# point contributes a (cells x cells) 0/1 matrix selecting its neighbor.
# For the north-west point, cell (1, j) attends exactly to cell (0, j-1);
# the first grid row has no north-west neighbor at all.
masks = indicator_weights((h, w), kernel=3)
print("indicator rows of the north-west point for the second grid row:")
print(masks[0][w:2 * w, :].astype(int))

params = ConvParams(c, 4, kernel=3, ndim=2, rng=rng.child(0))
out = regular_conv2d(x, params, extent=(h, w))
print("regular conv output shape:", out.shape)

# Deformable conv starts life as an exact copy of the regular one: the
# offset predictor is zero-initialized, so displacements are zero and
# the bilinear kernel collapses onto the integer grid.
dfm = ConvParams(c, 4, kernel=3, ndim=2, rng=rng.child(0), deformable=True)
same = np.abs(regular_conv2d(x, dfm, extent=(h, w)).data
              - deformable_conv2d(x, dfm, extent=(h, w)).data).max()
print("deformable == regular at zero offsets, max|diff| =", same)

# Push the predictor off zero and the sampling points wander off-grid;
# each read becomes a partition-of-unity blend of four corners.
dfm.offset_w.data = rng.uniform(-0.4, 0.4, dfm.offset_w.shape)
moved = deformable_conv2d(x, dfm, extent=(h, w))
print("off-grid output differs now:",
      bool(np.abs(moved.data - out.data).max() > 1e-6))
corners = [linear_kernel(0.3, 0.0) * linear_kernel(1.7, 1.0),
           linear_kernel(0.3, 0.0) * linear_kernel(1.7, 2.0),
           linear_kernel(0.3, 1.0) * linear_kernel(1.7, 1.0),
           linear_kernel(0.3, 1.0) * linear_kernel(1.7, 2.0)]
print("corner weights at (0.3, 1.7):", [round(float(c), 4) for c in corners],
      "sum", float(sum(corners)))

# Dynamic conv predicts its kernel from the feature at the query after
# a gated linear unit, shares it across channel groups, and normalizes
# over the window, i.e. attention whose weights ignore the keys.
seq = Tensor(rng.normal((7, 8)))
dyn = DynamicConvParams(8, 8, kernel=3, n_groups=4, rng=rng.child(1))
kernels = dynamic_kernel(glu(seq, dyn), dyn)
print("\npredicted kernels, position 0 (groups x window):")
print(np.round(kernels.data[0], 3))
print("group rows sum to:", np.round(kernels.data.sum(axis=-1).ravel()[:4], 12))
print("dynamic conv output shape:", dynamic_conv1d(seq, dyn).shape)
