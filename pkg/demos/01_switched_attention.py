"""Tour of the four-term switched attention layer.

The attention weight of a query-key pair is the softmax of a sum of up
to four energies, each reading a different slice of the available
information:

    query_key   projected query content . projected key content
    query_pos   projected query content . embedded relative position
    key_only    a learned probe . projected key content
    pos_only    a learned probe . embedded relative position

A four-character switch string turns terms on and off ("1010" keeps
query_key and key_only). The all-zero string degenerates to uniform
averaging over the region, which is a useful control.
"""

import numpy as np

from attnlab import (
    AttentionConfig,
    AttentionParams,
    attention_forward,
    attention_weights,
    local_mask,
    offset_map_1d,
    Rng,
    Tensor,
)

rng = Rng(7)
n, channels, heads = 6, 16, 2

params = AttentionParams(channels, heads, enc_dim=channels, rng=rng.child(0))
offsets = offset_map_1d(n, n, enc_dim=channels)
x = Tensor(rng.normal((n, channels)))

print("switch   first-row weights of head 0")
for beta in ("1000", "0100", "0010", "0001", "1111", "0000"):
    config = AttentionConfig.from_beta(beta, heads=heads)
    w = attention_weights(x, x, params, config, offsets=offsets)[0]
    row = " ".join(f"{v:.3f}" for v in w.data[0])
    print(f"{beta}     {row}")

# Every row is a distribution no matter which terms are active.
config = AttentionConfig.from_beta("1011", heads=heads)
w = attention_weights(x, x, params, config, offsets=offsets)[0]
print("\nrow sums:", np.round(w.data.sum(axis=1), 12))

# Restricting the region: a 3-wide local window masks distant keys to
# exactly zero weight, and the remaining entries renormalize.
mask = local_mask(offsets, window=3)
w = attention_weights(x, x, params, config, offsets=offsets, mask=mask)[0]
print("\nwindowed weights (exact zeros off the tridiagonal):")
for q in range(n):
    print("  ", " ".join(f"{v:.3f}" for v in w.data[q]))

# The full layer aggregates per-head values and can sit on a residual
# path behind a zero-initialized scalar, so inserting it leaves a
# pretrained stack untouched until training moves the scalar.
y = attention_forward(x, x, params, config, offsets=offsets, residual=True)
print("\nresidual output equals input at init:",
      bool(np.array_equal(y.data, x.data)))
