"""The exact multiply-accumulate meter and the complexity table.

Every tensor operation reports its scalar multiplies into any active
counting context (exp/log and divisions are tallied in their own
buckets). Closed-form formulas predict the counts per mechanism; the
two agree exactly, so the asymptotics in the complexity table can be
checked by running slope fits on real measurements.
"""

import numpy as np

from attnlab import (
    AttentionConfig,
    AttentionParams,
    Rng,
    Tensor,
    attention_forward,
    count_attention,
    count_deformable,
    count_dynamic,
    counting,
    emit_table,
    offset_map_1d,
)
from attnlab.flops import count_term_parts, loglog_slope, shared_savings

rng = Rng(3)
n, c, m = 10, 8, 2
params = AttentionParams(c, m, enc_dim=c, rng=rng.child(0))
offsets = offset_map_1d(n, n, enc_dim=c)
x = Tensor(rng.normal((n, c)))

print("switch   measured == closed form")
for beta in ("1000", "0010", "1100", "1111"):
    config = AttentionConfig.from_beta(beta, heads=m)
    with counting() as meter:
        attention_forward(x, x, params, config, offsets=offsets)
    predicted = count_attention(config.gates, n, n, c, m)
    print(f"{beta}     {(meter.macs, meter.exps, meter.divs)} == {predicted}")

# Shared projections are counted once: activating query_pos next to
# query_key reuses the query embedding, so the pair costs less than the
# sum of the parts.
print("\nmacs saved by shared projections in '1100':",
      shared_savings((True, True, False, False), n, c, m))

# Pairwise terms scale quadratically with the number of positions,
# saliency and the conv mechanisms scale linearly.
ns = [64, 128, 256, 512]
pair = [count_term_parts("query_key", v, 16, 2)["pairwise"] for v in ns]
sal = [count_term_parts("key_only", v, 16, 2)["total"] for v in ns]
dfm = [count_deformable(v, 9, 16, 16, ndim=2) for v in ns]
dyn = [count_dynamic(v, 3, 16, 4, 16)[0] for v in ns]
print("query_key pairwise slope:", round(loglog_slope(ns, pair), 3))
print("key_only total slope:    ", round(loglog_slope(ns, sal), 3))
print("deformable slope:        ", round(loglog_slope(ns, dfm), 3))
print("dynamic slope:           ", round(loglog_slope(ns, dyn), 3))

# The same numbers as a CSV artifact, one row per term/mechanism and
# size, with the factor-usage flags in the last column.
print("\n" + emit_table([64, 256], 16, 9, 4, 2))
