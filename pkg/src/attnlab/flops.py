"""Closed-form MAC counts for every mechanism, plus the report table.

Counting unit: one scalar multiply (with its ride-along accumulate) is
one MAC. Additions on their own are free. Exponentials and divisions,
softmax normalization above all, are tallied separately and excluded
from conformance against the closed forms. Counts cover the forward
pass only. Building the sinusoid offset table is a one-time setup cost
and is excluded; projecting it is counted where it happens.

Every closed form here mirrors the factorization the library actually
executes (embed once, then per-pair work), and the tests require
instrumented counts to match these formulas with no tolerance. The
pure positional term is deliberately charged per query-key pair, like
the implementation computes it: its value depends only on the offset,
but materializing the pair grid is a genuine traversal and the cost
model keeps the quadratic portion visible.
"""

from __future__ import annotations

import csv
import io
import math

from .errors import ContractViolation

TERMS = ("query_key", "query_pos", "key_only", "pos_only")

# factor dependence and spatial pattern per term / mechanism
TERM_FLAGS = {
    "query_key": {"query": True, "key": True, "relpos": False},
    "query_pos": {"query": True, "key": False, "relpos": True},
    "key_only": {"query": False, "key": True, "relpos": False},
    "pos_only": {"query": False, "key": False, "relpos": True},
}
MECHANISM_FLAGS = {
    "regular": {"query": False, "key": False, "relpos": True, "spatial": "sparse,local"},
    "deformable": {"query": True, "key": False, "relpos": True, "spatial": "sparse,global"},
    "dynamic": {"query": True, "key": False, "relpos": True, "spatial": "sparse,local"},
}


def _default_geometry(n_s, c, enc_dim, n_offsets):
    if enc_dim is None:
        enc_dim = c
    if n_offsets is None:
        n_offsets = 2 * n_s - 1  # 1-d self-attention
    return enc_dim, n_offsets


def count_term_parts(term, n_s, c, m, enc_dim=None, n_offsets=None):
    """Cost breakdown of one standalone energy term at n_q = n_k = n_s.

    "embed" covers the content/offset projections, "pairwise" the work
    proportional to the query-key pair count, "probe" the per-key dot
    with a learned vector. Head count m cancels in every product
    (m * head_dim = c) but is kept for signature symmetry.
    """
    if term not in TERMS:
        raise ContractViolation(f"unknown term {term!r}")
    if c % m != 0:
        raise ContractViolation(f"heads ({m}) must divide channels ({c})")
    enc_dim, n_offsets = _default_geometry(n_s, c, enc_dim, n_offsets)
    embed = pairwise = probe = 0
    if term == "query_key":
        embed = 2 * n_s * c * c
        pairwise = n_s * n_s * c
    elif term == "query_pos":
        embed = n_s * c * c + n_offsets * enc_dim * c
        pairwise = n_s * n_s * c
    elif term == "key_only":
        embed = n_s * c * c
        probe = n_s * c
    else:  # pos_only
        embed = n_offsets * enc_dim * c
        pairwise = n_s * n_s * c
    return {"embed": embed, "pairwise": pairwise, "probe": probe,
            "total": embed + pairwise + probe}


def count_term(term, n_s, c, m, enc_dim=None, n_offsets=None):
    return count_term_parts(term, n_s, c, m, enc_dim, n_offsets)["total"]


def count_attention(gates, n_q, n_k, c, m, enc_dim=None, n_offsets=None, residual=False):
    """MACs of one switched attention layer, sharing projections.

    Returns (macs, exps, divs); exps/divs come from the softmax alone.
    """
    if c % m != 0:
        raise ContractViolation(f"heads ({m}) must divide channels ({c})")
    enc_dim, n_offsets = _default_geometry(max(n_q, n_k), c, enc_dim, n_offsets)
    g_qk, g_qp, g_ko, g_po = gates
    macs = 0
    if g_qk or g_qp:
        macs += n_q * c * c
    if g_qk or g_ko:
        macs += n_k * c * c
    if g_qp or g_po:
        macs += n_offsets * enc_dim * c
    if g_qk:
        macs += n_q * n_k * c
    if g_qp:
        macs += n_q * n_k * c
    if g_ko:
        macs += n_k * c
    if g_po:
        macs += n_q * n_k * c
    macs += n_k * c * c + n_q * n_k * c + n_q * c * c  # values, mix, output
    if residual:
        macs += n_q * c
    exps = divs = m * n_q * n_k
    return macs, exps, divs


def count_terms_combined(gates, n_s, c, m, enc_dim=None, n_offsets=None):
    """Energy-stage cost with shared projections (no aggregation)."""
    macs, _, _ = count_attention(gates, n_s, n_s, c, m, enc_dim, n_offsets)
    agg = 2 * n_s * c * c + n_s * n_s * c
    return macs - agg


def shared_savings(gates, n_s, c, m, enc_dim=None, n_offsets=None):
    """MACs saved by sharing projections across active terms."""
    standalone = sum(
        count_term(t, n_s, c, m, enc_dim, n_offsets)
        for t, g in zip(TERMS, gates)
        if g
    )
    return standalone - count_terms_combined(gates, n_s, c, m, enc_dim, n_offsets)


def count_regular(n_s, n_k, c_in, c_out=None):
    """Regular convolution through the attention path: pure aggregation."""
    c_out = c_in if c_out is None else c_out
    return n_s * n_k * c_in * c_out


def count_deformable(n_s, n_k, c_in, c_out=None, ndim=2):
    """Offset prediction, interpolation, then per-point aggregation."""
    c_out = c_in if c_out is None else c_out
    agg = n_s * n_k * c_in * c_out
    if ndim == 2:
        predict = n_s * c_in * 2 * n_k
        interp = 4 * n_s * n_k + 4 * n_s * n_k * c_in  # corner products + reads
    elif ndim == 1:
        predict = n_s * c_in * n_k
        interp = 2 * n_s * n_k * c_in
    else:
        raise ContractViolation(f"ndim must be 1 or 2, got {ndim}")
    return predict + interp + agg


def count_dynamic(n_s, n_k, c_in, n_g, c_out=None):
    """GLU, grouped kernel prediction, depthwise mix, pointwise output.

    Returns (macs, exps, divs). Only the n_s*c*n_g*n_k predictor block
    scales with the group count.
    """
    if c_in % n_g != 0:
        raise ContractViolation(f"groups ({n_g}) must divide channels ({c_in})")
    c_out = c_in if c_out is None else c_out
    glu = 2 * n_s * c_in * c_in + n_s * c_in
    predict = n_s * c_in * n_g * n_k
    mix = n_s * n_k * c_in
    point = n_s * c_in * c_out
    exps = n_s * c_in + n_s * n_g * n_k  # sigmoid gate + kernel softmax
    return glu + predict + mix + point, exps, exps


def count_mechanism(mechanism, n_s, c, n_k=None, n_g=None, m=None, beta=None, ndim=None):
    """Closed-form MACs for a whole mechanism at self-attention shape."""
    if mechanism == "transformer":
        if beta is None or m is None:
            raise ContractViolation("transformer counts need beta and m")
        gates = tuple(ch == "1" for ch in beta)
        return count_attention(gates, n_s, n_s, c, m)[0]
    if mechanism == "regular":
        return count_regular(n_s, n_k, c)
    if mechanism == "deformable":
        return count_deformable(n_s, n_k, c, ndim=2 if ndim is None else ndim)
    if mechanism == "dynamic":
        return count_dynamic(n_s, n_k, c, n_g)[0]
    raise ContractViolation(f"unknown mechanism {mechanism!r}")


def loglog_slope(ns, counts):
    """Least-squares slope of log(count) against log(n)."""
    xs = [math.log(n) for n in ns]
    ys = [math.log(c) for c in counts]
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = sum((x - mx) ** 2 for x in xs)
    return num / den


def _flag_string(flags, spatial):
    bits = ",".join(f"{k}={int(flags[k])}" for k in ("query", "key", "relpos"))
    return f"{bits};{spatial}"


def table_rows(ns_list, c, n_k, n_g, m):
    """Rows mirroring the mechanism comparison table.

    Four attention-term rows (dense, global) and the three convolution
    mechanisms, one block per sequence length.
    """
    rows = []
    for n_s in ns_list:
        for term in TERMS:
            rows.append({
                "mechanism": "transformer",
                "term": term,
                "N_s": n_s, "C": c, "N_k": "", "N_g": "", "M": m,
                "macs": count_term(term, n_s, c, m),
                "flags": _flag_string(TERM_FLAGS[term], "dense,global"),
            })
        rows.append({
            "mechanism": "regular", "term": "",
            "N_s": n_s, "C": c, "N_k": n_k, "N_g": "", "M": "",
            "macs": count_regular(n_s, n_k, c),
            "flags": _flag_string(MECHANISM_FLAGS["regular"], MECHANISM_FLAGS["regular"]["spatial"]),
        })
        rows.append({
            "mechanism": "deformable", "term": "",
            "N_s": n_s, "C": c, "N_k": n_k, "N_g": "", "M": "",
            "macs": count_deformable(n_s, n_k, c, ndim=2),
            "flags": _flag_string(MECHANISM_FLAGS["deformable"], MECHANISM_FLAGS["deformable"]["spatial"]),
        })
        rows.append({
            "mechanism": "dynamic", "term": "",
            "N_s": n_s, "C": c, "N_k": n_k, "N_g": n_g, "M": "",
            "macs": count_dynamic(n_s, n_k, c, n_g)[0],
            "flags": _flag_string(MECHANISM_FLAGS["dynamic"], MECHANISM_FLAGS["dynamic"]["spatial"]),
        })
    return rows

TABLE_COLUMNS = ["mechanism", "term", "N_s", "C", "N_k", "N_g", "M", "macs", "flags"]


def emit_table(ns_list, c, n_k, n_g, m, out=None):
    """Write the comparison table as CSV; returns the text."""
    rows = table_rows(ns_list, c, n_k, n_g, m)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
    return text
