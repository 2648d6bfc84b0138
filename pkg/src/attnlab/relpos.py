"""Sinusoidal encodings of relative positions.

Offsets are embedded with interleaved sine/cosine channels across a
geometric frequency ladder, the usual fixed encoding. Entry 2i holds
sin(d / base^(2i/dim)) and entry 2i+1 the matching cosine. Offsets are
clipped to a maximum magnitude first, so far-apart pairs share the
encoding of the clip boundary. 2-d offsets concatenate a 1-d encoding
per axis, which is why the 2-d dimension must be divisible by four.
"""

import numpy as np

from .errors import ContractViolation

DEFAULT_BASE = 10000.0


def encode_1d(offsets, dim, base=DEFAULT_BASE, clip=None):
    """Encode integer offsets as (n, dim) sinusoid features."""
    if dim % 2 != 0:
        raise ContractViolation(f"encoding dim must be even, got {dim}")
    d = np.asarray(offsets, dtype=np.float64)
    scalar = d.ndim == 0
    d = np.atleast_1d(d)
    if clip is not None:
        d = np.clip(d, -clip, clip)
    freqs = base ** (np.arange(0, dim, 2) / dim)
    angles = d[:, None] / freqs[None, :]
    out = np.empty((d.shape[0], dim))
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out[0] if scalar else out


def encode_2d(offsets, dim, base=DEFAULT_BASE, clip=None):
    """Encode (dy, dx) offsets; each axis gets half the channels."""
    if dim % 4 != 0:
        raise ContractViolation(f"2-d encoding dim must be divisible by 4, got {dim}")
    d = np.asarray(offsets, dtype=np.float64)
    scalar = d.ndim == 1
    d = np.atleast_2d(d)
    if d.shape[1] != 2:
        raise ContractViolation(f"2-d offsets need two components, got shape {d.shape}")
    half = dim // 2
    out = np.concatenate(
        [encode_1d(d[:, 0], half, base, clip), encode_1d(d[:, 1], half, base, clip)],
        axis=1,
    )
    return out[0] if scalar else out
