"""Counter-based random substreams.

Every random quantity in this package is a pure function of a 64-bit seed
and a tuple of integer coordinates (cell indices, trial indices, retry
counters).  A SplitMix64-style finalizer provides the splittable
counter-based generator contract: substreams keyed by (seed, j, k) are
independent, cheap to derive, and vectorize over index arrays, so a minor
regenerated from the same seed agrees cell-for-cell with the full matrix
and results are invariant under any parallel execution order.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def _finalize(x):
    """SplitMix64 output function on uint64 scalars or arrays (wrapping)."""
    with np.errstate(over="ignore"):
        x = np.asarray(x, dtype=np.uint64).copy()
        x ^= x >> _U64(30)
        x *= _MIX1
        x ^= x >> _U64(27)
        x *= _MIX2
        x ^= x >> _U64(31)
    return x


def derive_key(*parts: int) -> int:
    """Fold integer coordinates into a single 64-bit substream key."""
    h = _U64(0x243F6A8885A308D3)  # arbitrary nonzero start
    with np.errstate(over="ignore"):
        for p in parts:
            h = _finalize((h + _U64(p & 0xFFFFFFFFFFFFFFFF)) * _GOLDEN + _GOLDEN)
    return int(h)


def cell_keys(seed: int, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Vectorized substream keys for matrix cells (seed, j, k)."""
    with np.errstate(over="ignore"):
        s = _U64(seed & 0xFFFFFFFFFFFFFFFF)
        h = _finalize((_U64(0x243F6A8885A308D3) + s) * _GOLDEN + _GOLDEN)
        h = _finalize((h + np.asarray(rows, dtype=np.uint64)) * _GOLDEN + _GOLDEN)
        h = _finalize((h + np.asarray(cols, dtype=np.uint64)) * _GOLDEN + _GOLDEN)
    return h


def uniforms(keys, draw_index) -> np.ndarray:
    """The draw_index-th uniform of each keyed substream, strict (0, 1)."""
    with np.errstate(over="ignore"):
        t = np.asarray(draw_index, dtype=np.uint64)
        raw = _finalize(np.asarray(keys, dtype=np.uint64) + (t + _U64(1)) * _GOLDEN)
        # 53 high bits, offset by half an ulp so 0 and 1 are unreachable
        return ((raw >> _U64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)
