"""Vectorized prefix-sum and sliding-extreme kernels shared by the sweeps.

These are the hot loops of the package: every norm, maximal operator, and
Muckenhoupt constant reduces to window sums and window extrema over cell
arrays.  All helpers operate along axis 0 and broadcast over trailing axes so
the 2D code can reuse them separably.
"""

from __future__ import annotations

import numpy as np


def prefix_sum_1d(values: np.ndarray) -> np.ndarray:
    """P with P[i] = sum(values[:i]); length len(values)+1."""
    out = np.zeros(len(values) + 1, dtype=np.float64)
    np.cumsum(values, out=out[1:])
    return out


def window_sums_1d(prefix: np.ndarray, width: int) -> np.ndarray:
    """Sums over every window [i, i+width); length N-width+1."""
    return prefix[width:] - prefix[:-width]


def prefix_sum_2d(values: np.ndarray) -> np.ndarray:
    """Integral image with a zero border; shape (N+1, N+1)."""
    out = np.zeros((values.shape[0] + 1, values.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(values, axis=0), axis=1, out=out[1:, 1:])
    return out


def window_sums_2d(prefix: np.ndarray, width: int) -> np.ndarray:
    """Sums over every width x width window; shape (N-width+1, N-width+1)."""
    w = width
    return (prefix[w:, w:] - prefix[:-w, w:] - prefix[w:, :-w] + prefix[:-w, :-w])


def box_sum_2d(prefix: np.ndarray, lo0: int, hi0: int, lo1: int, hi1: int) -> float:
    return float(prefix[hi0, hi1] - prefix[lo0, hi1] - prefix[hi0, lo1] + prefix[lo0, lo1])


def sliding_extreme(arr: np.ndarray, width: int, kind: str = "max") -> np.ndarray:
    """Extreme over every window of `width` consecutive entries along axis 0.

    Uses a doubling (sparse-table) scheme: O(len * log width) work, exact.
    Result has length arr.shape[0] - width + 1 along axis 0.
    """
    if width < 1 or width > arr.shape[0]:
        raise ValueError("window width out of range")
    op = np.maximum if kind == "max" else np.minimum
    if width == 1:
        return arr.copy()
    level = width.bit_length() - 1  # largest power of two <= width
    table = arr
    step = 1
    for _ in range(level):
        table = op(table[:-step], table[step:])
        step *= 2
    # windows of length `width` = union of two windows of length 2^level
    off = width - step
    if off == 0:
        return table
    return op(table[: table.shape[0] - off], table[off:])


def covering_window_extreme(window_vals: np.ndarray, width: int, n_cells: int,
                            kind: str = "max") -> np.ndarray:
    """Per-cell extreme of window values over all windows covering the cell.

    `window_vals[i]` belongs to the window [i, i+width); cell c is covered by
    windows with i in [c-width+1, c] clipped to [0, n_cells-width].  Out-of-range
    slots are padded with the identity for the chosen extreme.
    """
    pad_val = -np.inf if kind == "max" else np.inf
    m = window_vals.shape[0]
    assert m == n_cells - width + 1
    pad_shape = (width - 1,) + window_vals.shape[1:]
    padded = np.concatenate([
        np.full(pad_shape, pad_val),
        window_vals,
        np.full(pad_shape, pad_val),
    ], axis=0)
    return sliding_extreme(padded, width, kind=kind)
