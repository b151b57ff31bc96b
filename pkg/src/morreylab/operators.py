"""Maximal and fractional-integral operators on grid functions.

Per-cell quantifiers ("for all x") are evaluated at cell centers; since every
function is piecewise constant, suprema over a cell are attained there for the
families used.  Dilated cubes are clipped to the root but averaged against
their nominal volume (the function is zero outside the root), which keeps the
whole-space scaling of every constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._windows import (
    covering_window_extreme,
    prefix_sum_1d,
    prefix_sum_2d,
    window_sums_1d,
    window_sums_2d,
)
from .grid import (
    Cube,
    DomainError,
    Fidelity,
    Grid,
    GridFunction,
    dilate,
    family_blocks,
    require_weight,
)


@dataclass(frozen=True)
class OperatorOutput:
    result: GridFunction
    tag: str
    params: dict = field(default_factory=dict, compare=False)

    @property
    def values(self) -> np.ndarray:
        return self.result.values


def _level_block_sums(values: np.ndarray, level: int, grid: Grid) -> np.ndarray:
    s = grid.cells_per_side >> level
    if grid.ndim == 1:
        return values.reshape(1 << level, s).sum(axis=1)
    k = 1 << level
    return values.reshape(k, s, k, s).sum(axis=(1, 3))


def _broadcast_level(vals: np.ndarray, level: int, grid: Grid) -> np.ndarray:
    s = grid.cells_per_side >> level
    if grid.ndim == 1:
        return np.repeat(vals, s)
    return np.repeat(np.repeat(vals, s, axis=0), s, axis=1)


def _tripled_block_sums(block: np.ndarray, ndim: int) -> np.ndarray:
    """Sum of each block with its (clipped) neighbors: the integral over 3Q."""
    if ndim == 1:
        padded = np.pad(block, 1)
        return padded[:-2] + padded[1:-1] + padded[2:]
    padded = np.pad(block, 1)
    out = np.zeros_like(block)
    for di in range(3):
        for dj in range(3):
            out += padded[di:di + block.shape[0], dj:dj + block.shape[1]]
    return out


def fractional_maximal(f: GridFunction, alpha: float,
                       fidelity: Fidelity | None = None) -> OperatorOutput:
    """M_alpha f: per cell, sup over family cubes containing the cell of
    |Q|^(alpha/n) avg_Q |f|.  alpha = 0 is the Hardy-Littlewood maximal operator.
    """
    grid = f.grid
    if not 0 <= alpha < grid.ndim:
        raise DomainError(f"need 0 <= alpha < n, got alpha={alpha}")
    fid: Fidelity = fidelity or grid.default_fidelity()
    h = grid.cell_side
    g = np.abs(f.values)
    n = grid.cells_per_side

    out = np.full(grid.shape, -np.inf)
    if fid == "aligned" and grid.ndim == 1:
        prefix = prefix_sum_1d(g)
        for s in range(1, n + 1):
            scale = (s * h) ** alpha / s
            vals = scale * window_sums_1d(prefix, s)
            np.maximum(out, covering_window_extreme(vals, s, n), out=out)
    elif fid == "aligned":
        prefix = prefix_sum_2d(g)
        for s in range(1, n + 1):
            scale = (s * h) ** alpha / (s * s)
            vals = scale * window_sums_2d(prefix, s)
            cols = covering_window_extreme(vals, s, n)
            np.maximum(out, covering_window_extreme(cols.T, s, n).T, out=out)
    else:
        for s, start_lists in family_blocks(grid, fid):
            scale = (s * h) ** alpha / s**grid.ndim
            if grid.ndim == 1:
                prefix = prefix_sum_1d(g)
                sums = window_sums_1d(prefix, s)
                for starts in start_lists:
                    offset = int(starts[0])
                    vals = scale * sums[starts]
                    cells = np.arange(n)
                    idx = (cells - offset) // s
                    valid = (cells >= offset) & (idx < len(starts)) & (idx >= 0)
                    cand = np.where(valid, vals[np.clip(idx, 0, len(starts) - 1)], -np.inf)
                    np.maximum(out, cand, out=out)
            else:
                prefix = prefix_sum_2d(g)
                for sa in start_lists:
                    for sb in start_lists:
                        sums = (prefix[np.ix_(sa + s, sb + s)] - prefix[np.ix_(sa, sb + s)]
                                - prefix[np.ix_(sa + s, sb)] + prefix[np.ix_(sa, sb)])
                        vals = scale * sums
                        cells = np.arange(n)
                        ia = (cells - int(sa[0])) // s
                        ib = (cells - int(sb[0])) // s
                        va = (cells >= sa[0]) & (ia >= 0) & (ia < len(sa))
                        vb = (cells >= sb[0]) & (ib >= 0) & (ib < len(sb))
                        cand = np.where(
                            va[:, None] & vb[None, :],
                            vals[np.clip(ia, 0, len(sa) - 1)][:, np.clip(ib, 0, len(sb) - 1)],
                            -np.inf,
                        )
                        np.maximum(out, cand, out=out)
    return OperatorOutput(GridFunction(grid, out), "fractional_maximal",
                          {"alpha": alpha, "fidelity": fid})


def _dilated_scaled_averages(f: GridFunction, alpha: float, base: Cube,
                             alpha_weighting: bool) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Per level within `base`: (level, slice indices, scaled averages over 3Q).

    With alpha_weighting the value is |Q|^(alpha/n) * avg_{3Q} f, otherwise the
    plain avg_{3Q} f.  Averages are taken against the nominal volume of 3Q.
    """
    grid = f.grid
    h = grid.cell_side
    cellvol = grid.cell_volume
    out = []
    for level in range(base.level, grid.depth + 1):
        s = grid.cells_per_side >> level
        block = _level_block_sums(f.values, level, grid) * cellvol
        tripled = _tripled_block_sums(block, grid.ndim)
        nominal = (3 * s * h) ** grid.ndim
        avg = tripled / nominal
        scale = (s * h) ** alpha if alpha_weighting else 1.0
        if grid.ndim == 1:
            idx = np.arange(base.lo[0] // s, base.hi[0] // s)
            out.append((level, idx, scale * avg[idx]))
        else:
            ia = np.arange(base.lo[0] // s, base.hi[0] // s)
            ib = np.arange(base.lo[1] // s, base.hi[1] // s)
            out.append((level, (ia, ib), scale * avg[np.ix_(ia, ib)]))
    return out


def local_dyadic_maximal(f: GridFunction, alpha: float, base: Cube) -> OperatorOutput:
    """Local dyadic variant: sup over dyadic Q inside `base` containing x of
    |Q|^(alpha/n) avg_{3Q} |f|, defined on `base` (zero outside).
    """
    if not base.is_dyadic:
        raise DomainError("base cube must be dyadic")
    grid = f.grid
    g = abs(f)
    out = np.zeros(grid.shape)
    sub = np.full(base.extents, -np.inf)
    for level, idx, vals in _dilated_scaled_averages(g, alpha, base, True):
        s = grid.cells_per_side >> level
        if grid.ndim == 1:
            rep = np.repeat(vals, s)
        else:
            rep = np.repeat(np.repeat(vals, s, axis=0), s, axis=1)
        np.maximum(sub, rep, out=sub)
    out[base.slices] = sub
    return OperatorOutput(GridFunction(grid, out), "local_dyadic_maximal",
                          {"alpha": alpha, "base": base})


_KERNEL_CACHE: dict[tuple, np.ndarray] = {}


def _riesz_kernel_1d(grid: Grid, alpha: float) -> np.ndarray:
    key = (1, grid.depth, alpha)
    if key not in _KERNEL_CACHE:
        h = grid.cell_side
        n = grid.cells_per_side
        d = np.arange(1, n, dtype=np.float64)
        off = (d * h) ** (alpha - 1.0) * h
        # exact self-cell integral of |x-y|^(alpha-1) in 1D
        self_term = 2.0 * (h / 2.0) ** alpha / alpha
        koff = np.concatenate([[self_term], off])
        _KERNEL_CACHE[key] = np.concatenate([koff[:0:-1], koff])
    return _KERNEL_CACHE[key]


def _riesz_kernel_2d(grid: Grid, alpha: float) -> np.ndarray:
    key = (2, grid.depth, alpha)
    if key not in _KERNEL_CACHE:
        h = grid.cell_side
        n = grid.cells_per_side
        ax = (np.arange(n) + 0.5) * h
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        pts = np.stack([xx.reshape(-1), yy.reshape(-1)], axis=1)
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        with np.errstate(divide="ignore"):
            kern = np.where(dist > 0, dist, 1.0) ** (alpha - 2.0) * h * h
        # self cell: bracket midpoint of the radial integrals over the
        # inscribed disc (r=h/2) and circumscribed disc (r=h/sqrt(2))
        r_in, r_out = h / 2.0, h / math.sqrt(2.0)
        self_term = math.pi * (r_in**alpha + r_out**alpha) / alpha
        np.fill_diagonal(kern, self_term)
        _KERNEL_CACHE[key] = kern
    return _KERNEL_CACHE[key]


def fractional_integral(f: GridFunction, alpha: float) -> OperatorOutput:
    """Riesz potential: I_alpha f(x) = int f(y) |x-y|^(alpha-n) dy by dense
    cell-to-cell kernel summation (center-to-center off the diagonal, exact or
    bracketed radial integral on the self cell).
    """
    grid = f.grid
    if not 0 < alpha < grid.ndim:
        raise DomainError(f"need 0 < alpha < n, got alpha={alpha}")
    if grid.ndim == 1:
        if grid.depth > 12:
            raise DomainError("dense 1D kernel summation is limited to depth <= 12")
        kern = _riesz_kernel_1d(grid, alpha)
        n = grid.cells_per_side
        out = np.convolve(f.values, kern, mode="full")[n - 1:2 * n - 1]
    else:
        if grid.depth > 6:
            raise DomainError("dense 2D kernel summation is limited to depth <= 6")
        kern = _riesz_kernel_2d(grid, alpha)
        out = (kern @ f.values.reshape(-1)).reshape(grid.shape)
    return OperatorOutput(GridFunction(grid, out), "fractional_integral", {"alpha": alpha})


def centered_weighted_maximal(f: GridFunction, sigma: GridFunction) -> OperatorOutput:
    """Centered maximal with respect to the measure sigma dx: per cell, sup over
    lattice cubes centered at the cell center (odd side lengths, clipped at the
    root; sigma vanishes outside, so the measure normalization is unaffected).
    """
    require_weight(sigma)
    grid = f.grid
    n = grid.cells_per_side
    num = np.abs(f.values) * sigma.values
    den = sigma.values
    out = np.full(grid.shape, -np.inf)
    cells = np.arange(n)
    if grid.ndim == 1:
        pn, pd = prefix_sum_1d(num), prefix_sum_1d(den)
        for s in range(1, n + 1, 2):
            r = (s - 1) // 2
            lo = np.clip(cells - r, 0, n)
            hi = np.clip(cells + r + 1, 0, n)
            ratio = (pn[hi] - pn[lo]) / (pd[hi] - pd[lo])
            np.maximum(out, ratio, out=out)
    else:
        pn, pd = prefix_sum_2d(num), prefix_sum_2d(den)
        for s in range(1, n + 1, 2):
            r = (s - 1) // 2
            lo = np.clip(cells - r, 0, n)
            hi = np.clip(cells + r + 1, 0, n)
            def box(pref):
                return (pref[np.ix_(hi, hi)] - pref[np.ix_(lo, hi)]
                        - pref[np.ix_(hi, lo)] + pref[np.ix_(lo, lo)])
            ratio = box(pn) / box(pd)
            np.maximum(out, ratio, out=out)
    return OperatorOutput(GridFunction(grid, out), "centered_weighted_maximal", {})


def dyadic_weighted_maximal(f: GridFunction, w: GridFunction) -> OperatorOutput:
    """Dyadic maximal with respect to w dx: sup over dyadic Q containing x of
    w(Q)^(-1) int_Q |f| w, evaluated exactly along each cell's ancestor chain.
    """
    require_weight(w)
    grid = f.grid
    num = np.abs(f.values) * w.values
    out = np.full(grid.shape, -np.inf)
    for level in range(grid.depth + 1):
        bn = _level_block_sums(num, level, grid)
        bw = _level_block_sums(w.values, level, grid)
        np.maximum(out, _broadcast_level(bn / bw, level, grid), out=out)
    return OperatorOutput(GridFunction(grid, out), "dyadic_weighted_maximal", {})


def _check_disjoint_supports(family, attr: str, grid: Grid) -> None:
    count = np.zeros(grid.shape, dtype=np.int64)
    for sc in family.cubes:
        count += np.asarray(getattr(sc, attr), dtype=np.int64)
    if count.max(initial=0) > 1:
        raise DomainError("sparse family has overlapping ownership sets")


def sparse_maximal_form(f: GridFunction, family, alpha: float) -> OperatorOutput:
    """Sum over family cubes of 1_{E_Q} |Q|^(alpha/n) avg_{3Q} f (disjoint E_Q)."""
    grid = f.grid
    _check_disjoint_supports(family, "e_mask", grid)
    out = np.zeros(grid.shape)
    for sc in family.cubes:
        q = sc.cube
        term = q.volume ** (alpha / grid.ndim) * f.zero_extension_average(dilate(q, 3.0))
        out[np.asarray(sc.e_mask)] += term
    return OperatorOutput(GridFunction(grid, out), "sparse_maximal_form", {"alpha": alpha})


def sparse_integral_form(f: GridFunction, family, alpha: float) -> OperatorOutput:
    """Sum over family cubes of 1_Q |Q|^(alpha/n) avg_{3Q} f (full-cube indicators)."""
    grid = f.grid
    _check_disjoint_supports(family, "e_mask", grid)
    out = np.zeros(grid.shape)
    for sc in family.cubes:
        q = sc.cube
        term = q.volume ** (alpha / grid.ndim) * f.zero_extension_average(dilate(q, 3.0))
        out[q.slices] += term
    return OperatorOutput(GridFunction(grid, out), "sparse_integral_form", {"alpha": alpha})
