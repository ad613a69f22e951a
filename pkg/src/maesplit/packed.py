"""Struct-of-arrays storage for many piecewise-linear functions on one grid.

Every breakpoint is addressed by its index in the shared sorted grid. Lookups
for a batch of functions use a single ``searchsorted`` over keys of the form
``function_id * (n + 1) + grid_index``, which are sorted because each function's
breakpoints are stored contiguously and in order.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .pwl_core import PiecewiseLinearFn, _abs_sum_parts, dagger_knots

__all__ = ["FunctionTable"]


def _ranges(starts: np.ndarray, lens: np.ndarray) -> np.ndarray:
    """Concatenate ``arange(s, s + l)`` for every pair without a Python loop."""
    lens = np.maximum(lens, 0)
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offs = np.cumsum(lens) - lens
    return np.repeat(starts - offs, lens) + np.arange(total)


def _bincount(idx: np.ndarray, weights: np.ndarray, minlength: int) -> np.ndarray:
    if idx.size == 0:
        return np.zeros(minlength)
    return np.bincount(idx, weights, minlength=minlength)


class FunctionTable:
    """``k`` unimodal functions whose breakpoints all lie on ``grid``."""

    def __init__(self, grid, bp_grid, values, slopes_after, initial, final, starts):
        self.grid = np.ascontiguousarray(grid, dtype=np.float64)
        self.n = self.grid.size
        self.dx = np.diff(self.grid)
        self.bp_grid = np.asarray(bp_grid, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self.slopes_after = np.asarray(slopes_after, dtype=np.float64)
        self.initial = np.asarray(initial, dtype=np.float64)
        self.final = np.asarray(final, dtype=np.float64)
        self.starts = np.asarray(starts, dtype=np.int64)
        self.k = self.starts.size
        self.ends = np.append(self.starts[1:], self.bp_grid.size)
        if np.any(self.ends <= self.starts):
            raise ValueError("every function needs at least one breakpoint")

        fid = np.repeat(np.arange(self.k), self.ends - self.starts)
        self.bp_fid = fid
        stride = self.n + 1
        self._bkeys = fid * stride + self.bp_grid
        before = np.empty_like(self.slopes_after)
        before[1:] = self.slopes_after[:-1]
        before[self.starts] = self.initial
        self.slope_deltas = self.slopes_after - before

        rising = (self.slopes_after > 0).astype(np.int64)
        # first breakpoint with a positive right slope, or the last one
        first_rise = np.minimum.reduceat(np.where(rising == 1, np.arange(fid.size), fid.size), self.starts)
        self.argmin_pos = np.where(first_rise < self.ends, first_rise, self.ends - 1)
        self.argmin_grid = self.bp_grid[self.argmin_pos]

        bp = self.grid[self.bp_grid]
        kf, kx, kat, kright, tail = dagger_knots(
            bp, self.values, self.slopes_after, self.starts, self.ends,
            self.argmin_pos, self.initial, self.final)
        self.knot_x = kx
        self.knot_at = kat
        self.knot_right = kright
        self.knot_start = np.searchsorted(kf, np.arange(self.k), side="left")
        self.tail_slope = tail
        by_x = np.argsort(kx, kind="stable")
        kg = np.empty(kx.size, dtype=np.int64)
        kg[by_x] = np.searchsorted(self.grid, kx[by_x], side="left")
        self._kkeys = kf * stride + kg

    # construction -----------------------------------------------------------

    @classmethod
    def from_functions(cls, functions: Sequence[PiecewiseLinearFn], grid=None) -> "FunctionTable":
        if not functions:
            raise ValueError("no functions")
        if any(f.size == 0 for f in functions):
            raise ValueError("every function needs at least one breakpoint")
        if grid is None:
            grid = np.unique(np.concatenate([f.breakpoints for f in functions]))
        grid = np.asarray(grid, dtype=np.float64)
        bps = np.concatenate([f.breakpoints for f in functions])
        bp_grid = np.searchsorted(grid, bps)
        if np.any(bp_grid >= grid.size) or np.any(grid[np.minimum(bp_grid, grid.size - 1)] != bps):
            raise ValueError("function breakpoint missing from grid")
        sizes = np.array([f.size for f in functions])
        starts = np.cumsum(sizes) - sizes
        return cls(grid, bp_grid,
                   np.concatenate([f.values for f in functions]),
                   np.concatenate([f.slopes[1:] for f in functions]),
                   [f.initial_slope for f in functions],
                   [f.final_slope for f in functions],
                   starts)

    @classmethod
    def from_groups(cls, values, codes, k: int) -> "FunctionTable":
        """Absolute-deviation sums ``x -> sum |y - x|`` of each group, vectorised.

        ``codes`` are dense group ids in ``range(k)``; each must occur.
        """
        values = np.asarray(values, dtype=np.float64)
        codes = np.asarray(codes, dtype=np.int64)
        order = np.lexsort((values, codes))
        v, c = values[order], codes[order]
        new = np.ones(v.size, dtype=bool)
        new[1:] = (v[1:] != v[:-1]) | (c[1:] != c[:-1])
        first = np.flatnonzero(new)
        u = v[first]
        uc = c[first]
        cnt = np.diff(np.append(first, v.size)).astype(np.float64)
        starts = np.searchsorted(uc, np.arange(k), side="left")
        ends = np.append(starts[1:], u.size)
        if np.any(ends <= starts):
            raise ValueError("empty group")
        n_group = np.add.reduceat(cnt, starts)
        # per-group prefix sums, centred on each group's lower median
        c_incl = np.cumsum(cnt)
        base = np.repeat(c_incl[starts] - cnt[starts], ends - starts)
        c_incl_g = c_incl - base
        rank = (n_group - 1) // 2 + 1
        med_pos = np.searchsorted(c_incl - base + uc * (c_incl[-1] + 1),
                                  rank + np.arange(k) * (c_incl[-1] + 1))
        w = u - np.repeat(u[med_pos], ends - starts)
        s_incl = np.cumsum(cnt * w)
        s_base = np.repeat(s_incl[starts] - (cnt * w)[starts], ends - starts)
        s_incl_g = s_incl - s_base
        tot = np.repeat(s_incl_g[ends - 1], ends - starts)
        n_rep = np.repeat(n_group, ends - starts)
        c_before = c_incl_g - cnt
        s_before = s_incl_g - cnt * w
        vals = (w * c_before - s_before) + (tot - s_incl_g) - w * (n_rep - c_incl_g)
        slopes_after = 2.0 * c_incl_g - n_rep
        grid, bp_grid = np.unique(u, return_inverse=True)
        return cls(grid, bp_grid, np.maximum(vals, 0.0), slopes_after, -n_group, n_group, starts)

    def function(self, i: int) -> PiecewiseLinearFn:
        s, e = self.starts[i], self.ends[i]
        slopes = np.concatenate([[self.initial[i]], self.slopes_after[s:e]])
        return PiecewiseLinearFn._from_parts(self.grid[self.bp_grid[s:e]], self.values[s:e].copy(), slopes)

    # queries ------------------------------------------------------------------

    def eval(self, fids: np.ndarray, g):
        """Values and right slopes of functions ``fids`` at grid indices ``g``."""
        keys = fids * (self.n + 1) + g
        pos = np.searchsorted(self._bkeys, keys, side="right") - 1
        first = self.starts[fids]
        before = pos < first
        anchor = np.where(before, first, pos)
        slope = np.where(before, self.initial[fids], self.slopes_after[anchor])
        x = self.grid[g]
        val = self.values[anchor] + slope * (x - self.grid[self.bp_grid[anchor]])
        return val, slope

    def dagger_index(self, fids: np.ndarray, a: int) -> np.ndarray:
        """Last grid index ``j`` with ``f(x_j) <= f(x_a)``; ``-1`` once ``x_a`` is past the minimum."""
        x = self.grid[a]
        pos = np.searchsorted(self._kkeys, fids * (self.n + 1) + a, side="right") - 1
        first = self.knot_start[fids]
        left = pos < first
        p = np.where(left, first, pos)
        pn = np.minimum(p + 1, self.knot_x.size - 1)
        kx, kat, kright = self.knot_x, self.knot_at, self.knot_right
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(kx[pn] > kx[p], (x - kx[p]) / (kx[pn] - kx[p]), 0.0)
            inner = np.where(np.isinf(kright[p]), np.inf, kright[p] + w * (kat[pn] - kright[p]))
            tail = np.where(np.isinf(kat[p]), np.inf, kat[p] + self.tail_slope[fids] * (x - kx[p]))
        d = np.where(left, tail, np.where(kx[p] == x, kat[p], inner))
        q = np.searchsorted(self.grid, d, side="right") - 1
        return np.where(a > self.argmin_grid[fids], -1, q)

    def breakpoint_positions(self, fids: np.ndarray, lo, hi) -> np.ndarray:
        """Flat positions of the breakpoints of ``fids`` with grid index in ``[lo, hi]``."""
        base = fids * (self.n + 1)
        s = np.searchsorted(self._bkeys, base + lo, side="left")
        e = np.searchsorted(self._bkeys, base + hi, side="right")
        return _ranges(s, e - s)

    def _profile(self, delta: np.ndarray, jump, lo: int, hi: int) -> np.ndarray:
        """Offsets from the value at ``lo``: slopes from ``cumsum(delta)``, plus step ``jump``s."""
        m = hi - lo + 1
        out = np.empty(m)
        out[0] = 0.0
        if m > 1:
            incr = np.cumsum(delta[:-1])
            incr *= self.dx[lo:hi]
            if jump is not None:
                incr += jump[1:]
            np.cumsum(incr, out=out[1:])
        return out

    def dense_sum(self, fids: np.ndarray, lo: int, hi: int) -> np.ndarray:
        """``sum(f_i(x_j) for i in fids)`` for every grid index ``j`` in ``[lo, hi]``."""
        m = hi - lo + 1
        if fids.size == 0:
            return np.zeros(m)
        v0, s0 = self.eval(fids, lo)
        pos = self.breakpoint_positions(fids, lo + 1, hi)
        delta = _bincount(self.bp_grid[pos] - lo, self.slope_deltas[pos], minlength=m)
        delta[0] += s0.sum()
        out = self._profile(delta, None, lo, hi)
        out += v0.sum()
        return out

    def row_profile(self, fids: np.ndarray, a: int, lo: int, hi: int):
        """``(offset, base)`` with ``base + offset[j - lo]`` equal to the row values below."""
        m = hi - lo + 1
        if fids.size == 0:
            return np.zeros(m), 0.0
        q = self.dagger_index(fids, a)
        gone = q < lo
        live = ~gone
        act = fids[live]
        qa = np.minimum(q[live], hi)
        cut = qa < hi
        qc = qa[cut]
        # one lookup: every function at a, live ones at lo, cut ones at their dagger index
        na, nl = fids.size, act.size
        vals, slopes = self.eval(np.concatenate([fids, act, act[cut]]),
                                 np.concatenate([np.full(na, a), np.full(nl, lo), qc]))
        fa_all = vals[:na]
        const = float(fa_all[gone].sum())
        if nl == 0:
            return np.zeros(m), const
        fa = fa_all[live]
        vals, slopes = vals[na:], slopes[na:]
        pos = self.breakpoint_positions(act, lo + 1, qa)
        # slope changes inside the kept ranges, minus the slope each cut function carries on
        delta = _bincount(np.concatenate([self.bp_grid[pos] - lo, qc - lo]),
                          np.concatenate([self.slope_deltas[pos], -slopes[act.size:]]),
                          minlength=m)
        delta[0] += slopes[:act.size].sum()
        jump = None
        if qc.size:
            jump = _bincount(qc + 1 - lo, fa[cut] - vals[act.size:], minlength=m)
        return self._profile(delta, jump, lo, hi), float(vals[:act.size].sum()) + const

    def row_values(self, fids: np.ndarray, a: int, lo: int, hi: int) -> np.ndarray:
        """``sum(min(f_i(x_a), f_i(x_j)) for i in fids)`` for ``j`` in ``[lo, hi]``, ``lo >= a``.

        Function ``i`` contributes ``f_i(x_j)`` while ``j`` is at most its
        dagger index and the constant ``f_i(x_a)`` afterwards.
        """
        offset, base = self.row_profile(fids, a, lo, hi)
        offset += base
        return offset
