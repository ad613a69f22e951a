"""Piecewise-linear unimodal functions.

A function is stored as its sorted breakpoints, the values at those
breakpoints and the full slope sequence ``[initial, s_1, ..., s_{m-1}, final]``.
Functions are immutable once built; every array is flagged read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "PiecewiseLinearFn",
    "DaggerFn",
    "FnView",
    "build_abs_sum",
    "evaluate",
    "evaluate_at_index",
    "sum_functions",
    "dagger",
    "dagger_eval",
    "median",
    "mae",
    "restrict",
]

_SLOPE_SNAP = 1e-12


def _frozen(arr) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.flags.writeable = False
    return out


def _check_unimodal(slopes: np.ndarray) -> None:
    if slopes[0] > 0 or slopes[-1] < 0:
        raise ValueError("function is unbounded below (needs initial <= 0 <= final slope)")
    pos = np.flatnonzero(slopes > 0)
    if pos.size and np.any(slopes[pos[0]:] < 0):
        raise ValueError("slope sequence is not unimodal")


class PiecewiseLinearFn:
    """Continuous piecewise-linear function that is nonincreasing then nondecreasing.

    ``argmin_index`` is the rightmost minimizing breakpoint: the first breakpoint
    whose right slope is positive (or the last breakpoint for a flat tail).
    """

    __slots__ = ("breakpoints", "values", "slopes", "argmin_index", "_dagger")

    def __init__(self, breakpoints, values, initial_slope: float, final_slope: float):
        bp = np.asarray(breakpoints, dtype=np.float64).ravel()
        val = np.asarray(values, dtype=np.float64).ravel()
        if bp.shape != val.shape:
            raise ValueError("breakpoints and values differ in length")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(val))):
            raise ValueError("invalid sample: non-finite breakpoint or value")
        if not (np.isfinite(initial_slope) and np.isfinite(final_slope)):
            raise ValueError("slopes must be finite")
        order = np.argsort(bp, kind="stable")
        bp, val = bp[order], val[order]
        if bp.size > 1:
            dup = np.flatnonzero(np.diff(bp) == 0)
            if dup.size:
                if np.any(val[dup] != val[dup + 1]):
                    raise ValueError("duplicate breakpoint with conflicting values")
                keep = np.ones(bp.size, dtype=bool)
                keep[dup + 1] = False
                bp, val = bp[keep], val[keep]
        inner = np.diff(val) / np.diff(bp) if bp.size > 1 else np.empty(0)
        slopes = np.concatenate([[initial_slope], inner, [final_slope]])
        scale = max(1.0, float(np.max(np.abs(slopes))))
        slopes[np.abs(slopes) <= _SLOPE_SNAP * scale] = 0.0
        self._setup(bp, val, slopes)

    @classmethod
    def _from_parts(cls, bp: np.ndarray, val: np.ndarray, slopes: np.ndarray) -> "PiecewiseLinearFn":
        self = cls.__new__(cls)
        self._setup(bp, val, slopes)
        return self

    def _setup(self, bp, val, slopes) -> None:
        if bp.size == 0:
            if np.any(slopes != 0):
                raise ValueError("a function without breakpoints must be constant zero")
        else:
            _check_unimodal(slopes)
        self.breakpoints = _frozen(bp)
        self.values = _frozen(val)
        self.slopes = _frozen(slopes)
        if bp.size:
            rising = np.flatnonzero(slopes[1:] > 0)
            self.argmin_index = int(rising[0]) if rising.size else bp.size - 1
        else:
            self.argmin_index = -1
        self._dagger = None

    @property
    def initial_slope(self) -> float:
        return float(self.slopes[0])

    @property
    def final_slope(self) -> float:
        return float(self.slopes[-1])

    @property
    def size(self) -> int:
        return int(self.breakpoints.size)

    def slope_after(self, i: int) -> float:
        return float(self.slopes[i + 1])

    def right_slope(self, x: float) -> float:
        """Slope on the segment immediately right of ``x``."""
        return float(self.slopes[np.searchsorted(self.breakpoints, x, side="right")])

    def is_convex(self) -> bool:
        return bool(np.all(np.diff(self.slopes) >= 0))

    def __call__(self, x):
        return evaluate(self, x)

    def __repr__(self) -> str:
        return (f"PiecewiseLinearFn(m={self.size}, initial={self.initial_slope:g}, "
                f"final={self.final_slope:g})")


@dataclass(frozen=True)
class FnView:
    """Breakpoint index window ``[lo_index, hi_index]`` (inclusive) of a function.

    Evaluation always agrees with the source; the window only limits which
    breakpoints are enumerated. ``hi_index == lo_index - 1`` is an empty window
    (produced internally for ranges holding no breakpoint).
    """

    fn: PiecewiseLinearFn
    lo_index: int
    hi_index: int

    @property
    def breakpoints(self) -> np.ndarray:
        return self.fn.breakpoints[self.lo_index:self.hi_index + 1]

    @property
    def values(self) -> np.ndarray:
        return self.fn.values[self.lo_index:self.hi_index + 1]

    @property
    def slope_deltas(self) -> np.ndarray:
        s = self.fn.slopes
        return s[self.lo_index + 1:self.hi_index + 2] - s[self.lo_index:self.hi_index + 1]

    @property
    def size(self) -> int:
        return self.hi_index - self.lo_index + 1

    def right_slope(self, x: float) -> float:
        return self.fn.right_slope(x)

    def __call__(self, x):
        return evaluate(self.fn, x)


AnyFn = Union[PiecewiseLinearFn, FnView]


def _as_fn(f: AnyFn) -> PiecewiseLinearFn:
    return f.fn if isinstance(f, FnView) else f


def build_abs_sum(points: Iterable[float]) -> PiecewiseLinearFn:
    """Return ``x -> sum(|y - x| for y in points)`` with duplicates merged."""
    y = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("empty group")
    if not np.all(np.isfinite(y)):
        raise ValueError("invalid sample: non-finite value")
    u, cnt = np.unique(y, return_counts=True)
    bp, val, slopes = _abs_sum_parts(u, cnt.astype(np.float64))
    return PiecewiseLinearFn._from_parts(bp, val, slopes)


def _abs_sum_parts(u: np.ndarray, cnt: np.ndarray):
    n = cnt.sum()
    c_incl = np.cumsum(cnt)
    # centring on the median keeps the prefix sums small
    w = u - u[np.searchsorted(c_incl, (n - 1) // 2 + 1)]
    c_before = c_incl - cnt
    s_incl = np.cumsum(cnt * w)
    s_before = s_incl - cnt * w
    total = s_incl[-1]
    val = (w * c_before - s_before) + (total - s_incl) - w * (n - c_incl)
    slopes = np.concatenate([[-n], 2.0 * c_incl - n])
    slopes[-1] = n
    return u, np.maximum(val, 0.0), slopes


def evaluate(f: AnyFn, x):
    """Value of ``f`` at ``x`` (scalar or array) by binary search and interpolation."""
    fn = _as_fn(f)
    xa = np.asarray(x, dtype=np.float64)
    if fn.size == 0:
        out = np.zeros_like(xa)
    else:
        bp, val, sl = fn.breakpoints, fn.values, fn.slopes
        pos = np.searchsorted(bp, xa, side="right") - 1
        anchor = np.maximum(pos, 0)
        out = val[anchor] + sl[pos + 1] * (xa - bp[anchor])
    return float(out) if out.ndim == 0 else out


def evaluate_at_index(f: AnyFn, i: int) -> float:
    fn = _as_fn(f)
    if isinstance(f, FnView):
        if not f.lo_index <= i <= f.hi_index:
            raise IndexError(f"breakpoint index {i} outside view [{f.lo_index}, {f.hi_index}]")
    elif not 0 <= i < fn.size:
        raise IndexError(f"breakpoint index {i} out of range for {fn.size} breakpoints")
    return float(fn.values[i])


def sum_functions(fs: Sequence[PiecewiseLinearFn]) -> PiecewiseLinearFn:
    """Pointwise sum. The empty sum is the zero function."""
    fs = [_as_fn(f) for f in fs]
    if not fs:
        return PiecewiseLinearFn._from_parts(np.empty(0), np.empty(0), np.zeros(1))
    parts = [f.breakpoints for f in fs if f.size]
    u = np.unique(np.concatenate(parts)) if parts else np.empty(0)
    val = np.zeros(u.size)
    right = np.zeros(u.size)
    initial = final = 0.0
    for f in fs:
        initial += f.initial_slope
        final += f.final_slope
        if f.size == 0:
            continue
        val += evaluate(f, u)
        right += f.slopes[np.searchsorted(f.breakpoints, u, side="right")]
    if u.size == 0:
        return PiecewiseLinearFn._from_parts(u, val, np.array([initial]))
    right[-1] = final
    slopes = np.concatenate([[initial], right])
    return PiecewiseLinearFn._from_parts(u, val, slopes)


def median(points: Iterable[float]) -> float:
    """Lower median: the smallest minimizer of ``sum(|x - a|)``."""
    y = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("median of an empty multiset")
    k = (y.size - 1) // 2
    return float(np.partition(y, k)[k])


def mae(points: Iterable[float]) -> float:
    """Sum of absolute deviations from the median."""
    y = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("mae of an empty multiset")
    return float(np.abs(y - median(y)).sum())


def restrict(f: AnyFn, lo_index: int, hi_index: int) -> FnView:
    fn = _as_fn(f)
    if lo_index > hi_index:
        raise ValueError(f"inverted range [{lo_index}, {hi_index}]")
    if lo_index < 0 or hi_index >= fn.size:
        raise IndexError(f"range [{lo_index}, {hi_index}] outside 0..{fn.size - 1}")
    return FnView(fn, lo_index, hi_index)


def window(f: AnyFn, x_lo: float, x_hi: float) -> FnView:
    """View holding exactly the breakpoints inside ``[x_lo, x_hi]`` (possibly none)."""
    fn = _as_fn(f)
    lo = int(np.searchsorted(fn.breakpoints, x_lo, side="left"))
    hi = int(np.searchsorted(fn.breakpoints, x_hi, side="right")) - 1
    return FnView(fn, lo, hi)


# ---------------------------------------------------------------------------
# dagger transform


def _segment_count(elem_rank, elem_seg, q_rank, q_seg, strict: bool) -> np.ndarray:
    """Per query, how many elements of its segment rank ``<= q`` (``< q`` if strict).

    Ranks are nonnegative integers; ``elem_seg`` must be sorted, ranks inside
    a segment need not be.
    """
    stride = int(max(elem_rank.max(initial=0), q_rank.max(initial=0))) + 1
    ekeys = np.sort(elem_seg * stride + elem_rank)
    qkeys = q_seg * stride + q_rank
    # sorted queries keep searchsorted cache friendly
    order = np.argsort(qkeys, kind="stable")
    out = np.empty(q_rank.size, dtype=np.int64)
    out[order] = np.searchsorted(ekeys, qkeys[order], side="left" if strict else "right")
    return out - np.searchsorted(elem_seg, q_seg, side="left")


def _reach(pos, v, bp, val, slope_after, last, final):
    """Largest x' on the rising arm with value ``v``, starting from breakpoint ``pos``."""
    out = np.empty(pos.size)
    tail = pos == last
    mid = ~tail
    p = pos[mid]
    with np.errstate(divide="ignore", invalid="ignore"):
        step = (v[mid] - val[p]) / slope_after[p]
    step = np.where(np.isfinite(step), step, 0.0)
    out[mid] = np.minimum(bp[p] + step, bp[p + 1])
    fin = final[tail]
    p = pos[tail]
    with np.errstate(divide="ignore", invalid="ignore"):
        ext = bp[p] + (v[tail] - val[p]) / fin
    out[tail] = np.where(fin > 0, ext, np.inf)
    return out


def dagger_knots(bp, val, slopes_after, starts, ends, argmin_pos, initial, final):
    """Knots of the dagger transform for many functions stored back to back.

    Function ``i`` owns positions ``starts[i]:ends[i]`` of the flat arrays and
    has its rightmost minimizer at ``argmin_pos[i]``. Returns ``(fid, x,
    d_at, d_right, tail_slope)``: per knot the owning function, its x, the
    dagger value there and the right limit of the dagger just past it (the two
    differ only where the rising arm is flat). Knots are sorted by ``(fid, x)``.
    """
    k = starts.size
    lens = ends - starts
    fid = np.repeat(np.arange(k), lens)
    pos = np.arange(bp.size)
    cp = argmin_pos[fid]
    last_of = ends - 1

    rmask = pos >= cp
    r_pos = pos[rmask]
    r_seg = fid[rmask]
    r_start = np.searchsorted(r_seg, np.arange(k), side="left")
    lmask = pos <= cp
    l_pos = pos[lmask]
    l_seg = fid[lmask]
    l_start = np.searchsorted(l_seg, np.arange(k), side="left")

    # integer ranks of the values make every level comparison exact and sort-free
    _, rv = np.unique(val, return_inverse=True)
    rv = rv.ravel()
    top = int(rv.max(initial=0))

    def reach(level_pos, owners, strict):
        cnt = _segment_count(rv[r_pos], r_seg, rv[level_pos], owners, strict)
        cnt = np.maximum(cnt, 1)
        at = r_pos[r_start[owners] + cnt - 1]
        return _reach(at, val[level_pos], bp, val, slopes_after, last_of[owners], final[owners])

    # knots at the falling-arm breakpoints
    a_owner = l_seg
    a_x = bp[l_pos]
    a_at = reach(l_pos, a_owner, strict=False)
    falling = (l_pos < cp[l_pos]) & (slopes_after[l_pos] < 0)
    a_right = a_at.copy()
    if np.any(falling):
        a_right[falling] = reach(l_pos[falling], a_owner[falling], strict=True)

    # preimages of rising-arm breakpoint levels on the falling arm
    bmask = r_pos > cp[r_pos]
    b_pos = r_pos[bmask]
    b_owner = r_seg[bmask]
    b_v = val[b_pos]
    cnt = _segment_count(top - rv[l_pos], l_seg, top - rv[b_pos], b_owner, strict=False)
    b_x = np.full(b_pos.size, np.nan)
    ray = cnt == 0
    init = initial[b_owner]
    ok_ray = ray & (init < 0)
    s = starts[b_owner]
    with np.errstate(divide="ignore", invalid="ignore"):
        b_x[ok_ray] = bp[s[ok_ray]] + (b_v[ok_ray] - val[s[ok_ray]]) / init[ok_ray]
    inner = ~ray
    t = l_pos[l_start[b_owner[inner]] + cnt[inner] - 1]
    on_seg = (val[t] != b_v[inner]) & (t < cp[t])
    tt = t[on_seg]
    xs = bp[tt] + (b_v[inner][on_seg] - val[tt]) / slopes_after[tt]
    xs = np.clip(xs, bp[tt], bp[tt + 1])
    idx_inner = np.flatnonzero(inner)[on_seg]
    b_x[idx_inner] = xs
    keep = ~np.isnan(b_x)
    b_owner, b_x, b_pos = b_owner[keep], b_x[keep], b_pos[keep]
    b_at = reach(b_pos, b_owner, strict=False)
    b_right = reach(b_pos, b_owner, strict=True)

    kf = np.concatenate([a_owner, b_owner])
    kx = np.concatenate([a_x, b_x])
    kat = np.concatenate([a_at, b_at])
    kright = np.concatenate([a_right, b_right])
    order = np.lexsort((kx, kf))
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(initial < 0, initial / np.where(final > 0, final, 1.0), 0.0)
    return kf[order], kx[order], kat[order], kright[order], tail


class DaggerFn:
    """``x -> max{x' : f(x') <= f(x)}`` for ``x <= c``; ``-inf`` right of ``c``.

    ``+inf`` is returned where ``f`` never climbs back above ``f(x)`` (flat tail).
    """

    __slots__ = ("source", "breakpoints", "values", "right_limits", "tail_slope", "c")

    def __init__(self, f: PiecewiseLinearFn):
        if f.size == 0:
            raise ValueError("dagger of a function without breakpoints")
        m = f.size
        _, kx, kat, kright, tail = dagger_knots(
            f.breakpoints, f.values, f.slopes[1:],
            np.array([0]), np.array([m]), np.array([f.argmin_index]),
            np.array([f.initial_slope]), np.array([f.final_slope]))
        self.source = f
        self.breakpoints = _frozen(kx)
        self.values = _frozen(kat)
        self.right_limits = _frozen(kright)
        self.tail_slope = float(tail[0])
        self.c = float(f.breakpoints[f.argmin_index])

    def __call__(self, x):
        xa = np.asarray(x, dtype=np.float64)
        kx, kat, kright = self.breakpoints, self.values, self.right_limits
        j = np.searchsorted(kx, xa, side="right") - 1
        jc = np.clip(j, 0, kx.size - 1)
        jn = np.clip(j + 1, 0, kx.size - 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(kx[jn] > kx[jc], (xa - kx[jc]) / (kx[jn] - kx[jc]), 0.0)
            inner = kright[jc] + w * (kat[jn] - kright[jc])
            inner = np.where(np.isinf(kright[jc]), np.inf, inner)
            left = np.where(np.isinf(kat[0]), np.inf, kat[0] + self.tail_slope * (xa - kx[0]))
        out = np.where(j < 0, left, np.where(kx[jc] == xa, kat[jc], inner))
        out = np.where(xa > self.c, -np.inf, out)
        return float(out) if out.ndim == 0 else out

    def __repr__(self) -> str:
        return f"DaggerFn(c={self.c:g}, knots={self.breakpoints.size})"


def dagger(f: PiecewiseLinearFn) -> DaggerFn:
    """Dagger transform of ``f``, cached on the function."""
    f = _as_fn(f)
    if f._dagger is None:
        f._dagger = DaggerFn(f)
    return f._dagger


def dagger_eval(d: DaggerFn, x):
    return d(x)
