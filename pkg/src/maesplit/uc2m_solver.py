"""Unimodal-cost 2-median: minimise ``g(a, b) = sum_i min(f_i(a), f_i(b))``.

Candidate centres are the grid of all breakpoints. Restricted to ``a <= b``
the matrix ``M[a, b] = g(x_a, x_b)`` has nondecreasing row-minimum columns,
so the search solves the middle row, then recurses on the upper-left and
lower-right blocks. Functions whose side is already decided at the split are
folded into two dense aggregates: one indexed by row, one by column.

Two row kernels are available. ``"vector"`` computes a whole row with numpy
in one pass; ``"sweep"`` walks the columns with :class:`SweepEvaluator`,
retiring functions in order of their dagger value. They agree up to
rounding, and the sweep kernel is mainly a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np

from .packed import FunctionTable
from .pwl_core import DaggerFn, PiecewiseLinearFn, dagger, evaluate, window
from .sweep_eval import SweepEvaluator

__all__ = [
    "Uc2mProblem",
    "Uc2mSolution",
    "RowResult",
    "RecursionContext",
    "SolveStats",
    "row_minima",
    "optimum",
    "unimodal_2median",
    "naive_grid_min",
    "row_min_indices",
]


class Uc2mSolution(NamedTuple):
    value: float
    a: int
    b: int


class RowResult(NamedTuple):
    a: int
    b: int
    value: float


@dataclass
class SolveStats:
    evaluations: int = 0
    nodes: int = 0
    row_scans: int = 0
    aggregate_blocks: int = 0
    direct_blocks: int = 0
    max_depth: int = 0


class Uc2mProblem:
    """Unimodal functions together with their shared breakpoint grid."""

    def __init__(self, functions: Sequence[PiecewiseLinearFn] = None, *, table: FunctionTable = None):
        if table is None:
            functions = list(functions or [])
            if not functions:
                raise ValueError("UC2M needs at least one function")
            table = FunctionTable.from_functions(functions)
            self._functions = functions
        else:
            self._functions = None
        self.table = table
        self._daggers = None

    @classmethod
    def from_table(cls, table: FunctionTable) -> "Uc2mProblem":
        return cls(table=table)

    @property
    def grid(self) -> np.ndarray:
        return self.table.grid

    @property
    def n(self) -> int:
        return self.table.n

    @property
    def k(self) -> int:
        return self.table.k

    @property
    def functions(self) -> List[PiecewiseLinearFn]:
        if self._functions is None:
            self._functions = [self.table.function(i) for i in range(self.k)]
        return self._functions

    @property
    def daggers(self) -> List[DaggerFn]:
        if self._daggers is None:
            self._daggers = [dagger(f) for f in self.functions]
        return self._daggers

    def g(self, a: int, b: int) -> float:
        """Objective at grid indices ``(a, b)``, straight from the function objects."""
        xa, xb = self.grid[a], self.grid[b]
        return float(sum(min(evaluate(f, xa), evaluate(f, xb)) for f in self.functions))


@dataclass
class RecursionContext:
    """One block ``[a_min, a_max] x [b_min, b_max]`` of the search.

    ``aggregate_row[a - a_min]`` and ``aggregate_col[b - b_min]`` hold the folded
    contributions of functions that are no longer live in this block.
    """

    problem: Uc2mProblem
    a_min: int
    a_max: int
    b_min: int
    b_max: int
    live: np.ndarray
    aggregate_row: np.ndarray
    aggregate_col: np.ndarray
    stats: SolveStats = field(default_factory=SolveStats)
    depth: int = 0

    @classmethod
    def root(cls, problem: Uc2mProblem, stats: Optional[SolveStats] = None) -> "RecursionContext":
        n = problem.n
        return cls(problem, 0, n - 1, 0, n - 1, np.arange(problem.k),
                   np.zeros(n), np.zeros(n), stats or SolveStats())


def _row_vector(ctx: RecursionContext, a: int, lo: int) -> RowResult:
    offset, base = ctx.problem.table.row_profile(ctx.live, a, lo, ctx.b_max)
    offset += ctx.aggregate_col[lo - ctx.b_min:]
    j = int(np.argmin(offset))
    return RowResult(a, lo + j, float(offset[j] + base + ctx.aggregate_row[a - ctx.a_min]))


def _row_sweep(ctx: RecursionContext, a: int, lo: int) -> RowResult:
    problem = ctx.problem
    grid = problem.grid
    hi = ctx.b_max
    xa = grid[a]
    fns = [problem.functions[i] for i in ctx.live]
    dag = [float(problem.daggers[i](xa)) for i in ctx.live]
    at_a = [evaluate(f, xa) for f in fns]
    ev = SweepEvaluator([window(f, grid[lo], grid[hi]) for f in fns], grid[lo:hi + 1])
    order = sorted(range(len(fns)), key=dag.__getitem__)
    for t in range(len(fns)):
        ev.add(t)
    base = ctx.aggregate_row[a - ctx.a_min]
    outside = 0.0
    p = 0
    best, best_j = np.inf, lo
    for j in range(lo, hi + 1):
        ev.next()
        while p < len(order) and dag[order[p]] < grid[j]:
            ev.remove(order[p])
            outside += at_a[order[p]]
            p += 1
        v = base + ctx.aggregate_col[j - ctx.b_min] + outside + ev.evaluate()
        if v < best:
            best, best_j = v, j
    return RowResult(a, best_j, float(best))


_ROW_KERNELS = {"vector": _row_vector, "sweep": _row_sweep}

# blocks with this many live functions or fewer skip further splitting
DIRECT_LIVE = 3


def row_minima(ctx: RecursionContext, a: int, engine: str = "vector") -> RowResult:
    """Smallest ``g(x_a, x_b)`` over the block's columns ``b >= a`` (leftmost on ties)."""
    if not ctx.a_min <= a <= ctx.a_max:
        raise ValueError(f"row {a} outside [{ctx.a_min}, {ctx.a_max}]")
    lo = max(ctx.b_min, a)
    if lo > ctx.b_max:
        raise ValueError("empty column range")
    ctx.stats.evaluations += ctx.b_max - lo + 1
    ctx.stats.row_scans += 1
    return _ROW_KERNELS[engine](ctx, a, lo)


def _separable_min(ctx: RecursionContext, rows: np.ndarray, cols: np.ndarray) -> Uc2mSolution:
    """Minimum of ``rows[a - a_min] + cols[b - b_min]`` over ``a <= b`` in the block."""
    lo = max(ctx.b_min, ctx.a_min)
    bs = np.arange(lo, ctx.b_max + 1)
    ridx = np.minimum(bs, ctx.a_max) - ctx.a_min
    total = np.minimum.accumulate(rows)[ridx] + cols[lo - ctx.b_min:]
    j = int(np.argmin(total))
    i = int(np.argmin(rows[:ridx[j] + 1]))
    ctx.stats.evaluations += rows.size + bs.size
    return Uc2mSolution(float(total[j]), ctx.a_min + i, int(bs[j]))


def _aggregate_block(ctx: RecursionContext) -> Uc2mSolution:
    ctx.stats.aggregate_blocks += 1
    return _separable_min(ctx, ctx.aggregate_row, ctx.aggregate_col)


def _direct_block(ctx: RecursionContext) -> Uc2mSolution:
    """Solve a block with few live functions by trying each side for each of them.

    ``min(f(a), f(b))`` is the smaller of the two one-sided choices, so the
    block minimum is the best separable minimum over all ``2^L`` assignments.
    """
    table = ctx.problem.table
    live = ctx.live
    on_rows = [table.dense_sum(live[t:t + 1], ctx.a_min, ctx.a_max) for t in range(live.size)]
    on_cols = [table.dense_sum(live[t:t + 1], ctx.b_min, ctx.b_max) for t in range(live.size)]
    ctx.stats.direct_blocks += 1
    best = None
    for mask in range(1 << live.size):
        rows = ctx.aggregate_row.copy()
        cols = ctx.aggregate_col.copy()
        for t in range(live.size):
            if mask >> t & 1:
                rows += on_rows[t]
            else:
                cols += on_cols[t]
        cand = _separable_min(ctx, rows, cols)
        if best is None or cand < best:
            best = cand
    return best


def _split_live(ctx: RecursionContext, a: int, b: int):
    """Partition live functions into those cheaper at row ``a`` and those cheaper at column ``b``.

    Ties go to the row side only when ``x_b`` is at or past the function's
    rightmost minimiser, which keeps the fold exact for unimodal functions
    with plateaus.
    """
    table = ctx.problem.table
    L = ctx.live.size
    v, _ = table.eval(np.concatenate([ctx.live, ctx.live]),
                      np.concatenate([np.full(L, a), np.full(L, b)]))
    fa, fb = v[:L], v[L:]
    row_side = (fa < fb) | ((fa == fb) & (b >= table.argmin_grid[ctx.live]))
    return ctx.live[row_side], ctx.live[~row_side]


def optimum(ctx: RecursionContext, engine: str = "vector",
            observer: Optional[Callable[[RecursionContext], None]] = None,
            direct_live: int = 0) -> Uc2mSolution:
    """Minimum over the block; blocks with at most ``direct_live`` live functions are solved directly."""
    stats = ctx.stats
    stats.nodes += 1
    stats.max_depth = max(stats.max_depth, ctx.depth)
    if observer is not None:
        observer(ctx)
    if ctx.live.size == 0:
        return _aggregate_block(ctx)
    if ctx.live.size <= direct_live:
        return _direct_block(ctx)

    a = (ctx.a_min + ctx.a_max) // 2
    row = row_minima(ctx, a, engine)
    b = row.b
    best = Uc2mSolution(row.value, a, b)
    if ctx.a_min == ctx.a_max:
        return best

    table = ctx.problem.table
    row_side, col_side = _split_live(ctx, a, b)
    found = [best]
    if a > ctx.a_min:
        child = RecursionContext(
            ctx.problem, ctx.a_min, a - 1, ctx.b_min, b, row_side,
            ctx.aggregate_row[:a - ctx.a_min],
            ctx.aggregate_col[:b - ctx.b_min + 1] + table.dense_sum(col_side, ctx.b_min, b),
            stats, ctx.depth + 1)
        found.append(optimum(child, engine, observer, direct_live))
    if a < ctx.a_max:
        child = RecursionContext(
            ctx.problem, a + 1, ctx.a_max, b, ctx.b_max, col_side,
            ctx.aggregate_row[a + 1 - ctx.a_min:] + table.dense_sum(row_side, a + 1, ctx.a_max),
            ctx.aggregate_col[b - ctx.b_min:],
            stats, ctx.depth + 1)
        found.append(optimum(child, engine, observer, direct_live))
    return min(found)


def unimodal_2median(problem: Uc2mProblem, *, engine: str = "vector",
                     stats: Optional[SolveStats] = None,
                     observer: Optional[Callable[[RecursionContext], None]] = None,
                     direct_live: int = DIRECT_LIVE) -> Uc2mSolution:
    """Minimum of ``g`` over grid pairs ``a <= b`` with the achieving indices.

    ``direct_live=0`` runs the plain divide and conquer down to single rows.
    """
    if problem.k == 0:
        raise ValueError("UC2M needs at least one function")
    if engine not in _ROW_KERNELS:
        raise ValueError(f"unknown engine {engine!r}")
    return optimum(RecursionContext.root(problem, stats), engine, observer, direct_live)


def _value_matrix(problem: Uc2mProblem) -> np.ndarray:
    return np.array([evaluate(f, problem.grid) for f in problem.functions])


def naive_grid_min(problem: Uc2mProblem) -> Uc2mSolution:
    """Exhaustive ``O(n^2 k)`` minimum over all grid pairs ``a <= b``."""
    F = _value_matrix(problem)
    best = None
    for a in range(problem.n):
        row = np.minimum(F[:, a:a + 1], F[:, a:]).sum(axis=0)
        j = int(np.argmin(row))
        cand = Uc2mSolution(float(row[j]), a, a + j)
        if best is None or cand.value < best.value:
            best = cand
    return best


def row_min_indices(problem: Uc2mProblem) -> List[int]:
    """Leftmost row-minimum column of ``M`` per row, with ``M[a, b] = inf`` for ``b < a``."""
    F = _value_matrix(problem)
    out = []
    for a in range(problem.n):
        row = np.minimum(F[:, a:a + 1], F[:, a:]).sum(axis=0)
        out.append(a + int(np.argmin(row)))
    return out
