"""Running value of a dynamic sum of piecewise-linear functions along a grid.

The evaluator keeps ``f_A(x_a)`` for an active set ``A`` while the grid index
``a`` only moves forward. Value and right slope are carried as accumulators;
slope changes of the active functions are pre-registered per grid position so
that ``next`` is constant time.
"""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np

from .pwl_core import FnView, PiecewiseLinearFn, evaluate

__all__ = ["SweepEvaluator", "initialize"]

Fn = Union[PiecewiseLinearFn, FnView]


class SweepEvaluator:
    """Maintain ``sum(f_i(x_a) for i in A)`` under add/remove and forward moves.

    ``work`` counts elementary steps (one per ``next``, one per binary-search
    level, one per slope delta registered or withdrawn), so tests can bound
    the cost of a sweep without timing it.
    """

    def __init__(self, functions: Sequence[Fn], grid):
        grid = np.asarray(grid, dtype=np.float64).ravel()
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        self.functions = list(functions)
        self.grid = grid
        self.a = -1
        self.active = [False] * len(self.functions)
        self.acc_value = 0.0
        self.acc_slope = 0.0
        self.slope_deltas = np.zeros(grid.size)
        self.work = 0
        self._pos = []
        self._ds = []
        for f in self.functions:
            bps = f.breakpoints
            if isinstance(f, FnView):
                ds = f.slope_deltas
            else:
                ds = f.slopes[1:] - f.slopes[:-1]
            pos = np.searchsorted(grid, bps)
            if bps.size and (np.any(pos >= grid.size) or np.any(grid[np.minimum(pos, grid.size - 1)] != bps)):
                raise ValueError("function breakpoint missing from grid")
            self._pos.append(pos)
            self._ds.append(np.asarray(ds, dtype=np.float64))
            self.work += 1
        self.work += grid.size

    def __len__(self) -> int:
        return len(self.functions)

    def _lookup_cost(self, i: int) -> int:
        return 1 + int(math.log2(self.functions[i].breakpoints.size + 1))

    def _point(self, i: int):
        """Value and slope contribution of function ``i`` at the current position."""
        f = self.functions[i]
        if self.a < 0:
            if self.grid.size == 0:
                return 0.0, 0.0
            x = self.grid[0]
            # slope left of x_0; the delta registered at position 0 lifts it on entry
            fn = f.fn if isinstance(f, FnView) else f
            left = float(fn.slopes[np.searchsorted(fn.breakpoints, x, side="left")])
            return float(evaluate(f, x)), left
        x = self.grid[self.a]
        return float(evaluate(f, x)), f.right_slope(x)

    def _register(self, i: int, sign: float) -> None:
        pos, ds = self._pos[i], self._ds[i]
        start = int(np.searchsorted(pos, self.a, side="right"))
        self.slope_deltas[pos[start:]] += sign * ds[start:]
        self.work += pos.size - start

    def add(self, i: int) -> None:
        if self.active[i]:
            raise ValueError(f"function {i} is already active")
        self.active[i] = True
        value, slope = self._point(i)
        self.acc_value += value
        self.acc_slope += slope
        self._register(i, 1.0)
        self.work += self._lookup_cost(i)

    def remove(self, i: int) -> None:
        if not self.active[i]:
            raise ValueError(f"function {i} is not active")
        self.active[i] = False
        value, slope = self._point(i)
        self.acc_value -= value
        self.acc_slope -= slope
        self._register(i, -1.0)
        self.work += self._lookup_cost(i)

    def next(self) -> None:
        if self.a + 1 >= self.grid.size:
            raise IndexError("cannot advance past the last grid point")
        if self.a >= 0:
            self.acc_value += self.acc_slope * (self.grid[self.a + 1] - self.grid[self.a])
        self.a += 1
        self.acc_slope += self.slope_deltas[self.a]
        self.work += 1

    def evaluate(self) -> float:
        if self.a < 0:
            if any(self.active):
                raise RuntimeError("evaluate() before the first next() with a nonempty active set")
            return 0.0
        return self.acc_value


def initialize(functions: Sequence[Fn], grid) -> SweepEvaluator:
    return SweepEvaluator(functions, grid)
