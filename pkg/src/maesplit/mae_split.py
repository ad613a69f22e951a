"""Exact binary MAE split of a categorical feature.

Each category ``i`` with targets ``Y_i`` becomes the convex cost
``f_i(x) = sum |y - x|``. The best split equals the best pair of centres
``a <= b`` with every category assigned to the cheaper one, which is a
unimodal-cost 2-median instance over the grid of distinct target values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, Optional, Sequence, Tuple

import numpy as np

from .packed import FunctionTable
from .pwl_core import mae, median
from .uc2m_solver import SolveStats, Uc2mProblem, unimodal_2median

__all__ = [
    "Instance",
    "SplitResult",
    "group_by_category",
    "binary_mae_split",
    "recover_partition",
    "split_cost",
]


def _sorted_ids(ids: Iterable[Hashable]) -> list:
    ids = list(ids)
    try:
        return sorted(ids)
    except TypeError:
        return sorted(ids, key=repr)


@dataclass(frozen=True)
class Instance:
    """Target values grouped by category; categories are kept in sorted order."""

    groups: Dict[Hashable, np.ndarray]

    def __post_init__(self):
        clean = {}
        for cat in _sorted_ids(self.groups):
            y = np.array(self.groups[cat], dtype=np.float64).ravel()
            if y.size == 0:
                raise ValueError(f"category {cat!r} has no values")
            if not np.all(np.isfinite(y)):
                raise ValueError(f"category {cat!r} has non-finite values")
            y.setflags(write=False)
            clean[cat] = y
        object.__setattr__(self, "groups", clean)

    @classmethod
    def from_arrays(cls, values, categories) -> "Instance":
        values = np.asarray(values, dtype=np.float64).ravel()
        categories = np.asarray(categories).ravel()
        if values.size != categories.size:
            raise ValueError("values and categories differ in length")
        uniq, codes = np.unique(categories, return_inverse=True)
        order = np.argsort(codes, kind="stable")
        bounds = np.searchsorted(codes[order], np.arange(uniq.size + 1))
        sv = values[order]
        return cls({u.item() if hasattr(u, "item") else u: sv[bounds[i]:bounds[i + 1]]
                    for i, u in enumerate(uniq)})

    @property
    def categories(self) -> Tuple[Hashable, ...]:
        return tuple(self.groups)

    @property
    def k(self) -> int:
        return len(self.groups)

    @property
    def n(self) -> int:
        return sum(y.size for y in self.groups.values())

    def flat(self) -> Tuple[np.ndarray, np.ndarray]:
        """All values and their dense category codes (``0..k-1`` in category order)."""
        ys = list(self.groups.values())
        codes = np.repeat(np.arange(len(ys)), [y.size for y in ys])
        return np.concatenate(ys), codes

    def union(self, cats: Iterable[Hashable]) -> np.ndarray:
        return np.concatenate([self.groups[c] for c in cats])


@dataclass(frozen=True)
class SplitResult:
    lam: float
    left: Tuple[Hashable, ...]
    right: Tuple[Hashable, ...]
    center_a: float
    center_b: float
    method: str
    unique: Optional[bool] = None
    evaluation_count: int = 0


def group_by_category(samples: Sequence[Tuple[float, Hashable]]) -> Instance:
    samples = list(samples)
    if not samples:
        raise ValueError("no samples")
    groups: Dict[Hashable, list] = {}
    for value, cat in samples:
        groups.setdefault(cat, []).append(value)
    return Instance(groups)


def _side(instance: Instance, subset) -> Tuple[tuple, tuple]:
    cats = instance.categories
    chosen = set(subset)
    unknown = chosen - set(cats)
    if unknown:
        raise ValueError(f"unknown categories {sorted(map(repr, unknown))}")
    if not chosen or len(chosen) == len(cats):
        raise ValueError("subset must be a nonempty proper subset of the categories")
    left = tuple(c for c in cats if c in chosen)
    right = tuple(c for c in cats if c not in chosen)
    return left, right


def split_cost(instance: Instance, subset) -> float:
    """``mae(union of subset) + mae(union of the rest)``."""
    left, right = _side(instance, subset)
    return mae(instance.union(left)) + mae(instance.union(right))


def _costs_at(instance: Instance, x: float) -> np.ndarray:
    y, codes = instance.flat()
    return np.bincount(codes, np.abs(y - x), minlength=instance.k)


def recover_partition(instance: Instance, a: float, b: float) -> Tuple[tuple, tuple]:
    """Assign each category to the cheaper centre, ``a`` on ties.

    If that leaves one side empty, the category that gains most from its own
    median is moved across; the cost never exceeds the one-sided assignment.
    """
    if a > b:
        raise ValueError("centres must satisfy a <= b")
    if instance.k < 2:
        raise ValueError("no split exists with fewer than two categories")
    cats = instance.categories
    fa, fb = _costs_at(instance, a), _costs_at(instance, b)
    to_left = fa <= fb
    if to_left.all() or not to_left.any():
        at_centre = fa if to_left.all() else fb
        own = np.array([mae(instance.groups[c]) for c in cats])
        gain = at_centre - own
        # ties go to the last category so the first one keeps the centre side
        j = len(cats) - 1 - int(np.argmax(gain[::-1]))
        to_left = np.full(len(cats), bool(to_left.all()))
        to_left[j] = not to_left[j]
    left = tuple(c for c, s in zip(cats, to_left) if s)
    right = tuple(c for c, s in zip(cats, to_left) if not s)
    return left, right


def _result(instance: Instance, left, right, method: str, **extra) -> SplitResult:
    lu, ru = instance.union(left), instance.union(right)
    return SplitResult(mae(lu) + mae(ru), tuple(left), tuple(right),
                       median(lu), median(ru), method, **extra)


def binary_mae_split(instance: Instance, *, engine: str = "vector",
                     stats: Optional[SolveStats] = None) -> SplitResult:
    """Optimal two-way grouping of the categories under the MAE criterion."""
    if instance.k < 2:
        raise ValueError("no split exists with fewer than two categories")
    y, codes = instance.flat()
    table = FunctionTable.from_groups(y, codes, instance.k)
    stats = stats if stats is not None else SolveStats()
    sol = unimodal_2median(Uc2mProblem.from_table(table), engine=engine, stats=stats)
    left, right = recover_partition(instance, table.grid[sol.a], table.grid[sol.b])
    # the side holding the first category is reported as left
    if instance.categories[0] in right:
        left, right = right, left
    return _result(instance, left, right, "exact", evaluation_count=stats.evaluations)
