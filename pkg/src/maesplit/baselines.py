"""Reference splitters and the two adversarial constructions.

``exhaustive_split`` enumerates every bipartition and is the ground truth for
small ``k``. ``median_heuristic_split`` orders categories by median and only
tries the ``k - 1`` prefix splits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Tuple

import numpy as np

from .mae_split import Instance, SplitResult, _result
from .pwl_core import median

__all__ = [
    "MAX_EXHAUSTIVE_K",
    "EncodingCounterexample",
    "exhaustive_split",
    "median_heuristic_split",
    "gen_adversarial_median",
    "gen_encoding_counterexample",
    "masked_mae",
    "DISTRIBUTIONS",
    "gen_synthetic",
]

MAX_EXHAUSTIVE_K = 20
_CHUNK_CELLS = 1 << 22


def masked_mae(sorted_values: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """MAE of ``sorted_values[mask]`` for every row of ``masks``; rows must be nonempty."""
    masks = np.atleast_2d(masks)
    cnt = masks.sum(axis=1)
    rank = (cnt - 1) // 2
    seen = np.cumsum(masks, axis=1)
    med = sorted_values[np.argmax(seen > rank[:, None], axis=1)]
    return np.where(masks, np.abs(sorted_values[None, :] - med[:, None]), 0.0).sum(axis=1)


def _partition_costs(instance: Instance, member: np.ndarray) -> np.ndarray:
    """``split_cost`` for each row of the boolean category-membership matrix."""
    y, codes = instance.flat()
    order = np.argsort(y, kind="stable")
    y, codes = y[order], codes[order]
    out = np.empty(member.shape[0])
    step = max(1, _CHUNK_CELLS // max(1, y.size))
    for s in range(0, member.shape[0], step):
        m = member[s:s + step][:, codes]
        out[s:s + step] = masked_mae(y, m) + masked_mae(y, ~m)
    return out


def _check_k(instance: Instance) -> None:
    if instance.k < 2:
        raise ValueError("no split exists with fewer than two categories")


def exhaustive_split(instance: Instance, *, max_k: int = MAX_EXHAUSTIVE_K, rel_tol: float = 1e-9) -> SplitResult:
    """Best of all ``2^(k-1) - 1`` bipartitions; ``unique`` tells whether it is strict."""
    _check_k(instance)
    k = instance.k
    if k > max_k:
        raise ValueError(f"exhaustive search over k={k} categories refused (limit {max_k}); "
                         "use the exact method instead")
    # bit 0 (first category) is always on the left
    ids = np.arange(2 ** (k - 1) - 1, dtype=np.int64)
    bits = ((ids[:, None] >> np.arange(k - 1)) & 1).astype(bool)
    member = np.concatenate([np.ones((ids.size, 1), dtype=bool), bits], axis=1)
    costs = _partition_costs(instance, member)
    best = int(np.argmin(costs))
    lo = costs[best]
    ties = int(np.count_nonzero(costs <= lo + rel_tol * max(1.0, abs(lo))))
    cats = instance.categories
    left = [c for c, on in zip(cats, member[best]) if on]
    right = [c for c, on in zip(cats, member[best]) if not on]
    return _result(instance, left, right, "exhaustive", unique=ties == 1)


def median_heuristic_split(instance: Instance) -> SplitResult:
    """Sort categories by lower median and keep the best of the ``k - 1`` prefix splits."""
    _check_k(instance)
    cats = instance.categories
    meds = [median(instance.groups[c]) for c in cats]
    order = sorted(range(len(cats)), key=lambda i: (meds[i], i))
    pos = np.empty(len(cats), dtype=np.int64)
    pos[order] = np.arange(len(cats))
    member = pos[None, :] < np.arange(1, len(cats))[:, None]
    costs = _partition_costs(instance, member)
    j = int(np.argmin(costs))
    left = [cats[i] for i in order[:j + 1]]
    right = [cats[i] for i in order[j + 1:]]
    return _result(instance, left, right, "median_heuristic")


def gen_adversarial_median(n: int, epsilon: float) -> Instance:
    """Four groups on which the median ordering misses the optimum by almost half.

    Categories 0 and 1 hold ``n`` zeros and ``n`` ones. Category 2 holds
    ``n/2`` zeros and ``n/2 + 1`` copies of ``0.5 + eps``; category 3 holds
    ``n/2`` ones and ``n/2 + 1`` copies of ``0.5 - eps``.
    """
    if int(n) != n or n < 2 or n % 2:
        raise ValueError("n must be an even integer >= 2")
    if not 0 < epsilon < 0.25:
        raise ValueError("epsilon must lie in (0, 0.25)")
    n = int(n)
    h = n // 2
    return Instance({
        0: [0.0] * n,
        1: [1.0] * n,
        2: [0.0] * h + [0.5 + epsilon] * (h + 1),
        3: [1.0] * h + [0.5 - epsilon] * (h + 1),
    })


@dataclass(frozen=True)
class EncodingCounterexample:
    """Four instances that no fixed set-to-real encoding can all split optimally.

    ``claimed[i]`` is the unique optimal ``(left, right)`` of ``instances[i]``,
    each side listed in category order.
    """

    epsilon: float
    sets: dict
    instances: Tuple[Instance, ...]
    claimed: Tuple[Tuple[Tuple[Hashable, ...], Tuple[Hashable, ...]], ...]


def gen_encoding_counterexample(epsilon: float = 0.01) -> EncodingCounterexample:
    if not 0 < epsilon <= 0.01:
        raise ValueError("epsilon must lie in (0, 0.01]")
    a = {1: 0.0, 2: 2.0, 3: 3.0, 4: 5.0}
    sets = {}
    for i, ai in a.items():
        sets[f"A{i}"] = [ai - epsilon, ai, ai + epsilon]
        sets[f"A{i}'"] = [ai - epsilon, ai + epsilon, a[1] if i in (3, 4) else a[4]]
    layouts = [
        (("A1", "A1'"), ("A4", "A4'")),
        (("A2", "A1'"), ("A3", "A4'")),
        (("A2", "A2'"), ("A3", "A3'")),
        (("A1", "A3'"), ("A2'", "A4")),
    ]
    instances, claimed = [], []
    for left, right in layouts:
        inst = Instance({c: sets[c] for c in left + right})
        order = inst.categories
        instances.append(inst)
        claimed.append((tuple(c for c in order if c in left), tuple(c for c in order if c in right)))
    return EncodingCounterexample(epsilon, sets, tuple(instances), tuple(claimed))


DISTRIBUTIONS = ("mixture", "duplicates")


def gen_synthetic(n: int, k: int, seed: int, distribution: str = "mixture") -> Instance:
    """Seeded random instance with ``n`` samples over ``k`` nonempty categories.

    ``mixture`` shifts each category and draws it from a uniform or a normal
    law; ``duplicates`` draws small integers so values repeat heavily.
    """
    if k < 1 or n < k:
        raise ValueError("need n >= k >= 1")
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}")
    rng = np.random.default_rng([seed, n, k])
    codes = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
    shift = rng.normal(0.0, 3.0, k)
    if distribution == "mixture":
        normal = rng.random(k) < 0.5
        noise = np.where(normal[codes], rng.standard_normal(n), rng.uniform(-1.5, 1.5, n))
        values = shift[codes] + noise
    else:
        values = np.round(shift[codes]) + rng.integers(0, 6, n)
    return Instance.from_arrays(values, codes)
