"""Exact minimum hitting set by branch and bound over bitmasks."""

from __future__ import annotations

from typing import Iterable, Sequence

from .errors import ResourceLimit


class _Budget:
    def __init__(self, nodes: int):
        self.left = nodes

    def tick(self, best):
        self.left -= 1
        if self.left < 0:
            raise ResourceLimit("hitting-set search exceeded its node budget", best_bound=best)


def _lower_bound(sets: Sequence[int]) -> int:
    """Size of a greedy packing of pairwise disjoint sets."""
    used = 0
    count = 0
    for s in sorted(sets, key=lambda m: bin(m).count("1")):
        if not s & used:
            used |= s
            count += 1
    return count


def min_hitting_set_masks(sets: Iterable[int], upper: int | None = None, nodes: int = 2_000_000) -> int | None:
    """Smallest mask meeting every set, or None when none beats ``upper``.

    ``upper`` is an exclusive bound on the size of an acceptable answer.
    An empty set in the input can never be hit, so the result is None.
    """
    sets = list(set(sets))
    if any(s == 0 for s in sets):
        return None
    # drop supersets: hitting the subset hits them too
    sets.sort(key=lambda m: bin(m).count("1"))
    reduced: list[int] = []
    for s in sets:
        if not any(r & s == r for r in reduced):
            reduced.append(s)
    budget = _Budget(nodes)
    best: list = [None, upper if upper is not None else len(reduced) + 1]

    def search(chosen: int, size: int, remaining: list[int]):
        budget.tick(best[1])
        if not remaining:
            if size < best[1]:
                best[0], best[1] = chosen, size
            return
        if size + _lower_bound(remaining) >= best[1]:
            return
        pivot = min(remaining, key=lambda m: bin(m).count("1"))
        freq: dict[int, int] = {}
        m = pivot
        while m:
            bit = m & -m
            freq[bit] = sum(1 for r in remaining if r & bit)
            m ^= bit
        for bit in sorted(freq, key=lambda b: (-freq[b], b)):
            search(chosen | bit, size + 1, [r for r in remaining if not r & bit])
            # later branches may assume this element is excluded
            remaining = [r & ~bit for r in remaining]
            if any(r == 0 for r in remaining):
                break

    search(0, 0, reduced)
    return best[0]


def min_hitting_set(sets: Iterable[Iterable[int]], upper: int | None = None, nodes: int = 2_000_000):
    """Same as the mask version, over sets of hashable elements."""
    sets = [frozenset(s) for s in sets]
    universe = sorted(set().union(*sets)) if sets else []
    bit = {x: 1 << i for i, x in enumerate(universe)}
    masks = []
    for s in sets:
        m = 0
        for x in s:
            m |= bit[x]
        masks.append(m)
    found = min_hitting_set_masks(masks, upper, nodes)
    if found is None:
        return None
    return frozenset(x for x in universe if found & bit[x])
