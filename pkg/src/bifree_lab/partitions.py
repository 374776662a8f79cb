"""Non-crossing pairings and partitions of ``{0, ..., p-1}``."""
from __future__ import annotations

from functools import lru_cache

PAIRING_CAP = 16
PARTITION_CAP = 12


@lru_cache(maxsize=None)
def _nc_pairings(p: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    if p == 0:
        return ((),)
    out = []
    # 0 pairs with an odd position j; the inside and the outside pair up independently
    for j in range(1, p, 2):
        for inner in _nc_pairings(j - 1):
            for outer in _nc_pairings(p - j - 1):
                pairs = ((0, j),)
                pairs += tuple((a + 1, b + 1) for a, b in inner)
                pairs += tuple((a + j + 1, b + j + 1) for a, b in outer)
                out.append(tuple(sorted(pairs)))
    return tuple(out)


def enumerate_nc_pairings(p: int, cap: int = PAIRING_CAP) -> list[tuple[tuple[int, int], ...]]:
    """All non-crossing perfect matchings of ``p`` ordered points (0-based pairs)."""
    if p < 0 or p % 2:
        raise ValueError(f"p must be a non-negative even integer, got {p}")
    if p > cap:
        raise ValueError(f"p = {p} exceeds the pairing cap of {cap} (Catalan growth)")
    return list(_nc_pairings(p))


def crosses(a: tuple[int, int], b: tuple[int, int]) -> bool:
    (i, j), (k, l) = sorted(a), sorted(b)
    return i < k < j < l or k < i < l < j


@lru_cache(maxsize=None)
def _nc_partitions(p: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    if p == 0:
        return ((),)
    out = []
    # the block containing 0 is {0 = b0 < b1 < ... < bk}; the gaps between
    # consecutive elements (and after bk) are filled independently
    def extend(block, pos, rest):
        # rest: blocks already placed in the gaps before pos
        # option 1: close the block here, fill positions pos..p-1 freely
        for tail in _nc_partitions(p - pos):
            shifted = tuple(tuple(x + pos for x in b) for b in tail)
            out.append(tuple(sorted((block,) + rest + shifted)))
        # option 2: next element of the block is q >= pos, gap pos..q-1 filled freely
        for q in range(pos, p):
            for gap in _nc_partitions(q - pos):
                shifted = tuple(tuple(x + pos for x in b) for b in gap)
                extend(block + (q,), q + 1, rest + shifted)

    extend((0,), 1, ())
    return tuple(out)


def enumerate_nc_partitions(p: int, cap: int = PARTITION_CAP) -> list[tuple[tuple[int, ...], ...]]:
    """All non-crossing set partitions of ``p`` ordered points, blocks sorted."""
    if p < 0:
        raise ValueError("p must be non-negative")
    if p > cap:
        raise ValueError(f"p = {p} exceeds the partition cap of {cap}")
    return list(_nc_partitions(p))


def catalan(k: int) -> int:
    from math import comb

    return comb(2 * k, k) // (k + 1)
