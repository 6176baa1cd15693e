"""Sorted posting-list intersection."""

from __future__ import annotations

from bisect import bisect_left
from collections.abc import Sequence

# Ratio above which the longer list is probed by galloping instead of merged.
GALLOP_RATIO = 8


def _gallop(seq: Sequence[str], target: str, lo: int) -> int:
    """Return the first index >= lo with seq[index] >= target."""
    n = len(seq)
    step = 1
    hi = lo
    while hi < n and seq[hi] < target:
        lo = hi + 1
        hi += step
        step <<= 1
    return bisect_left(seq, target, lo, min(hi, n))


def intersect_two(short: Sequence[str], long: Sequence[str]) -> list[str]:
    if len(short) > len(long):
        short, long = long, short
    out: list[str] = []
    if not short:
        return out
    if len(long) >= GALLOP_RATIO * len(short):
        j = 0
        for item in short:
            j = _gallop(long, item, j)
            if j == len(long):
                break
            if long[j] == item:
                out.append(item)
                j += 1
        return out
    i = j = 0
    while i < len(short) and j < len(long):
        a, b = short[i], long[j]
        if a == b:
            out.append(a)
            i += 1
            j += 1
        elif a < b:
            i += 1
        else:
            j += 1
    return out


def intersect(lists: Sequence[Sequence[str]]) -> list[str]:
    """Intersect sorted, duplicate-free lists, smallest first."""
    if not lists:
        return []
    ordered = sorted(lists, key=len)
    result = list(ordered[0])
    for other in ordered[1:]:
        if not result:
            break
        result = intersect_two(result, other)
    return result
