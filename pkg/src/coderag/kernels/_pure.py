"""Pure-Python edit-distance kernel, used when the C extension is absent."""

from __future__ import annotations


def levenshtein(a: str, b: str) -> int:
    """Character-level Levenshtein distance (unit-cost insert/delete/substitute)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) > len(a):
        a, b = b, a
    prev = list(range(len(b) + 1))
    cur = [0] * (len(b) + 1)
    for i, ca in enumerate(a):
        cur[0] = i + 1
        for j, cb in enumerate(b):
            cost = prev[j] if ca == cb else prev[j] + 1
            dele = prev[j + 1] + 1
            if dele < cost:
                cost = dele
            ins = cur[j] + 1
            if ins < cost:
                cost = ins
            cur[j + 1] = cost
        prev, cur = cur, prev
    return prev[len(b)]
