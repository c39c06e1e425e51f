"""Permutation crossover and mutation operators.

All operators return fresh lists and preserve the multiset of ids.
Inputs shorter than two elements pass through unchanged.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ValidationError


def _two_cuts(n: int, rng: np.random.Generator) -> tuple[int, int]:
    """Two distinct positions, returned ordered; the segment is inclusive."""
    a = int(rng.integers(0, n))
    b = int(rng.integers(0, n - 1))
    if b >= a:
        b += 1
    return (a, b) if a < b else (b, a)


def pmx_pair(
    a: Sequence[int], b: Sequence[int], c1: int, c2: int
) -> tuple[list[int], list[int]]:
    """Partially mapped crossover with an explicit segment [c1, c2]."""

    def child(p_seg, p_fill):
        n = len(p_seg)
        out = [None] * n
        out[c1 : c2 + 1] = p_seg[c1 : c2 + 1]
        seg_vals = set(out[c1 : c2 + 1])
        for i in list(range(0, c1)) + list(range(c2 + 1, n)):
            v = p_fill[i]
            while v in seg_vals:
                # follow the mapping chain through the segment
                v = p_fill[p_seg.index(v)]
            out[i] = v
        return out

    a, b = list(a), list(b)
    return child(a, b), child(b, a)


def ox1_pair(
    a: Sequence[int], b: Sequence[int], c1: int, c2: int
) -> tuple[list[int], list[int]]:
    """Order crossover: keep a segment, fill the rest in the other
    parent's cyclic order starting after the segment."""

    def child(p_seg, p_fill):
        n = len(p_seg)
        out = [None] * n
        out[c1 : c2 + 1] = p_seg[c1 : c2 + 1]
        seg_vals = set(out[c1 : c2 + 1])
        fill = [p_fill[(c2 + 1 + k) % n] for k in range(n)]
        fill = [v for v in fill if v not in seg_vals]
        positions = [(c2 + 1 + k) % n for k in range(n - (c2 - c1 + 1))]
        for pos, v in zip(positions, fill):
            out[pos] = v
        return out

    a, b = list(a), list(b)
    return child(a, b), child(b, a)


def ox2_pair(
    a: Sequence[int], b: Sequence[int], keep: Sequence[int]
) -> tuple[list[int], list[int]]:
    """Order-based crossover: positions in `keep` stay; the complement
    is refilled with the missing values in the other parent's order."""

    def child(p_keep, p_order):
        n = len(p_keep)
        out = [None] * n
        kept = set()
        for i in keep:
            out[i] = p_keep[i]
            kept.add(p_keep[i])
        fill = [v for v in p_order if v not in kept]
        it = iter(fill)
        for i in range(n):
            if out[i] is None:
                out[i] = next(it)
        return out

    a, b = list(a), list(b)
    return child(a, b), child(b, a)


def crossover(
    kind: str, a: Sequence[int], b: Sequence[int], rng: np.random.Generator
) -> tuple[list[int], list[int]]:
    if sorted(a) != sorted(b):
        raise ValidationError("parents must be permutations of the same ids")
    n = len(a)
    if n < 2:
        return list(a), list(b)
    if kind == "pmx":
        c1, c2 = _two_cuts(n, rng)
        return pmx_pair(a, b, c1, c2)
    if kind == "ox1":
        c1, c2 = _two_cuts(n, rng)
        return ox1_pair(a, b, c1, c2)
    if kind == "ox2":
        mask = rng.random(n) < 0.5
        keep = [i for i in range(n) if mask[i]]
        return ox2_pair(a, b, keep)
    raise ValidationError(f"unknown crossover {kind!r}")


def mutate(kind: str, order: Sequence[int], rng: np.random.Generator) -> list[int]:
    out = list(order)
    n = len(out)
    if n < 2:
        return out
    if kind == "swap":
        i, j = _two_cuts(n, rng)
        out[i], out[j] = out[j], out[i]
        return out
    if kind == "insertion":
        i, j = _two_cuts(n, rng)
        v = out.pop(i)
        out.insert(j, v)
        return out
    if kind == "scramble":
        c1, c2 = _two_cuts(n, rng)
        window = out[c1 : c2 + 1]
        perm = rng.permutation(len(window))
        out[c1 : c2 + 1] = [window[k] for k in perm]
        return out
    if kind == "inversion":
        c1, c2 = _two_cuts(n, rng)
        out[c1 : c2 + 1] = out[c1 : c2 + 1][::-1]
        return out
    raise ValidationError(f"unknown mutation {kind!r}")
