"""Finite unions of closed intervals, identified up to null sets."""

from dataclasses import dataclass, field
import math

import numpy as np


def _normalize(intervals, lo, hi):
    out = []
    for a, b in sorted((float(a), float(b)) for a, b in intervals):
        if b < a:
            raise ValueError(f"interval [{a}, {b}] has negative length")
        a, b = max(a, lo), min(b, hi)
        if b <= a:
            continue
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return tuple(out)


@dataclass(frozen=True)
class IntervalSet:
    """Sorted, disjoint closed intervals inside ``bounds``.

    Degenerate intervals are dropped and touching ones merged: sets are
    only meaningful up to Lebesgue-null sets.
    """

    intervals: tuple = ()
    bounds: tuple = (-math.inf, math.inf)

    def __post_init__(self):
        lo, hi = (float(self.bounds[0]), float(self.bounds[1]))
        if not lo < hi:
            raise ValueError("empty bounding interval")
        object.__setattr__(self, "bounds", (lo, hi))
        object.__setattr__(self, "intervals", _normalize(self.intervals, lo, hi))

    @classmethod
    def half_line(cls, x0, side, bounds=(-math.inf, math.inf)):
        """``(-inf, x0]`` for ``side='lower'`` or ``[x0, inf)`` for ``'upper'``."""
        if side == "lower":
            return cls(((bounds[0], x0),), bounds)
        if side == "upper":
            return cls(((x0, bounds[1]),), bounds)
        raise ValueError("side must be 'lower' or 'upper'")

    @classmethod
    def full(cls, bounds):
        return cls((tuple(bounds),), bounds)

    @property
    def measure(self):
        return sum(b - a for a, b in self.intervals)

    @property
    def breakpoints(self):
        """Interior endpoints, i.e. endpoints strictly inside the bounds."""
        lo, hi = self.bounds
        pts = []
        for a, b in self.intervals:
            for p in (a, b):
                if lo < p < hi:
                    pts.append(p)
        return tuple(pts)

    def with_bounds(self, bounds):
        return IntervalSet(self.intervals, bounds)

    def complement(self):
        lo, hi = self.bounds
        out, cur = [], lo
        for a, b in self.intervals:
            if a > cur:
                out.append((cur, a))
            cur = b
        if cur < hi:
            out.append((cur, hi))
        return IntervalSet(tuple(out), self.bounds)

    def union(self, other):
        return IntervalSet(self.intervals + other.intervals, _hull(self.bounds, other.bounds))

    def intersection(self, other):
        out = []
        i = j = 0
        A, B = self.intervals, other.intervals
        while i < len(A) and j < len(B):
            a = max(A[i][0], B[j][0])
            b = min(A[i][1], B[j][1])
            if a < b:
                out.append((a, b))
            if A[i][1] < B[j][1]:
                i += 1
            else:
                j += 1
        bounds = (max(self.bounds[0], other.bounds[0]), min(self.bounds[1], other.bounds[1]))
        return IntervalSet(tuple(out), bounds)

    def clip(self, lo, hi):
        return self.intersection(IntervalSet(((lo, hi),), (lo, hi)))

    def symmetric_difference_measure(self, other):
        u = self.union(other).measure
        return u - self.intersection(other).measure

    def negate(self):
        lo, hi = self.bounds
        return IntervalSet(tuple((-b, -a) for a, b in self.intervals), (-hi, -lo))

    def minkowski_sum(self, other):
        pieces = [(a + c, b + d) for a, b in self.intervals for c, d in other.intervals]
        bounds = (self.bounds[0] + other.bounds[0], self.bounds[1] + other.bounds[1])
        return IntervalSet(tuple(pieces), bounds)

    def contains(self, t):
        """Closed-set membership, vectorized."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (t >= a) & (t <= b)
        return out

    def to_json(self):
        return {"intervals": [[_enc(a), _enc(b)] for a, b in self.intervals],
                "bounds": [_enc(self.bounds[0]), _enc(self.bounds[1])]}

    @classmethod
    def from_json(cls, obj, bounds=None):
        if isinstance(obj, dict):
            ivs = obj.get("intervals", [])
            b = obj.get("bounds", bounds or ["-inf", "inf"])
        else:
            ivs, b = obj, bounds or ["-inf", "inf"]
        return cls(tuple((_dec(a), _dec(c)) for a, c in ivs), (_dec(b[0]), _dec(b[1])))


def _hull(b1, b2):
    return (min(b1[0], b2[0]), max(b1[1], b2[1]))


def _enc(x):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _dec(x):
    if isinstance(x, str):
        return float(x)
    return float(x)
