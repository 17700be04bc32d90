"""Exact permutation and pattern combinatorics.

Permutations are written in one-line notation and are 1-indexed throughout:
``sigma(i)`` is the image of position ``i`` for ``i`` in ``1..n``. A
permutation induces a probability measure on the unit square by spreading
mass ``1/n`` uniformly over each square
``[(i-1)/n, i/n] x [(sigma(i)-1)/n, sigma(i)/n]``; rectangle masses of that
measure are computed in exact rational arithmetic when the rectangle has
rational corners.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, NamedTuple, Sequence

from .errors import InputError

__all__ = [
    "Permutation",
    "VincularPattern",
    "Rect",
    "PatternCount",
    "induced_pattern",
    "perm_of_points",
    "count_pattern",
    "contains_vincular",
    "is_baxter",
    "is_baxter_naive",
    "inversion_count",
    "permuton_mass",
    "permuton_cell_masses",
    "PATTERN_2_41_3",
    "PATTERN_3_14_2",
]


@dataclass(frozen=True)
class Permutation:
    """A bijection on {1..n} in one-line notation."""

    values: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        n = len(vals)
        if n < 1:
            raise InputError("permutation must have size >= 1")
        if sorted(vals) != list(range(1, n + 1)):
            raise InputError(f"not a bijection on 1..{n}: {vals}")

    @property
    def n(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __call__(self, i: int) -> int:
        """sigma(i) with 1-indexed i."""
        if not 1 <= i <= len(self.values):
            raise InputError(f"index {i} out of range 1..{len(self.values)}")
        return self.values[i - 1]

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.values)
        for i, v in enumerate(self.values, start=1):
            inv[v - 1] = i
        return Permutation(tuple(inv))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def decreasing(cls, n: int) -> "Permutation":
        return cls(tuple(range(n, 0, -1)))

    @classmethod
    def from_text(cls, line: str) -> "Permutation":
        """Parse one-line notation, space-separated ("2 3 6 4 1 5 8 7")."""
        parts = line.split()
        if not parts:
            raise InputError("empty permutation line")
        try:
            vals = tuple(int(p) for p in parts)
        except ValueError as exc:
            raise InputError(f"bad permutation token in {line!r}") from exc
        return cls(vals)

    @classmethod
    def from_digits(cls, digits: str) -> "Permutation":
        """Parse compact digit notation ("2413"), valid for sizes <= 9."""
        if not digits.isdigit():
            raise InputError(f"bad compact permutation {digits!r}")
        return cls(tuple(int(ch) for ch in digits))

    def to_text(self) -> str:
        return " ".join(str(v) for v in self.values)

    def __str__(self) -> str:
        if len(self.values) <= 9:
            return "".join(str(v) for v in self.values)
        return self.to_text()


@dataclass(frozen=True)
class VincularPattern:
    """A pattern with required adjacencies.

    ``adjacent`` holds positions ``j`` in ``1..k-1`` meaning pattern slots
    ``j`` and ``j+1`` must occupy consecutive indices in the host. With
    ``adjacent`` empty this is a standard pattern.
    """

    base: Permutation
    adjacent: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        adj = frozenset(int(j) for j in self.adjacent)
        object.__setattr__(self, "adjacent", adj)
        k = self.base.n
        if not all(1 <= j <= k - 1 for j in adj):
            raise InputError(f"adjacency slots must lie in 1..{k - 1}: {sorted(adj)}")

    @classmethod
    def parse(cls, text: str) -> "VincularPattern":
        """Parse dashed syntax: "2-41-3" is base 2413 with slots 2,3 adjacent.

        Dashes separate runs; within a run all slots are pairwise adjacent.
        A dash-free string ("2413") is read as a standard pattern with no
        adjacency requirement.
        """
        if "-" not in text:
            return cls(Permutation.from_digits(text), frozenset())
        groups = text.split("-")
        if any(not g for g in groups):
            raise InputError(f"bad vincular pattern {text!r}")
        digits = "".join(groups)
        base = Permutation.from_digits(digits)
        adjacent = set()
        pos = 0
        for g in groups:
            for j in range(pos + 1, pos + len(g)):
                adjacent.add(j)
            pos += len(g)
        return cls(base, frozenset(adjacent))

    def __str__(self) -> str:
        out = []
        for j, v in enumerate(self.base.values, start=1):
            out.append(str(v))
            if j < self.base.n and j not in self.adjacent:
                out.append("-")
        return "".join(out)


@dataclass(frozen=True)
class Rect:
    """An axis-aligned rectangle inside the unit square."""

    x1: object
    x2: object
    y1: object
    y2: object

    def __post_init__(self):
        if not (0 <= self.x1 <= self.x2 <= 1 and 0 <= self.y1 <= self.y2 <= 1):
            raise InputError(
                f"rectangle coordinates must satisfy 0<=x1<=x2<=1, 0<=y1<=y2<=1: {self}"
            )


class PatternCount(NamedTuple):
    count: int
    proportion: Fraction


def induced_pattern(sigma: Permutation, indices: Iterable[int]) -> Permutation:
    """The pattern induced by the index set ``indices`` in ``sigma``.

    Equals the permutation of the point set ``((i, sigma(i)))`` for i in the
    set, i.e. the relative order of the selected values.
    """
    idx = sorted(set(int(i) for i in indices))
    if not idx:
        raise InputError("index set must be nonempty")
    if idx[0] < 1 or idx[-1] > sigma.n:
        raise InputError(f"indices out of range 1..{sigma.n}: {idx}")
    vals = [sigma.values[i - 1] for i in idx]
    ranks = _ranks(vals)
    return Permutation(tuple(ranks))


def _ranks(vals: Sequence[int]) -> list[int]:
    order = sorted(range(len(vals)), key=vals.__getitem__)
    out = [0] * len(vals)
    for rank, pos in enumerate(order, start=1):
        out[pos] = rank
    return out


def perm_of_points(points: Sequence[tuple[float, float]]) -> Permutation:
    """Permutation induced by planar points: x-reorder, then rank the y values.

    Ties in x or in y are rejected; upstream samplers draw from continuous
    distributions where ties have probability zero, and silent tie-breaking
    would bias occurrence estimates.
    """
    pts = list(points)
    if not pts:
        raise InputError("need at least one point")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    if len(set(xs)) != len(xs):
        raise InputError("tie in x coordinates")
    if len(set(ys)) != len(ys):
        raise InputError("tie in y coordinates")
    by_x = sorted(pts, key=lambda p: p[0])
    return Permutation(tuple(_ranks([p[1] for p in by_x])))


def count_pattern(pattern: Permutation, sigma: Permutation) -> PatternCount:
    """Number and proportion of index subsets of sigma inducing ``pattern``.

    The proportion divides by C(n, k); it is 0 when k > n. Direct enumeration
    of k-subsets, which is all that desk-scale pattern sizes (k <= 4 in every
    verification) require.
    """
    k = pattern.n
    n = sigma.n
    if k > n:
        return PatternCount(0, Fraction(0))
    target = pattern.values
    count = 0
    vals = sigma.values
    for combo in itertools.combinations(range(n), k):
        chosen = [vals[i] for i in combo]
        if tuple(_ranks(chosen)) == target:
            count += 1
    return PatternCount(count, Fraction(count, comb(n, k)))


def contains_vincular(sigma: Permutation, vp: VincularPattern) -> bool:
    """True iff sigma has an occurrence of vp.base whose slots marked adjacent
    occupy consecutive host indices."""
    k = vp.base.n
    n = sigma.n
    if k > n:
        return False
    target = vp.base.values
    vals = sigma.values
    adj = vp.adjacent
    for combo in itertools.combinations(range(n), k):
        ok = True
        for j in adj:
            if combo[j] != combo[j - 1] + 1:
                ok = False
                break
        if not ok:
            continue
        chosen = [vals[i] for i in combo]
        if tuple(_ranks(chosen)) == target:
            return True
    return False


PATTERN_2_41_3 = VincularPattern(Permutation((2, 4, 1, 3)), frozenset({2}))
PATTERN_3_14_2 = VincularPattern(Permutation((3, 1, 4, 2)), frozenset({2}))


def is_baxter(sigma: Permutation) -> bool:
    """True iff sigma contains neither 2-41-3 nor 3-14-2.

    Equivalently there are no i < j < k with
    sigma(j+1) < sigma(i) < sigma(k) < sigma(j) or
    sigma(j) < sigma(k) < sigma(i) < sigma(j+1).

    For each adjacent pair (j, j+1) this scans the prefix for the tightest
    bracketing value and the suffix for a value inside the bracket, which is
    O(n^2) with early exit instead of the O(n^4) definition scan.
    """
    vals = sigma.values
    n = len(vals)
    for j in range(1, n - 1):  # 0-indexed position of sigma(j); pair (j, j+1)
        a, b = vals[j - 1], vals[j]
        if a > b:
            # need prefix v, suffix w with b < v < w < a
            lo = None
            for i in range(j - 1):
                v = vals[i]
                if b < v < a and (lo is None or v < lo):
                    lo = v
            if lo is not None:
                for kk in range(j + 1, n):
                    if lo < vals[kk] < a:
                        return False
        elif a < b:
            # need prefix v, suffix w with a < w < v < b
            hi = None
            for i in range(j - 1):
                v = vals[i]
                if a < v < b and (hi is None or v > hi):
                    hi = v
            if hi is not None:
                for kk in range(j + 1, n):
                    if a < vals[kk] < hi:
                        return False
    return True


def is_baxter_naive(sigma: Permutation) -> bool:
    """Literal scan over all i < j < k of the two forbidden inequality chains.

    Independent oracle for is_baxter; O(n^3), used only in verification.
    """
    vals = sigma.values
    n = len(vals)
    for j in range(2, n):  # 1-indexed j with j+1 <= n
        sj, sj1 = vals[j - 1], vals[j]
        for i in range(1, j):
            si = vals[i - 1]
            for k in range(j + 2, n + 1):
                sk = vals[k - 1]
                if sj1 < si < sk < sj:
                    return False
                if sj < sk < si < sj1:
                    return False
    return True


def inversion_count(sigma: Permutation) -> int:
    """Number of inverted pairs, i.e. occurrences of the pattern 21.

    Merge-sort count, O(n log n).
    """
    vals = list(sigma.values)

    def rec(a: list[int]) -> tuple[int, list[int]]:
        if len(a) <= 1:
            return 0, a
        mid = len(a) // 2
        li, left = rec(a[:mid])
        ri, right = rec(a[mid:])
        out = []
        inv = li + ri
        i = j = 0
        while i < len(left) and j < len(right):
            if left[i] <= right[j]:
                out.append(left[i])
                i += 1
            else:
                out.append(right[j])
                j += 1
                inv += len(left) - i
        out.extend(left[i:])
        out.extend(right[j:])
        return inv, out

    inv, _ = rec(vals)
    return inv


def _as_exact(v) -> Fraction | None:
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    return None


def _overlap(lo1, hi1, lo2, hi2):
    lo = lo1 if lo1 > lo2 else lo2
    hi = hi1 if hi1 < hi2 else hi2
    d = hi - lo
    return d if d > 0 else 0 * d


def permuton_mass(sigma: Permutation, rect: Rect):
    """Mass the permuton of sigma assigns to ``rect``.

    n * sum_i Leb([ (i-1)/n, i/n ] x [ (sigma(i)-1)/n, sigma(i)/n ] intersect rect).
    Exact Fraction when all rectangle corners are int/Fraction, float otherwise.
    """
    n = sigma.n
    exact = [_as_exact(v) for v in (rect.x1, rect.x2, rect.y1, rect.y2)]
    if all(e is not None for e in exact):
        x1, x2, y1, y2 = exact
        one = Fraction(1)
    else:
        x1, x2, y1, y2 = (float(rect.x1), float(rect.x2), float(rect.y1), float(rect.y2))
        one = 1.0
    total = 0 * one
    for i, v in enumerate(sigma.values, start=1):
        lx = _overlap((i - 1) * one / n, i * one / n, x1, x2)
        if lx == 0:
            continue
        ly = _overlap((v - 1) * one / n, v * one / n, y1, y2)
        if ly == 0:
            continue
        total += lx * ly
    return n * total


def permuton_cell_masses(sigma: Permutation, resolution: int) -> list[list[Fraction]]:
    """Exact masses of the R x R grid cells under the permuton of sigma.

    cell[i][j] covers [i/R,(i+1)/R] x [j/R,(j+1)/R]; each of the n diagonal
    squares only meets the O(n/R + 1)^2 cells it straddles.
    """
    if resolution < 1:
        raise InputError("resolution must be >= 1")
    R = resolution
    n = sigma.n
    cells = [[Fraction(0)] * R for _ in range(R)]
    for i, v in enumerate(sigma.values, start=1):
        x_lo, x_hi = Fraction(i - 1, n), Fraction(i, n)
        y_lo, y_hi = Fraction(v - 1, n), Fraction(v, n)
        for a in range(int(x_lo * R), min(R - 1, int(x_hi * R) if x_hi * R != int(x_hi * R) else int(x_hi * R) - 1) + 1):
            lx = _overlap(x_lo, x_hi, Fraction(a, R), Fraction(a + 1, R))
            if lx == 0:
                continue
            for b in range(int(y_lo * R), min(R - 1, int(y_hi * R) if y_hi * R != int(y_hi * R) else int(y_hi * R) - 1) + 1):
                ly = _overlap(y_lo, y_hi, Fraction(b, R), Fraction(b + 1, R))
                if ly == 0:
                    continue
                cells[a][b] += n * lx * ly
    return cells
