"""Brute-force references for toy-sized instances.

Everything here enumerates; nothing shares search code with the library
constructions it is used to check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from typing import Sequence

import numpy as np

__all__ = [
    "TooLarge",
    "SmallInstance",
    "multiset_permutations",
    "brute_next_day",
    "exact_mean_partition",
    "cyclic_window_value",
    "prefix_value",
    "exact_restricted_cycle",
    "exact_compatible_schedule",
    "brute_intercycle",
]


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class SmallInstance:
    times: tuple[float, ...]
    flows: tuple[int, ...]

    def __post_init__(self):
        if len(self.times) != len(self.flows):
            raise ValueError("times and flows differ in length")
        if any(not math.isfinite(t) for t in self.times) or any(q < 0 for q in self.flows):
            raise ValueError("times must be finite and flows nonnegative")

    @classmethod
    def from_deviations(cls, devs: Sequence[float]) -> "SmallInstance":
        """One driver per value; with values summing to zero, t_hat is 0."""
        return cls(tuple(float(d) for d in devs), (1,) * len(devs))

    @property
    def Q(self) -> int:
        return sum(self.flows)

    @property
    def t_hat(self) -> Fraction:
        return sum((Fraction(t) * q for t, q in zip(self.times, self.flows)), Fraction(0)) / self.Q

    @property
    def units(self) -> list[int]:
        """Path index of each unit route."""
        return [k for k, q in enumerate(self.flows) for _ in range(q)]

    @property
    def unit_deviations(self) -> list[Fraction]:
        th = self.t_hat
        return [Fraction(self.times[k]) - th for k in self.units]


def multiset_permutations(items: Sequence[int]):
    """Distinct orderings of a multiset, in lexicographic order."""
    counts: dict[int, int] = {}
    for x in items:
        counts[x] = counts.get(x, 0) + 1
    keys = sorted(counts)
    n = len(items)
    out: list[int] = []

    def rec():
        if len(out) == n:
            yield tuple(out)
            return
        for k in keys:
            if counts[k]:
                counts[k] -= 1
                out.append(k)
                yield from rec()
                out.pop()
                counts[k] += 1

    yield from rec()


def brute_next_day(cumulative: Sequence[float], inst: SmallInstance, limit: int = 10) -> tuple[Fraction, tuple[int, ...]]:
    """Minimum over all daily assignments of tomorrow's inequity, exactly, and the first minimizer."""
    Q = inst.Q
    if Q > limit:
        raise TooLarge(f"{Q} drivers exceeds the enumeration limit {limit}")
    if len(cumulative) != Q:
        raise ValueError("ledger length differs from driver count")
    cum = [Fraction(float(c)) for c in cumulative]
    dev = [Fraction(t) - inst.t_hat for t in inst.times]
    best, witness = None, None
    for perm in multiset_permutations(inst.units):
        val = sum(((c + dev[k]) ** 2 for c, k in zip(cum, perm)), Fraction(0)) / Q
        if best is None or val < best:
            best, witness = val, perm
    return best, witness


def exact_mean_partition(inst: SmallInstance, limit: int = 20) -> list[tuple[int, ...]] | None:
    """Split the unit routes into the most groups with mean exactly t_hat.

    Groups are returned as per-path counts. ``None`` when the whole multiset
    is the only such group. Uses the fact that a best split corresponds to an
    ordering of the units with the most zero prefix sums, found by a DP over
    subsets (n * 2^n).
    """
    n = inst.Q
    if n > limit:
        raise TooLarge(f"{n} unit routes exceeds the limit {limit}")
    if n == 0:
        return None
    devs = inst.unit_deviations
    den = math.lcm(*(d.denominator for d in devs))
    w = np.array([int(d * den) for d in devs], dtype=object if max(abs(int(d * den)) for d in devs) > 2**40 else np.int64)
    N = 1 << n
    masks = np.arange(N)
    sums = np.zeros(N, dtype=w.dtype)
    for i in range(n):
        sel = (masks >> i) & 1 == 1
        sums[sel] += w[i]
    zero = (sums == 0).astype(np.int64)
    pop = np.zeros(N, dtype=np.int64)
    for i in range(n):
        pop += (masks >> i) & 1
    best = np.full(N, -1, dtype=np.int64)
    best[0] = 0
    for p in range(1, n + 1):
        layer = masks[pop == p]
        cand = np.full(len(layer), -1, dtype=np.int64)
        for i in range(n):
            has = (layer >> i) & 1 == 1
            prev = best[layer[has] ^ (1 << i)]
            cand[has] = np.maximum(cand[has], prev)
        best[layer] = cand + zero[layer]
    if best[N - 1] <= 1:
        return None
    # walk back: peel units while keeping the score reachable, cut at zero-sum prefixes
    order = []
    m = N - 1
    while m:
        need = best[m] - zero[m]
        i = next(i for i in range(n) if (m >> i) & 1 and best[m ^ (1 << i)] == need)
        order.append(i)
        m ^= 1 << i
    order.reverse()
    groups, cur, acc = [], [0] * len(inst.flows), 0
    units = inst.units
    for i in order:
        cur[units[i]] += 1
        acc += int(w[i])
        if acc == 0:
            groups.append(tuple(cur))
            cur = [0] * len(inst.flows)
    return groups


def cyclic_window_value(seq: Sequence[float]) -> float:
    """Max |sum| over every cyclic window (any start, length 1..n)."""
    s = list(seq)
    n = len(s)
    best = 0
    for a in range(n):
        acc = 0
        for l in range(n):
            acc += s[(a + l) % n]
            best = max(best, abs(acc))
    return best


def prefix_value(rows: Sequence[Sequence[float]]) -> float:
    """Max |prefix sum| over the rows of a schedule of values."""
    best = 0
    for r in rows:
        acc = 0
        for x in r:
            acc += x
            best = max(best, abs(acc))
    return best


def exact_restricted_cycle(devs: Sequence[float], limit: int = 10) -> tuple[float, tuple[float, ...]]:
    """Best single cyclic order of the values under ``cyclic_window_value``.

    Enumerates all orders with the first value fixed (rotations give the
    same windows), evaluated with vectorized window sums.
    """
    n = len(devs)
    if n > limit:
        raise TooLarge(f"{n} values exceeds the limit {limit}")
    if n == 0:
        return 0.0, ()
    v = np.asarray(devs, dtype=float)
    rest = np.array(list(permutations(range(1, n))), dtype=np.int64).reshape(-1, n - 1)
    idx = np.hstack([np.zeros((len(rest), 1), dtype=np.int64), rest])
    vals = v[idx]
    P = np.concatenate([np.zeros((len(idx), 1)), np.cumsum(np.hstack([vals, vals]), axis=1)], axis=1)
    score = np.zeros(len(idx))
    for l in range(1, n + 1):
        score = np.maximum(score, np.abs(P[:, l:l + n] - P[:, :n]).max(axis=1))
    k = int(np.argmin(score))
    return float(score[k]), tuple(float(x) for x in vals[k])


def exact_compatible_schedule(devs: Sequence[float], limit: int = 6) -> tuple[float, np.ndarray]:
    """Best n x n schedule where every row and every column uses each value's slot once.

    Objective: max over rows of |prefix sum|. Tries bounds in increasing order
    over the finite set of achievable prefix values; for each bound,
    backtracks over rows drawn from the permutations that respect it.
    """
    n = len(devs)
    if n > limit:
        raise TooLarge(f"{n} values exceeds the limit {limit}")
    if n == 0:
        return 0.0, np.zeros((0, 0))
    v = [float(x) for x in devs]
    perms = list(permutations(range(n)))

    def peak(p):
        acc, m = 0.0, 0.0
        for i in p:
            acc += v[i]
            m = max(m, abs(acc))
        return m

    peaks = {p: peak(p) for p in perms}
    for B in sorted(set(peaks.values())):
        rows = [p for p in perms if peaks[p] <= B]
        chosen: list[tuple[int, ...]] = []
        used = [set() for _ in range(n)]

        def extend() -> bool:
            if len(chosen) == n:
                return True
            for r in rows:
                if chosen and r <= chosen[-1]:
                    continue  # rows in increasing order: the row set, not its order, matters
                if any(r[c] in used[c] for c in range(n)):
                    continue
                chosen.append(r)
                for c in range(n):
                    used[c].add(r[c])
                if extend():
                    return True
                for c in range(n):
                    used[c].discard(r[c])
                chosen.pop()
            return False

        if extend():
            return B, np.array([[v[i] for i in r] for r in chosen])
    raise AssertionError("a cyclic Latin square always exists")


def brute_intercycle(base, ledger, ps, sign: str = "discontent", aggregate: str = "sum", limit: int = 8):
    """Minimum of the intercycle objective over every driver permutation, with a minimizer."""
    from .cycles import intercycle_objective

    if base.Q > limit:
        raise TooLarge(f"{base.Q} drivers exceeds the limit {limit}")
    best, arg = None, None
    for sigma in permutations(range(base.Q)):
        val = intercycle_objective(base, ledger, sigma, ps, sign, aggregate)
        if best is None or val < best:
            best, arg = val, np.array(sigma)
    return best, arg
