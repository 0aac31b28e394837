"""Daily assignments and multi-day schedules of drivers to paths.

A schedule is a set of driver groups that each repeat on their own period.
Cyclic groups (rotations of a slot sequence) are stored compactly and their
days are produced on demand, so cycles of a few thousand drivers never need
the full days-by-drivers table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np

from .pathset import PathSet

__all__ = [
    "Provenance",
    "DailyAssignment",
    "DriverGroup",
    "CycleSchedule",
    "InconsistentAssignment",
]


class InconsistentAssignment(ValueError):
    pass


class Provenance(str, Enum):
    FULL_SHIFT = "FullShift"
    GCD_SHIFT = "GcdShift"
    PARTITION = "Partition"
    BALANCED_ORDERING = "BalancedOrdering"
    GREEDY_RULE = "GreedyRule"
    CUSTOM = "Custom"


WARDROPIAN_BY_CONSTRUCTION = frozenset(
    {Provenance.FULL_SHIFT, Provenance.GCD_SHIFT, Provenance.PARTITION, Provenance.BALANCED_ORDERING}
)


@dataclass(frozen=True)
class DailyAssignment:
    """Driver i takes path ``paths[i]`` on day ``day`` (a Q x K 0/1 matrix stored by column index)."""

    paths: np.ndarray
    day: int = 0

    def __post_init__(self):
        arr = np.asarray(self.paths, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "paths", arr)

    @property
    def Q(self) -> int:
        return len(self.paths)

    def matrix(self, K: int) -> np.ndarray:
        A = np.zeros((self.Q, K), dtype=np.int64)
        A[np.arange(self.Q), self.paths] = 1
        return A

    def check(self, ps: PathSet) -> None:
        """Raise InconsistentAssignment unless every driver has one path and path k gets Q_k drivers."""
        if self.Q != ps.Q:
            raise InconsistentAssignment(f"day {self.day}: {self.Q} drivers, path set has {ps.Q}")
        if self.Q and (self.paths.min() < 0 or self.paths.max() >= ps.K):
            raise InconsistentAssignment(f"day {self.day}: path index outside 0..{ps.K - 1}")
        counts = np.bincount(self.paths, minlength=ps.K)
        if not np.array_equal(counts, ps.flows):
            raise InconsistentAssignment(f"day {self.day}: path loads {counts.tolist()} != flows {ps.flows.tolist()}")


@dataclass(frozen=True, eq=False)
class DriverGroup:
    """Drivers that cycle together.

    Either cyclic (``order`` is a slot sequence of path indices, the member at
    local position r sits on slot ``(r + day*step) % n``) or tabular
    (``table[day, r]`` is the path of member r).
    """

    drivers: np.ndarray
    order: np.ndarray | None = None
    step: int = 1
    table: np.ndarray | None = None

    def __post_init__(self):
        if (self.order is None) == (self.table is None):
            raise ValueError("a group is either cyclic (order) or tabular (table)")
        object.__setattr__(self, "drivers", np.asarray(self.drivers, dtype=np.int64))
        n = len(self.drivers)
        if self.order is not None:
            order = np.asarray(self.order, dtype=np.int64)
            if len(order) != n:
                raise ValueError("slot sequence and member count differ")
            object.__setattr__(self, "order", order)
        else:
            table = np.asarray(self.table, dtype=np.int64)
            if table.ndim == 1:
                table = table[None, :]
            object.__setattr__(self, "table", table)

    @property
    def size(self) -> int:
        return len(self.drivers)

    @property
    def cyclic(self) -> bool:
        return self.order is not None

    @property
    def length(self) -> int:
        if self.cyclic:
            n = self.size
            return n // math.gcd(n, self.step % n) if n else 1
        return self.table.shape[0]

    def day(self, j: int) -> np.ndarray:
        j %= self.length
        if self.cyclic:
            n = self.size
            return self.order[(np.arange(n) + j * self.step) % n]
        return self.table[j]

    def local_table(self) -> np.ndarray:
        if not self.cyclic:
            return self.table
        return np.stack([self.day(j) for j in range(self.length)]) if self.size else np.zeros((1, 0), np.int64)

    def usage_counts(self, K: int) -> np.ndarray:
        """(members, K) number of days each member spends on each path over one group period."""
        n = self.size
        if not self.cyclic:
            out = np.zeros((n, K), dtype=np.int64)
            for row in self.table:
                out[np.arange(n), row] += 1
            return out
        g = math.gcd(n, self.step % n) if n else 1
        # a member at position r visits exactly the positions congruent to r mod g
        per_class = np.stack([np.bincount(self.order[c::g], minlength=K) for c in range(g)]) if n else np.zeros((0, K), np.int64)
        return per_class[np.arange(n) % g]

    def composition(self, K: int) -> np.ndarray:
        return np.bincount(self.day(0), minlength=K)


def _lcm(values: Iterable[int]) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), values, 1)


@dataclass(frozen=True, eq=False)
class CycleSchedule:
    """A finite sequence of daily assignments for ``Q`` drivers.

    The overall period is the lcm of the group periods; ``days`` materializes
    that many DailyAssignments, ``assignment(j)`` gives one (wrapping).
    """

    Q: int
    groups: tuple[DriverGroup, ...]
    provenance: Provenance = Provenance.CUSTOM
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        seen = np.concatenate([g.drivers for g in self.groups]) if self.groups else np.zeros(0, np.int64)
        if len(seen) != self.Q or not np.array_equal(np.sort(seen), np.arange(self.Q)):
            raise ValueError("groups must partition drivers 0..Q-1")

    @classmethod
    def from_days(
        cls,
        days: Sequence[DailyAssignment | Sequence[int]],
        provenance: Provenance | str = Provenance.CUSTOM,
        Q: int | None = None,
    ) -> "CycleSchedule":
        rows = [d.paths if isinstance(d, DailyAssignment) else np.asarray(d, dtype=np.int64) for d in days]
        if not rows:
            return cls(Q or 0, (DriverGroup(np.arange(Q or 0), table=np.zeros((0, Q or 0), np.int64)),), provenance)
        table = np.stack(rows)
        return cls(table.shape[1], (DriverGroup(np.arange(table.shape[1]), table=table),), provenance)

    @classmethod
    def cyclic(cls, order: Sequence[int], step: int = 1, provenance=Provenance.CUSTOM, drivers=None) -> "CycleSchedule":
        order = np.asarray(order, dtype=np.int64)
        drivers = np.arange(len(order)) if drivers is None else drivers
        return cls(len(order), (DriverGroup(drivers, order=order, step=step),), provenance)

    @cached_property
    def group_lengths(self) -> tuple[int, ...]:
        return tuple(g.length for g in self.groups)

    @property
    def length(self) -> int:
        if any(not g.cyclic and g.table.shape[0] == 0 for g in self.groups):
            return 0
        return _lcm(self.group_lengths)

    def __len__(self) -> int:
        return self.length

    def assignment(self, j: int) -> DailyAssignment:
        out = np.empty(self.Q, dtype=np.int64)
        for g in self.groups:
            out[g.drivers] = g.day(j)
        return DailyAssignment(out, j)

    @property
    def days(self) -> list[DailyAssignment]:
        return [self.assignment(j) for j in range(self.length)]

    def path_matrix(self, n_days: int | None = None) -> np.ndarray:
        """(days, Q) table of path indices; defaults to one full period."""
        n = self.length if n_days is None else n_days
        out = np.empty((n, self.Q), dtype=np.int64)
        for g in self.groups:
            tab = g.local_table()
            reps = -(-n // tab.shape[0]) if tab.shape[0] else 0
            out[:, g.drivers] = np.tile(tab, (reps, 1))[:n] if reps else tab[:n]
        return out

    def usage_counts(self, K: int) -> np.ndarray:
        """(Q, K) days spent on each path over one full period."""
        L = self.length
        out = np.zeros((self.Q, K), dtype=np.int64)
        for g in self.groups:
            out[g.drivers] = g.usage_counts(K) * (L // g.length)
        return out

    def driver_means(self, ps: PathSet) -> np.ndarray:
        """Per-driver mean travel time over one period (float)."""
        means = np.empty(self.Q)
        for g in self.groups:
            means[g.drivers] = g.usage_counts(ps.K) @ ps.times / g.length
        return means
