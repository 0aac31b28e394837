"""Per-driver fairness measures over a run of daily assignments.

Notation: on day j driver i deviates from the OD mean by ``D_j[i]``; the
running total up to day J is the cumulative deviation, and the discontent
progression stacks running sums of those cumulative vectors, one column per
day.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .pathset import PathSet
from .tntp_io import ReportTable
from .schedule import CycleSchedule, DailyAssignment, InconsistentAssignment

__all__ = [
    "DeviationVector",
    "DeviationLedger",
    "InequitySeries",
    "DiscontentMeasures",
    "CueVerdict",
    "Relation",
    "ParetoResult",
    "InconsistentAssignment",
    "LengthMismatch",
    "EmptyLedger",
    "MissingUeTime",
    "DriverSetMismatch",
    "deviations",
    "accumulate",
    "inequity",
    "inequity_series",
    "discontent_measures",
    "driver_totals_exact",
    "verify_cue",
    "pareto_compare",
    "inequity_table",
]


class LengthMismatch(ValueError):
    pass


class EmptyLedger(ValueError):
    pass


class MissingUeTime(ValueError):
    pass


class DriverSetMismatch(ValueError):
    pass


@dataclass(frozen=True)
class DeviationVector:
    day: int
    values: np.ndarray

    def __len__(self):
        return len(self.values)


def deviations(A: DailyAssignment, ps: PathSet) -> DeviationVector:
    """t_{k(i)} - t_hat for every driver."""
    A.check(ps)
    return DeviationVector(A.day, ps.times[A.paths] - ps.t_hat)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DeviationLedger:
    """Immutable record of daily deviations; ``accumulate`` returns a new ledger.

    ``history`` is Q x J: column J is the sum of the first J cumulative vectors.
    """

    Q: int
    daily: tuple[np.ndarray, ...] = ()
    _cumulative: tuple[np.ndarray, ...] = field(default=(), repr=False)
    _history: tuple[np.ndarray, ...] = field(default=(), repr=False)

    @classmethod
    def empty(cls, Q: int) -> "DeviationLedger":
        return cls(Q)

    @classmethod
    def from_daily(cls, rows: Iterable[Sequence[float] | DeviationVector], Q: int | None = None) -> "DeviationLedger":
        rows = list(rows)
        if Q is None:
            if not rows:
                raise EmptyLedger("cannot infer driver count from no days")
            Q = len(rows[0])
        led = cls(Q)
        for r in rows:
            led = led.accumulate(r)
        return led

    @property
    def day_count(self) -> int:
        return len(self.daily)

    @property
    def cumulative(self) -> np.ndarray:
        return self._cumulative[-1] if self._cumulative else np.zeros(self.Q)

    @property
    def history(self) -> np.ndarray:
        if not self._history:
            return np.zeros((self.Q, 0))
        return np.column_stack(self._history)

    @property
    def cumulative_history(self) -> np.ndarray:
        """Q x J matrix whose column J is the cumulative deviation after day J."""
        if not self._cumulative:
            return np.zeros((self.Q, 0))
        return np.column_stack(self._cumulative)

    def accumulate(self, d: DeviationVector | Sequence[float]) -> "DeviationLedger":
        values = d.values if isinstance(d, DeviationVector) else np.asarray(d, dtype=float)
        if len(values) != self.Q:
            raise LengthMismatch(f"deviation vector has {len(values)} entries, ledger has {self.Q} drivers")
        cum = self.cumulative + values
        hist = (self._history[-1] if self._history else np.zeros(self.Q)) + cum
        return DeviationLedger(
            self.Q,
            self.daily + (_frozen(values),),
            self._cumulative + (_frozen(cum),),
            self._history + (_frozen(hist),),
        )


def accumulate(ledger: DeviationLedger, d: DeviationVector | Sequence[float]) -> DeviationLedger:
    return ledger.accumulate(d)


def inequity(ledger: DeviationLedger, ps: PathSet) -> tuple[float, float]:
    """(I, I_bar) for the latest day: squared norm of cumulative deviations over Q, and that over t_hat."""
    if ledger.day_count == 0:
        raise EmptyLedger("no days recorded")
    cum = ledger.cumulative
    I = float(np.dot(cum, cum)) / ps.Q
    return I, I / ps.t_hat


@dataclass(frozen=True)
class InequitySeries:
    I: np.ndarray
    I_bar: np.ndarray

    @property
    def days(self) -> np.ndarray:
        return np.arange(1, len(self.I) + 1)


def inequity_series(ledger: DeviationLedger, ps: PathSet) -> InequitySeries:
    if ledger.day_count == 0:
        raise EmptyLedger("no days recorded")
    C = ledger.cumulative_history
    I = np.einsum("ij,ij->j", C, C) / ps.Q
    return InequitySeries(I, I / ps.t_hat)


def inequity_table(series: dict[tuple[int, int], InequitySeries], name: str | None = None) -> ReportTable:
    """Tidy table (origin, destination, day, I, I_bar) for ``write_report``."""
    rows = []
    for od in sorted(series):
        s = series[od]
        rows += [
            {"origin": od[0], "destination": od[1], "day": int(d), "I": float(a), "I_bar": float(b)}
            for d, a, b in zip(s.days, s.I, s.I_bar)
        ]
    return ReportTable("inequity_series", rows, name)


@dataclass(frozen=True)
class DiscontentMeasures:
    max_above_avg_period: np.ndarray
    one_sided_discontent: np.ndarray
    max_cumulative_discontent: np.ndarray


def discontent_measures(ledger: DeviationLedger) -> DiscontentMeasures:
    """Per-driver summaries of a ledger.

    ``max_above_avg_period`` is the longest run of strictly positive daily
    deviations; ``one_sided_discontent`` doubly accumulates only the positive
    parts; ``max_cumulative_discontent`` is the peak of the progression row.
    """
    if ledger.day_count == 0:
        raise EmptyLedger("no days recorded")
    D = np.column_stack(ledger.daily)
    pos = D > 0
    run = np.zeros(ledger.Q, dtype=np.int64)
    best = np.zeros(ledger.Q, dtype=np.int64)
    for j in range(D.shape[1]):
        run = np.where(pos[:, j], run + 1, 0)
        np.maximum(best, run, out=best)
    plus = np.cumsum(np.maximum(D, 0.0), axis=1)
    one_sided = plus.sum(axis=1)
    return DiscontentMeasures(best, one_sided, ledger.history.max(axis=1))


def driver_totals_exact(schedule: CycleSchedule, times: Sequence[float]) -> list[Fraction]:
    """Exact per-driver total time over one full period (floats are exact rationals)."""
    T = [Fraction(float(t)) for t in times]
    L = schedule.length
    out: list[Fraction] = [Fraction(0)] * schedule.Q
    for g in schedule.groups:
        counts = g.usage_counts(len(T))
        if not len(counts):
            continue
        reps = L // g.length
        uniq, inv = np.unique(counts, axis=0, return_inverse=True)
        totals = [reps * sum((int(c) * t for c, t in zip(row, T)), Fraction(0)) for row in uniq]
        for d, k in zip(g.drivers, np.ravel(inv)):
            out[d] = totals[k]
    return out


@dataclass(frozen=True)
class CueVerdict:
    is_wardropian: bool
    all_beat_ue: bool
    worst_driver_margin: float


def verify_cue(schedule: CycleSchedule, ps: PathSet) -> CueVerdict:
    """Wardropian (every driver's summed deviation is exactly 0) and strictly faster than UE on average."""
    if ps.t_ue is None:
        raise MissingUeTime(f"OD {ps.od} has no UE travel time")
    zeta = schedule.length
    if zeta == 0:
        return CueVerdict(False, False, math.nan)
    totals = driver_totals_exact(schedule, ps.times)
    target = ps.t_hat_exact * zeta
    ue = Fraction(float(ps.t_ue)) * zeta
    wardropian = all(t == target for t in totals)
    beat = all(t < ue for t in totals)
    margin = float(min(ue - t for t in totals) / zeta)
    return CueVerdict(wardropian, beat, margin)


class Relation(str, Enum):
    A_LESS_OR_EQUAL = "ALessOrEqual"
    B_LESS_OR_EQUAL = "BLessOrEqual"
    EQUAL = "Equal"
    INCOMPARABLE = "Incomparable"


@dataclass(frozen=True)
class ParetoResult:
    relation: Relation
    strict: bool


def pareto_compare(a: CycleSchedule, b: CycleSchedule, ps: PathSet, ps_b: PathSet | None = None) -> ParetoResult:
    """Compare per-driver period-mean times exactly.

    ``ps_b`` gives the path times for ``b`` when it runs on different paths
    (a UE schedule, say); it defaults to ``ps``. ``strict`` means the
    dominance is strict for at least one driver.
    """
    if a.Q != b.Q:
        raise DriverSetMismatch(f"{a.Q} drivers vs {b.Q}")
    ps_b = ps_b or ps
    ma = [t / a.length for t in driver_totals_exact(a, ps.times)]
    mb = [t / b.length for t in driver_totals_exact(b, ps_b.times)]
    le = all(x <= y for x, y in zip(ma, mb))
    ge = all(x >= y for x, y in zip(ma, mb))
    if le and ge:
        return ParetoResult(Relation.EQUAL, False)
    if le:
        return ParetoResult(Relation.A_LESS_OR_EQUAL, True)
    if ge:
        return ParetoResult(Relation.B_LESS_OR_EQUAL, True)
    return ParetoResult(Relation.INCOMPARABLE, False)
