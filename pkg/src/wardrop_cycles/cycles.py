"""Constructions of Wardropian cycles and tools to check and recombine them.

Slots: the Q unit routes of a PathSet laid out path by path in ascending
time order (``PathSet.slots``). A seed assignment puts one driver on each
slot; shift constructions then move every driver ``step`` slots along that
layout per day.
"""
from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache, reduce
from itertools import combinations_with_replacement, product
from typing import Sequence

import numpy as np

from .metrics import DeviationLedger, driver_totals_exact
from .pathset import PathSet
from .schedule import CycleSchedule, DailyAssignment, DriverGroup, InconsistentAssignment, Provenance
from .tntp_io import ReportTable

__all__ = [
    "InvalidSeed",
    "LimitExceeded",
    "NotAPermutation",
    "LedgerLengthMismatch",
    "PartitionMode",
    "PartitionPlan",
    "ValidationReport",
    "seed_assignment",
    "cyclic_order_schedule",
    "full_cycle",
    "gcd_cycle",
    "partition_plan",
    "partition_cycles",
    "balanced_sequence",
    "balanced_ordering",
    "validate_cycle",
    "permuted_composition",
    "intercycle_objective",
    "intercycle_heuristic",
    "rota_table",
    "rota_summary",
    "save_rota_json",
]


class InvalidSeed(ValueError):
    pass


class LimitExceeded(ValueError):
    pass


class NotAPermutation(ValueError):
    pass


class LedgerLengthMismatch(ValueError):
    pass


def seed_assignment(ps: PathSet) -> DailyAssignment:
    """Driver r on slot r of the canonical layout."""
    return DailyAssignment(ps.slots.copy(), 0)


def _slot_drivers(ps: PathSet, A1: DailyAssignment | None) -> np.ndarray:
    """drivers[r] = driver sitting on canonical slot r under the seed."""
    if ps.Q == 0:
        raise InvalidSeed("empty path set")
    if A1 is None:
        return np.arange(ps.Q)
    try:
        A1.check(ps)
    except InconsistentAssignment as exc:
        raise InvalidSeed(str(exc)) from exc
    return np.concatenate([np.flatnonzero(A1.paths == k) for k in ps.canonical_order])


def cyclic_order_schedule(
    ps: PathSet, order: Sequence[int], step: int = 1, provenance: Provenance = Provenance.CUSTOM
) -> CycleSchedule:
    """Driver i starts at position i of ``order`` (path indices) and advances ``step`` positions a day."""
    order = np.asarray(order, dtype=np.int64)
    if len(order) != ps.Q or not np.array_equal(np.bincount(order, minlength=ps.K), ps.flows):
        raise InvalidSeed("order must contain path k exactly Q_k times")
    return CycleSchedule.cyclic(order, step, provenance)


def full_cycle(ps: PathSet, A1: DailyAssignment | None = None) -> CycleSchedule:
    """Shift every driver one slot per day: a cycle of length Q."""
    drivers = _slot_drivers(ps, A1)
    return CycleSchedule(ps.Q, (DriverGroup(drivers, order=ps.slots, step=1),), Provenance.FULL_SHIFT)


def gcd_cycle(ps: PathSet, A1: DailyAssignment | None = None) -> CycleSchedule:
    """Shift by M = gcd(Q_1..Q_K) slots per day: a cycle of length Q/M."""
    drivers = _slot_drivers(ps, A1)
    M = reduce(math.gcd, (int(q) for q in ps.flows))
    return CycleSchedule(ps.Q, (DriverGroup(drivers, order=ps.slots, step=M),), Provenance.GCD_SHIFT)


# -- partition into equal-mean groups ---------------------------------------


class PartitionMode(str, Enum):
    EXACT_SMALL = "ExactSmall"
    HEURISTIC = "Heuristic"


@dataclass(frozen=True)
class PartitionPlan:
    """Groups of unit routes with mean exactly t_hat, as per-path counts.

    ``atoms`` are the groups as found; ``groups`` merges atoms that are
    multiples of the same composition (they would run the same cycle).
    """

    groups: tuple[tuple[int, ...], ...]
    atoms: tuple[tuple[int, ...], ...]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(sum(g) for g in self.groups)

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(sum(g) // reduce(math.gcd, g) for g in self.groups)

    def means(self, ps: PathSet) -> tuple[Fraction, ...]:
        T = [Fraction(t) for t in ps.times]
        return tuple(sum((c * t for c, t in zip(g, T)), Fraction(0)) / sum(g) for g in self.groups)


def _merge(atoms: list[tuple[int, ...]]) -> tuple[tuple[int, ...], ...]:
    merged: dict[tuple[int, ...], list[int]] = {}
    for a in atoms:
        g = reduce(math.gcd, a)
        key = tuple(x // g for x in a)
        if key in merged:
            merged[key] = [x + y for x, y in zip(merged[key], a)]
        else:
            merged[key] = list(a)
    return tuple(tuple(v) for v in merged.values())


def _heuristic_atoms(flows: list[int], w: list[int], order: list[int], depth: int) -> list[tuple[int, ...]]:
    counts = list(flows)
    K = len(flows)
    atoms = []
    while sum(counts):
        found = None
        avail = [k for k in order if counts[k] > 0]
        for size in range(1, min(depth, sum(counts)) + 1):
            for combo in combinations_with_replacement(avail, size):
                if sum(w[k] for k in combo) != 0:
                    continue
                c = Counter(combo)
                if all(c[k] <= counts[k] for k in c):
                    found = tuple(c[k] for k in range(K))
                    break
            if found:
                break
        if not found:
            atoms.append(tuple(counts))
            break
        # the same subset stays the first hit while it fits, so take it as often as possible
        reps = min(counts[k] // found[k] for k in range(K) if found[k])
        atoms += [found] * reps
        counts = [c - reps * f for c, f in zip(counts, found)]
    return atoms


def _exact_atoms(flows: list[int], w: list[int]) -> list[tuple[int, ...]]:
    K = len(flows)

    @lru_cache(maxsize=None)
    def best(c: tuple[int, ...]):
        # -> (number of groups, -largest group, groups)
        if not any(c):
            return (0, 0, ())
        first = next(k for k in range(K) if c[k])
        top = None
        ranges = [range(1, c[k] + 1) if k == first else range(c[k] + 1) for k in range(K)]
        for d in product(*ranges):
            if sum(x * y for x, y in zip(d, w)) != 0:
                continue
            rest = best(tuple(x - y for x, y in zip(c, d)))
            cand = (rest[0] + 1, min(rest[1], -sum(d)) if rest[0] else -sum(d), (d,) + rest[2])
            if top is None or cand[:2] > top[:2]:
                top = cand
        return top

    return list(best(tuple(flows))[2])


def partition_plan(
    ps: PathSet, mode: PartitionMode | str = PartitionMode.HEURISTIC, depth: int = 4, limit: int = 20
) -> PartitionPlan:
    mode = PartitionMode(mode)
    flows = [int(q) for q in ps.flows]
    w = list(ps.integer_deviations)
    if mode is PartitionMode.EXACT_SMALL:
        if ps.Q > limit:
            raise LimitExceeded(f"exact partition limited to Q <= {limit}, got {ps.Q}")
        atoms = _exact_atoms(flows, w)
    else:
        atoms = _heuristic_atoms(flows, w, [int(k) for k in ps.canonical_order], depth)
    return PartitionPlan(_merge(atoms), tuple(atoms))


def partition_cycles(
    ps: PathSet, mode: PartitionMode | str = PartitionMode.HEURISTIC, depth: int = 4, limit: int = 20
) -> tuple[PartitionPlan, CycleSchedule]:
    """Split drivers into equal-mean groups and run a gcd shift inside each.

    Groups advance independently; the schedule's overall period is the lcm
    of the group periods, and ``group_lengths`` gives each group's own.
    """
    plan = partition_plan(ps, mode, depth, limit)
    queues = {int(k): list(np.flatnonzero(ps.slots == k)) for k in ps.canonical_order}
    groups = []
    for comp in plan.groups:
        drivers, order = [], []
        for k in ps.canonical_order:
            n = comp[k]
            drivers += queues[int(k)][:n]
            del queues[int(k)][:n]
            order += [int(k)] * n
        step = reduce(math.gcd, comp)
        groups.append(DriverGroup(np.array(drivers, dtype=np.int64), order=np.array(order), step=step))
    sched = CycleSchedule(ps.Q, tuple(groups), Provenance.PARTITION, {"group_sizes": plan.sizes})
    return plan, sched


# -- bounded-deviation ordering ----------------------------------------------


def balanced_sequence(ps: PathSet) -> np.ndarray:
    """Cyclic order of unit routes whose running deviation sum stays within one route's range.

    Above-average routes are taken largest first while the running sum is
    not positive, below-average routes most negative first otherwise.
    """
    w = ps.integer_deviations
    units = [int(k) for k in ps.slots]
    plus = sorted((k for k in units if w[k] >= 0), key=lambda k: -w[k])
    minus = sorted((k for k in units if w[k] < 0), key=lambda k: w[k])
    out, total, i, j = [], 0, 0, 0
    while i < len(plus) or j < len(minus):
        if (total <= 0 and i < len(plus)) or j == len(minus):
            k = plus[i]
            i += 1
        else:
            k = minus[j]
            j += 1
        out.append(k)
        total += w[k]
    return np.array(out, dtype=np.int64)


def balanced_ordering(ps: PathSet) -> CycleSchedule:
    """Driver i starts at position i of the balanced sequence and advances one position a day.

    Over any l consecutive days a driver's mean time is within
    (t_max - t_min)/l of t_hat.
    """
    if ps.Q == 0:
        raise InvalidSeed("empty path set")
    return CycleSchedule.cyclic(balanced_sequence(ps), 1, Provenance.BALANCED_ORDERING)


# -- validation ----------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    empty: bool
    length: int
    day_errors: tuple[str, ...]
    residuals: tuple[Fraction, ...] | None
    max_abs_residual: float
    wardropian: bool

    @property
    def ok(self) -> bool:
        return not self.empty and not self.day_errors and self.wardropian


def validate_cycle(schedule: CycleSchedule, ps: PathSet) -> ValidationReport:
    """Check every day's path loads and the exact per-driver deviation sum over one period."""
    L = schedule.length
    if L == 0 or schedule.Q == 0:
        return ValidationReport(True, 0, (), None, math.nan, False)
    errors = []
    if schedule.Q != ps.Q:
        errors.append(f"schedule has {schedule.Q} drivers, path set {ps.Q}")
        return ValidationReport(False, L, tuple(errors), None, math.nan, False)
    total = np.zeros(ps.K, dtype=np.int64)
    for gi, g in enumerate(schedule.groups):
        tab = g.local_table() if not g.cyclic else g.order[None, :]
        if tab.size and (tab.min() < 0 or tab.max() >= ps.K):
            errors.append(f"group {gi}: path index out of range")
            continue
        comp = np.bincount(tab[0], minlength=ps.K)
        for j, row in enumerate(tab[1:], start=1):
            if not np.array_equal(np.bincount(row, minlength=ps.K), comp):
                errors.append(f"day {j}: path loads {np.bincount(row, minlength=ps.K).tolist()} != {ps.flows.tolist()}")
        total += comp
    if not np.array_equal(total, ps.flows):
        errors.append(f"path loads {total.tolist()} != flows {ps.flows.tolist()}")
    if errors:
        return ValidationReport(False, L, tuple(errors), None, math.nan, False)
    target = ps.t_hat_exact * L
    res = tuple(t - target for t in driver_totals_exact(schedule, ps.times))
    worst = float(max(abs(r) for r in res))
    return ValidationReport(False, L, (), res, worst, all(r == 0 for r in res))


# -- recombination across iterations ----------------------------------------


def _check_perm(sigma, Q: int) -> np.ndarray:
    s = np.asarray(sigma, dtype=np.int64)
    if s.shape != (Q,) or not np.array_equal(np.sort(s), np.arange(Q)):
        raise NotAPermutation(f"not a permutation of 0..{Q - 1}")
    return s


def permuted_composition(base: CycleSchedule, sigmas: Sequence[Sequence[int]]) -> CycleSchedule:
    """Repeat ``base`` once per sigma; in iteration m driver i plays base driver ``sigmas[m][i]``."""
    perms = [_check_perm(s, base.Q) for s in sigmas]
    tab = base.path_matrix()
    days = np.concatenate([tab[:, s] for s in perms]) if perms else np.zeros((0, base.Q), np.int64)
    out = CycleSchedule.from_days(list(days), base.provenance, base.Q)
    out.meta.update(iterations=len(perms), base_length=base.length)
    return out


def _fresh_profile(base: CycleSchedule, ps: PathSet) -> tuple[np.ndarray, np.ndarray]:
    """(cumulative, progression) matrices, Q x zeta, for one iteration started from zero."""
    dev = ps.times[base.path_matrix()] - ps.t_hat  # zeta x Q
    cum = np.cumsum(dev, axis=0).T
    return cum, np.cumsum(cum, axis=1)


def _ledger_check(base: CycleSchedule, ledger: DeviationLedger) -> None:
    if ledger.Q != base.Q:
        raise LedgerLengthMismatch(f"ledger has {ledger.Q} drivers, cycle {base.Q}")
    if ledger.day_count == 0 or ledger.day_count % base.length:
        raise LedgerLengthMismatch(f"ledger covers {ledger.day_count} days, not whole iterations of {base.length}")


def intercycle_objective(
    base: CycleSchedule,
    ledger: DeviationLedger,
    sigma: Sequence[int],
    ps: PathSet,
    sign: str = "discontent",
    aggregate: str = "sum",
) -> float:
    """Score of running ``base`` once more with driver i in role ``sigma[i]``.

    Per driver, the max over all days so far of the progression entry
    (``sign="discontent"``) or of its negation (``sign="negated"``), then
    summed or maxed over drivers.
    """
    _ledger_check(base, ledger)
    s = _check_perm(sigma, base.Q)
    fc, fh = _fresh_profile(base, ps)
    c = ledger.cumulative[:, None]
    h = ledger.history[:, -1][:, None]
    j = np.arange(1, base.length + 1)[None, :]
    future = h + j * c + fh[s]
    full = np.concatenate([ledger.history, future], axis=1)
    if sign == "negated":
        full = -full
    elif sign != "discontent":
        raise ValueError("sign must be 'discontent' or 'negated'")
    per_driver = full.max(axis=1)
    if aggregate == "sum":
        return float(per_driver.sum())
    if aggregate == "max":
        return float(per_driver.max())
    raise ValueError("aggregate must be 'sum' or 'max'")


def intercycle_heuristic(
    base: CycleSchedule, ledger: DeviationLedger, ps: PathSet, current: Sequence[int] | None = None
) -> np.ndarray:
    """Next-iteration roles: the most discontented drivers get the roles that build the least discontent.

    Drivers are ranked by the max of their progression row (ties by id),
    roles by the max progression a fresh start in that role produces.
    Drivers tied on rank keep their ``current`` role when it falls in the
    block of roles handed to them. Returns sigma with driver i -> role sigma[i].
    """
    _ledger_check(base, ledger)
    cur = np.arange(base.Q) if current is None else _check_perm(current, base.Q)
    key = ledger.history.max(axis=1)
    _, fh = _fresh_profile(base, ps)
    role_rank = np.argsort(fh.max(axis=1), kind="stable")
    driver_rank = np.argsort(-key, kind="stable")
    sigma = np.empty(base.Q, dtype=np.int64)
    pos = 0
    while pos < base.Q:
        end = pos
        while end < base.Q and key[driver_rank[end]] == key[driver_rank[pos]]:
            end += 1
        block = list(driver_rank[pos:end])
        roles = list(role_rank[pos:end])
        keep = [d for d in block if cur[d] in roles]
        for d in keep:
            sigma[d] = cur[d]
        free = [r for r in roles if r not in {cur[d] for d in keep}]
        for d, r in zip(sorted(d for d in block if d not in keep), free):
            sigma[d] = r
        pos = end
    return sigma


# -- rota output ----------------------------------------------------------------


def rota_table(schedule: CycleSchedule, n_days: int | None = None, name: str | None = None) -> ReportTable:
    """Rows (day, driver, path), days counted from 1."""
    tab = schedule.path_matrix(n_days)
    rows = [{"day": j + 1, "driver": i, "path": int(k)} for j, row in enumerate(tab) for i, k in enumerate(row)]
    return ReportTable("rota", rows, name)


def rota_summary(schedule: CycleSchedule, ps: PathSet) -> dict:
    rep = validate_cycle(schedule, ps)
    return {
        "od": list(ps.od),
        "length": rep.length,
        "group_lengths": list(schedule.group_lengths),
        "provenance": schedule.provenance.value,
        "max_abs_residual": rep.max_abs_residual,
        "wardropian": rep.wardropian,
        "driver_means": [float(x) for x in schedule.driver_means(ps)] if rep.length else [],
    }


def save_rota_json(schedule: CycleSchedule, ps: PathSet, path: str | os.PathLike, n_days: int | None = None) -> None:
    doc = {"summary": rota_summary(schedule, ps), "days": schedule.path_matrix(n_days).tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
