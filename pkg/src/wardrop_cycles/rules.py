"""Day-by-day assignment rules and the multi-day simulator.

The greedy rule looks only at each driver's cumulative deviation: the most
delayed drivers so far get the fastest slots tomorrow. Simulation runs in
units scaled by Q (``Q*t_k - sum Q_j t_j``), which are exact for integer
times, and converts back to minutes for reporting.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .pathset import PathSet
from .schedule import CycleSchedule, DailyAssignment, Provenance
from .tntp_io import ReportTable

__all__ = [
    "EmptyPathSet",
    "WrongProvenance",
    "InconsistentFlows",
    "Greedy",
    "FixedCycle",
    "RandomRule",
    "RuleState",
    "SimulationTrace",
    "BoundCheck",
    "BitDay",
    "greedy_order",
    "greedy_step",
    "simulate",
    "greedy_bounds",
    "greedy_bound_check",
    "bit_greedy_step",
    "oscillation_band",
    "trace_tables",
]


class EmptyPathSet(ValueError):
    pass


class WrongProvenance(ValueError):
    pass


class InconsistentFlows(ValueError):
    pass


@dataclass(frozen=True)
class Greedy:
    name = "greedy"


@dataclass(frozen=True)
class FixedCycle:
    schedule: CycleSchedule
    name = "cycle"


@dataclass(frozen=True)
class RandomRule:
    seed: int
    name = "random"


@dataclass(frozen=True)
class RuleState:
    """Cumulative deviation per driver (minutes) after ``day`` days."""

    cumulative: np.ndarray
    day: int = 0
    rng_seed: int | None = None

    @classmethod
    def fresh(cls, Q: int, rng_seed: int | None = None) -> "RuleState":
        return cls(np.zeros(Q), 0, rng_seed)


def greedy_order(cumulative: np.ndarray) -> np.ndarray:
    """Drivers by cumulative deviation, largest first; equal values by ascending id."""
    return np.argsort(-np.asarray(cumulative), kind="stable")


def greedy_step(state: RuleState | np.ndarray, ps: PathSet) -> DailyAssignment:
    """Assign the r-th most delayed driver to slot r (slots in ascending time)."""
    cum = state.cumulative if isinstance(state, RuleState) else np.asarray(state, dtype=float)
    day = state.day if isinstance(state, RuleState) else 0
    if ps.Q == 0:
        raise EmptyPathSet("no drivers")
    if len(cum) != ps.Q:
        raise ValueError(f"ledger has {len(cum)} drivers, path set {ps.Q}")
    paths = np.empty(ps.Q, dtype=np.int64)
    paths[greedy_order(cum)] = ps.slots
    return DailyAssignment(paths, day)


@dataclass
class SimulationTrace:
    """Everything recorded over ``horizon`` days; cumulative deviations in minutes."""

    rule: str
    od: tuple[int, int]
    Q: int
    t_hat: float
    paths: np.ndarray  # horizon x Q path indices
    cumulative_scaled: np.ndarray  # horizon x Q, minutes times Q
    I: np.ndarray
    I_bar: np.ndarray
    min_mean: np.ndarray
    max_mean: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.I)

    @property
    def cumulative(self) -> np.ndarray:
        return self.cumulative_scaled / self.Q

    def deviations(self, ps: PathSet) -> np.ndarray:
        return ps.times[self.paths] - ps.t_hat

    def assignment(self, j: int) -> DailyAssignment:
        return DailyAssignment(self.paths[j], j)

    def as_schedule(self) -> CycleSchedule:
        prov = Provenance.GREEDY_RULE if self.rule == Greedy.name else Provenance.CUSTOM
        return CycleSchedule.from_days(list(self.paths), prov, self.Q)


def _assignments(ps: PathSet, rule, horizon: int):
    """Yield (path index array, scaled deviation array) per day."""
    w = ps.scaled_deviations
    slots = ps.slots
    wslots = w[slots]
    if isinstance(rule, Greedy):
        cum = np.zeros(ps.Q)
        paths = np.empty(ps.Q, dtype=np.int64)
        for _ in range(horizon):
            order = np.argsort(-cum, kind="stable")
            paths[order] = slots
            cum[order] += wslots
            yield paths.copy()
    elif isinstance(rule, FixedCycle):
        sched = rule.schedule
        if sched.Q != ps.Q:
            raise ValueError(f"schedule has {sched.Q} drivers, path set {ps.Q}")
        L = sched.length
        if L == 0:
            raise ValueError("empty schedule")
        for j in range(horizon):
            yield sched.assignment(j % L).paths
    elif isinstance(rule, RandomRule):
        rng = np.random.default_rng(rule.seed)
        for _ in range(horizon):
            yield slots[rng.permutation(ps.Q)]
    else:
        raise TypeError(f"unknown rule {rule!r}")


def simulate(ps: PathSet, rule=Greedy(), horizon: int = 50) -> SimulationTrace:
    """Run ``rule`` for ``horizon`` days, recording assignments and inequity."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if ps.Q == 0:
        raise EmptyPathSet("no drivers")
    Q = ps.Q
    w = ps.scaled_deviations
    paths = np.empty((horizon, Q), dtype=np.int64)
    for j, p in enumerate(_assignments(ps, rule, horizon)):
        paths[j] = p
    cum = np.cumsum(w[paths], axis=0)
    real = cum / Q
    I = np.einsum("ij,ij->i", real, real) / Q
    days = np.arange(1, horizon + 1)[:, None]
    means = ps.t_hat + real / days
    return SimulationTrace(
        rule.name, tuple(ps.od), Q, ps.t_hat, paths, cum, I, I / ps.t_hat, means.min(axis=1), means.max(axis=1)
    )


@dataclass(frozen=True)
class BoundCheck:
    ok: bool
    lower: float
    upper: float
    M: float
    K_plus: int
    K_minus: int
    low_margin: float  # min over drivers/days of cumulative - lower
    high_margin: float  # min over drivers/days of upper - cumulative


def greedy_bounds(ps: PathSet) -> tuple[float, float, float, int, int]:
    """(lower, upper, M, K+, K-) for cumulative deviations under the greedy rule."""
    dev = ps.times[ps.slots] - ps.t_hat
    w = ps.scaled_deviations[ps.slots]
    M = float(np.max(np.abs(dev))) if len(dev) else 0.0
    kp = int(np.sum(w >= 0))
    km = int(np.sum(w < 0))
    return -M * (km + 1), M * (kp + 1), M, kp, km


def greedy_bound_check(trace: SimulationTrace, ps: PathSet) -> BoundCheck:
    """Every driver's cumulative deviation stays in [-M(K- + 1), M(K+ + 1)] on every day."""
    if trace.rule != Greedy.name:
        raise WrongProvenance(f"trace comes from rule {trace.rule!r}, not greedy")
    lo, hi, M, kp, km = greedy_bounds(ps)
    # compare in scaled units so integer instances are checked exactly
    Ms = float(np.max(np.abs(ps.scaled_deviations))) if ps.K else 0.0
    c = trace.cumulative_scaled
    low = float((c + Ms * (km + 1)).min()) / ps.Q
    high = float((Ms * (kp + 1) - c).min()) / ps.Q
    return BoundCheck(low >= 0 and high >= 0, lo, hi, M, kp, km, low, high)


def oscillation_band(trace: SimulationTrace, last: int = 10) -> float:
    """max - min of I over the final ``last`` days."""
    tail = trace.I[-last:]
    return float(tail.max() - tail.min())


# -- bit-of-traffic mode ---------------------------------------------------------


@dataclass(frozen=True)
class BitDay:
    """One day's flow between two points: who travels and the paths they share."""

    day: int
    participants: tuple[int, ...]
    flows: tuple[int, ...]
    times: tuple[float, ...]

    def __post_init__(self):
        if sum(self.flows) != len(self.participants):
            raise InconsistentFlows(f"flows sum to {sum(self.flows)} but {len(self.participants)} participants")
        if len(set(self.participants)) != len(self.participants):
            raise InconsistentFlows("duplicate participant ids")
        if len(self.flows) != len(self.times) or any(q < 0 for q in self.flows):
            raise InconsistentFlows("flows and times must pair up and be nonnegative")

    @property
    def t_hat_day(self) -> float:
        return sum(q * t for q, t in zip(self.flows, self.times)) / sum(self.flows)


def bit_greedy_step(ledger: Mapping[int, float], day: BitDay) -> tuple[dict[int, int], dict[int, float]]:
    """Greedy assignment of today's participants using relative cumulative deviations.

    Returns ``(driver -> path index, updated ledger)``. Each participant's
    entry grows by ``(t - t_hat_day) / t_hat_day``; absent drivers are untouched.
    """
    used = [k for k in sorted(range(len(day.times)), key=lambda k: (day.times[k], k)) if day.flows[k] > 0]
    slots = [k for k in used for _ in range(day.flows[k])]
    people = sorted(day.participants, key=lambda d: (-ledger.get(d, 0.0), d))
    t_hat = day.t_hat_day
    assign = dict(zip(people, slots))
    new = dict(ledger)
    for d, k in assign.items():
        new[d] = new.get(d, 0.0) + (day.times[k] - t_hat) / t_hat
    return assign, new


# -- reporting --------------------------------------------------------------------


def trace_tables(traces: Mapping[tuple[int, int], SimulationTrace], pathsets: Mapping[tuple[int, int], PathSet] | None = None,
                 detail: bool = False) -> list[ReportTable]:
    """Aggregate table per (od, day), plus per-driver detail when ``detail`` and path sets are given."""
    agg = []
    det = []
    for od in sorted(traces):
        tr = traces[od]
        for j in range(tr.horizon):
            agg.append({
                "origin": od[0], "destination": od[1], "day": j + 1, "I": float(tr.I[j]),
                "I_bar": float(tr.I_bar[j]), "min_mean": float(tr.min_mean[j]), "max_mean": float(tr.max_mean[j]),
            })
        if detail and pathsets is not None:
            dev = tr.deviations(pathsets[od])
            cum = tr.cumulative
            for j in range(tr.horizon):
                for i in range(tr.Q):
                    det.append({
                        "origin": od[0], "destination": od[1], "day": j + 1, "driver": i,
                        "path": int(tr.paths[j, i]), "deviation": float(dev[j, i]), "cumulative": float(cum[j, i]),
                    })
    out = [ReportTable("simulation_aggregate", agg)]
    if detail:
        out.append(ReportTable("simulation_detail", det))
    return out
