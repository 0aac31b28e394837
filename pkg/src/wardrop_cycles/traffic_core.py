"""UE and SO static traffic assignment by Frank-Wolfe with BPR link costs.

SO is solved as the UE of marginal link costs. Path flows are tracked through
the iterations: every all-or-nothing load keeps the fraction of its step that
later steps leave in place, which gives an exact path decomposition of the
final link flows. A gradient-projection pass over those path flows then
equalizes used-path times, which Frank-Wolfe alone leaves loose.
"""
from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .pathset import Path, PathSet
from .tntp_io import DemandTable, RawNetworkFile

__all__ = [
    "Objective",
    "SolverConfig",
    "Network",
    "LinkState",
    "AssignmentResult",
    "DisconnectedOD",
    "NoConvergence",
    "NegativeFlow",
    "ZeroSystemTime",
    "MismatchedODSets",
    "solve_assignment",
    "total_system_time",
    "price_of_anarchy",
    "discretize",
    "build_pathsets",
    "od_fairness_report",
    "round_half_up",
    "od_mean_times",
    "FairnessRow",
]


class Objective(str, Enum):
    UE = "UE"
    SO = "SO"


class DisconnectedOD(ValueError):
    def __init__(self, pairs):
        self.pairs = list(pairs)
        shown = ", ".join(map(str, self.pairs[:10]))
        more = "" if len(self.pairs) <= 10 else f" (+{len(self.pairs) - 10} more)"
        super().__init__(f"no directed path for OD pairs: {shown}{more}")


class NoConvergence(UserWarning):
    pass


class NegativeFlow(ValueError):
    pass


class ZeroSystemTime(ZeroDivisionError):
    pass


class MismatchedODSets(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    relative_gap_target: float = 1e-4
    max_iterations: int = 2000
    line_search_tolerance: float = 1e-10
    path_flow_floor: float = 1e-3
    # path-based equilibration after Frank-Wolfe; target is gap target * factor
    polish_factor: float = 1e-2
    polish_max_iterations: int = 200

    def __post_init__(self):
        if self.polish_factor < 0 or self.polish_max_iterations < 0:
            raise ValueError("polish settings must be nonnegative")
        for name in ("relative_gap_target", "max_iterations", "line_search_tolerance", "path_flow_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True, eq=False)
class Network:
    """Directed network with BPR link performance ``t0 * (1 + b * (q/c)**power)``.

    Node ids are 1-based as in TNTP files; link indices are 0-based positions
    in file order.
    """

    node_count: int
    tails: np.ndarray
    heads: np.ndarray
    free_flow_time: np.ndarray
    capacity: np.ndarray
    b: np.ndarray
    power: np.ndarray
    first_through_node: int = 1
    out_links: tuple = field(init=False, repr=False)

    def __post_init__(self):
        out: list[list[int]] = [[] for _ in range(self.node_count + 1)]
        for idx, tail in enumerate(self.tails):
            out[int(tail)].append(idx)
        object.__setattr__(self, "out_links", tuple(tuple(x) for x in out))

    @classmethod
    def from_raw(cls, raw: RawNetworkFile) -> "Network":
        arr = lambda attr, dt=float: np.array([getattr(l, attr) for l in raw.links], dtype=dt)  # noqa: E731
        return cls(
            raw.node_count,
            arr("init_node", np.int64),
            arr("term_node", np.int64),
            arr("free_flow_time"),
            arr("capacity"),
            arr("b"),
            arr("power"),
            raw.first_through_node,
        )

    @classmethod
    def from_links(cls, links: Sequence[tuple], node_count: int | None = None) -> "Network":
        """Build from ``(tail, head, t0, capacity, b, power)`` tuples."""
        a = np.array(links, dtype=float)
        n = node_count or int(a[:, :2].max())
        return cls(n, a[:, 0].astype(np.int64), a[:, 1].astype(np.int64), a[:, 2], a[:, 3], a[:, 4], a[:, 5])

    @property
    def link_count(self) -> int:
        return len(self.tails)

    def link_time(self, flow: np.ndarray) -> np.ndarray:
        return self.free_flow_time * (1.0 + self.b * (flow / self.capacity) ** self.power)

    def marginal_time(self, flow: np.ndarray) -> np.ndarray:
        # d/dq [q t(q)] = t0 (1 + b (1+p) (q/c)^p)
        return self.free_flow_time * (1.0 + self.b * (1.0 + self.power) * (flow / self.capacity) ** self.power)

    def cost_derivative(self, flow: np.ndarray, marginal: bool = False) -> np.ndarray:
        ratio = flow / self.capacity
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.free_flow_time * self.b * self.power * np.where(flow > 0, ratio ** (self.power - 1), 0.0) / self.capacity
        d = np.nan_to_num(d, nan=0.0, posinf=0.0)
        return d * (1.0 + self.power) if marginal else d

    def cost_at(self, idx: np.ndarray, flow: np.ndarray, marginal: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """(cost, d cost / d flow) of the links ``idx`` at ``flow``."""
        t0, b, c, p = self.free_flow_time[idx], self.b[idx], self.capacity[idx], self.power[idx]
        k = 1.0 + p if marginal else 1.0
        ratio = flow / c
        cost = t0 * (1.0 + k * b * ratio**p)
        with np.errstate(divide="ignore", invalid="ignore"):
            der = np.where(flow > 0, k * t0 * b * p * ratio ** (p - 1) / c, np.where(p == 1, k * t0 * b / c, 0.0))
        return cost, der

    def beckmann(self, flow: np.ndarray) -> float:
        ratio = flow / self.capacity
        integral = self.free_flow_time * (flow + self.b * self.capacity * ratio ** (self.power + 1) / (self.power + 1))
        return float(integral.sum())

    def shortest_tree(self, origin: int, cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Label-setting shortest paths from ``origin``.

        Returns ``(dist, pred_link)`` indexed by node id; ties keep the
        smallest predecessor link index. Zones below ``first_through_node``
        other than the origin are not expanded.
        """
        n = self.node_count
        dist = np.full(n + 1, math.inf)
        pred = np.full(n + 1, -1, dtype=np.int64)
        done = np.zeros(n + 1, dtype=bool)
        dist[origin] = 0.0
        heap = [(0.0, origin)]
        heads = self.heads
        ftn = self.first_through_node
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            if u != origin and u < ftn:
                continue
            for idx in self.out_links[u]:
                v = heads[idx]
                nd = d + cost[idx]
                if nd < dist[v] or (nd == dist[v] and not done[v] and idx < pred[v]):
                    if nd < dist[v]:
                        dist[v] = nd
                        heapq.heappush(heap, (nd, int(v)))
                    pred[v] = idx
        return dist, pred

    def trace_path(self, pred: np.ndarray, origin: int, dest: int) -> tuple[int, ...]:
        links = []
        node = dest
        while node != origin:
            idx = pred[node]
            if idx < 0:
                raise DisconnectedOD([(origin, dest)])
            links.append(int(idx))
            node = int(self.tails[idx])
        return tuple(reversed(links))


@dataclass(frozen=True)
class LinkState:
    flow: np.ndarray
    time: np.ndarray


@dataclass
class AssignmentResult:
    objective: Objective
    state: LinkState
    paths: dict[tuple[int, int], list[tuple[tuple[int, ...], float]]]
    demand: dict[tuple[int, int], float]
    relative_gap: float
    iterations: int
    converged: bool
    objective_history: list[float] = field(default_factory=list)
    gap_history: list[float] = field(default_factory=list)
    fw_iterations: int = 0
    polish_iterations: int = 0

    @property
    def total_time(self) -> float:
        return float(np.dot(self.state.flow, self.state.time))

    def path_time(self, links: tuple[int, ...]) -> float:
        return math.fsum(self.state.time[list(links)]) if links else 0.0


def _od_demand(demand: DemandTable | Mapping[tuple[int, int], float]) -> dict[tuple[int, int], float]:
    if isinstance(demand, DemandTable):
        return demand.assignable()
    out = {}
    for od in sorted(demand):
        q = float(demand[od])
        if q < 0:
            raise ValueError(f"negative demand for {od}")
        if od[0] != od[1] and q > 0:
            out[od] = q
    return out


def _all_or_nothing(net: Network, cost: np.ndarray, by_origin: dict[int, list[tuple[int, float]]]):
    """Return (aux link flows, {od: path}, shortest-path total cost)."""
    y = np.zeros(net.link_count)
    paths: dict[tuple[int, int], tuple[int, ...]] = {}
    sptt = 0.0
    for o, dests in by_origin.items():
        dist, pred = net.shortest_tree(o, cost)
        for d, q in dests:
            p = net.trace_path(pred, o, d)
            paths[(o, d)] = p
            if p:
                y[list(p)] += q
            sptt += q * dist[d]
    return y, paths, sptt


def _line_search(net: Network, x: np.ndarray, direction: np.ndarray, cost_fn, tol: float) -> float:
    """Exact step by bisection on the directional derivative over [0, 1]."""
    def slope(a):
        return float(np.dot(direction, cost_fn(x + a * direction)))

    if slope(1.0) <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def solve_assignment(
    net: Network,
    demand: DemandTable | Mapping[tuple[int, int], float],
    objective: Objective | str = Objective.UE,
    cfg: SolverConfig | None = None,
) -> AssignmentResult:
    """Frank-Wolfe UE (BPR costs) or SO (marginal costs) with path-flow tracking.

    Stops when the relative gap ``(c.x - c.y) / c.x`` drops to the target or
    after ``max_iterations`` (a NoConvergence warning; the last iterate is
    returned with its gap). Raises DisconnectedOD before iterating if any
    demanded OD has no path.
    """
    cfg = cfg or SolverConfig()
    objective = Objective(objective)
    od_q = _od_demand(demand)
    cost_fn = net.link_time if objective is Objective.UE else net.marginal_time
    obj_fn = net.beckmann if objective is Objective.UE else (lambda f: float(np.dot(f, net.link_time(f))))

    by_origin: dict[int, list[tuple[int, float]]] = {}
    for (o, d), q in od_q.items():
        by_origin.setdefault(o, []).append((d, q))

    ff = net.free_flow_time.copy()
    missing = []
    for o, dests in by_origin.items():
        dist, _ = net.shortest_tree(o, ff)
        missing += [(o, d) for d, _ in dests if not math.isfinite(dist[d])]
    if missing:
        raise DisconnectedOD(missing)

    x, aon_paths, _ = _all_or_nothing(net, cost_fn(np.zeros(net.link_count)), by_origin)
    # path weights are stored divided by a running scale so a step costs O(1)
    # per new path rather than O(all paths)
    scale = 1.0
    weights: dict[tuple[int, int], dict[tuple[int, ...], float]] = {od: {p: od_q[od]} for od, p in aon_paths.items()}

    gap = math.inf
    history = [obj_fn(x)]
    gaps = []
    it = 0
    converged = False
    while True:
        c = cost_fn(x)
        y, aon_paths, sptt = _all_or_nothing(net, c, by_origin)
        tstt = float(np.dot(c, x))
        gap = (tstt - sptt) / tstt if tstt > 0 else 0.0
        gaps.append(gap)
        if gap <= cfg.relative_gap_target:
            converged = True
            break
        if it >= cfg.max_iterations:
            break
        it += 1
        direction = y - x
        alpha = _line_search(net, x, direction, cost_fn, cfg.line_search_tolerance)
        x = x + alpha * direction
        if alpha >= 1.0:
            scale = 1.0
            weights = {od: {} for od in weights}
        else:
            scale *= 1.0 - alpha
        for od, p in aon_paths.items():
            w = weights[od]
            w[p] = w.get(p, 0.0) + alpha * od_q[od] / scale
        if scale < 1e-150:
            for w in weights.values():
                for p in w:
                    w[p] *= scale
            scale = 1.0
        history.append(obj_fn(x))

    fw_iterations = it
    paths = {od: {p: f * scale for p, f in w.items()} for od, w in weights.items()}
    polish_it = 0
    if cfg.polish_factor > 0 and cfg.polish_max_iterations > 0:
        target = cfg.relative_gap_target * cfg.polish_factor
        x, gap, polish_it = _polish_paths(net, paths, od_q, by_origin, objective, target, cfg.polish_max_iterations)
        converged = converged or gap <= cfg.relative_gap_target
        history.append(obj_fn(x))
        gaps.append(gap)

    if not converged:
        warnings.warn(
            f"{objective.value} assignment stopped at {it} iterations with relative gap {gap:.3g}",
            NoConvergence,
            stacklevel=2,
        )

    od_paths = {od: _prune(list(w.items()), od_q[od], cfg.path_flow_floor) for od, w in paths.items()}
    # link flows are reported as the exact sum of the pruned path flows
    x = np.zeros(net.link_count)
    for plist in od_paths.values():
        for p, f in plist:
            x[list(p)] += f
    state = LinkState(x, net.link_time(x))
    return AssignmentResult(
        objective, state, od_paths, od_q, gap, it + polish_it, converged, history, gaps, fw_iterations, polish_it
    )


def _shift_to_meet(net, x, p_only, b_only, avail, marginal):
    """Flow to move off ``p_only`` links onto ``b_only`` links so both sides cost the same.

    The cost difference is decreasing in the amount moved, so a safeguarded
    Newton iteration on [0, avail] finds the root; each such move lowers the
    objective.
    """
    def g(m):
        cp, dp = net.cost_at(p_only, np.maximum(x[p_only] - m, 0.0), marginal)
        cb, db = net.cost_at(b_only, x[b_only] + m, marginal)
        return math.fsum(cp) - math.fsum(cb), float(dp.sum() + db.sum())

    g0, d0 = g(0.0)
    if g0 <= 0:
        return 0.0
    ga, _ = g(avail)
    if ga >= 0:
        return avail
    lo, hi = 0.0, avail
    m = min(avail, g0 / d0) if d0 > 0 else 0.5 * avail
    for _ in range(60):
        val, der = g(m)
        if val > 0:
            lo = m
        else:
            hi = m
        if abs(val) <= 1e-13 * (abs(g0) + 1.0) or hi - lo <= 1e-15 * (avail + 1.0):
            break
        step = m + val / der if der > 0 else None
        m = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
    return lo if hi - lo <= 1e-15 * (avail + 1.0) else m


def _polish_paths(net, paths, od_q, by_origin, objective, target, max_iter):
    """Gradient projection on path flows with shortest-path column generation.

    For each OD, shifts flow from every dearer path to the cheapest one until
    the two path costs meet. Mutates ``paths``; returns (link flows, relative
    gap, iterations).
    """
    marginal = objective is Objective.SO
    cost_fn = net.marginal_time if marginal else net.link_time
    x = np.zeros(net.link_count)
    for od, w in paths.items():
        for p, f in w.items():
            x[list(p)] += f
    gap = math.inf
    it = 0
    while True:
        c = cost_fn(x)
        sptt = 0.0
        for o, dests in by_origin.items():
            dist, pred = net.shortest_tree(o, c)
            for d, q in dests:
                paths[(o, d)].setdefault(net.trace_path(pred, o, d), 0.0)
                sptt += q * dist[d]
        tstt = float(np.dot(c, x))
        gap = (tstt - sptt) / tstt if tstt > 0 else 0.0
        if gap <= target or it >= max_iter:
            break
        it += 1
        for od in sorted(paths):
            w = paths[od]
            if len(w) < 2:
                continue
            c = cost_fn(x)
            best = min(w, key=lambda p: (math.fsum(c[list(p)]), p))
            best_set = set(best)
            for p in sorted(w):
                if p == best or w[p] <= 0:
                    continue
                p_set = set(p)
                p_only = np.array(sorted(p_set - best_set), dtype=np.int64)
                b_only = np.array(sorted(best_set - p_set), dtype=np.int64)
                move = _shift_to_meet(net, x, p_only, b_only, w[p], marginal)
                if move <= 0:
                    continue
                w[p] -= move
                w[best] += move
                x[p_only] -= move
                x[b_only] += move
    for w in paths.values():
        for p in [p for p, f in w.items() if f <= 0]:
            del w[p]
    np.maximum(x, 0.0, out=x)
    return x, gap, it


def _prune(flows: list[tuple[tuple[int, ...], float]], q: float, floor: float):
    """Drop paths under ``floor`` and rescale the rest to carry the OD demand."""
    kept = [(p, f) for p, f in flows if f >= floor]
    if not kept:
        kept = [max(flows, key=lambda pf: pf[1])]
    total = math.fsum(f for _, f in kept)
    # sort for deterministic output: by flow descending, then link sequence
    kept = [(p, f * q / total) for p, f in kept]
    kept.sort(key=lambda pf: (-pf[1], pf[0]))
    return kept


def total_system_time(net: Network, state: LinkState) -> float:
    """Sum over links of flow times time, in minutes."""
    return float(np.dot(state.flow, state.time))


def price_of_anarchy(ue_total: float, so_total: float) -> float:
    """UE total time over SO total time (round to 2 decimals for reports)."""
    if so_total <= 0:
        raise ZeroSystemTime("system-optimal total time must be positive")
    return ue_total / so_total


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def discretize(flows: Sequence[float], q_target: int, times: Sequence[float] | None = None) -> np.ndarray:
    """Largest-remainder apportionment of real path flows to integers summing to ``q_target``.

    Remaining units go to the largest fractional parts, ties to the shorter
    path time and then the lower index.
    """
    f = np.asarray(flows, dtype=float)
    if np.any(f < 0):
        raise NegativeFlow("path flows must be nonnegative")
    if q_target < 0:
        raise NegativeFlow("target count must be nonnegative")
    t = np.zeros(len(f)) if times is None else np.asarray(times, dtype=float)
    base = np.floor(f).astype(np.int64)
    rem = f - base
    remaining = int(q_target) - int(base.sum())
    order = sorted(range(len(f)), key=lambda k: (-rem[k], t[k], k))
    if remaining >= 0:
        i = 0
        while remaining > 0 and order:
            base[order[i % len(order)]] += 1
            remaining -= 1
            i += 1
    else:
        # raw flows overshoot the target: take back from the smallest remainders
        for k in reversed(order * (1 + (-remaining) // max(1, len(order)))):
            if remaining == 0:
                break
            if base[k] > 0:
                base[k] -= 1
                remaining += 1
    return base


def build_pathsets(
    result: AssignmentResult,
    ue_times: Mapping[tuple[int, int], float] | None = None,
) -> dict[tuple[int, int], PathSet]:
    """Discretize every OD of ``result`` into a PathSet with frozen path times.

    ODs whose rounded demand is zero are skipped.
    """
    out = {}
    for od, raw in result.paths.items():
        q = round_half_up(result.demand[od])
        if q == 0:
            continue
        times = [result.path_time(p) for p, _ in raw]
        counts = discretize([f for _, f in raw], q, times)
        paths = tuple(Path(tuple(p), int(c), t) for (p, _), c, t in zip(raw, counts, times) if c > 0)
        t_ue = None if ue_times is None else ue_times.get(od)
        out[od] = PathSet(paths, od, t_ue, result.demand[od])
    return out


def od_mean_times(result: AssignmentResult) -> dict[tuple[int, int], float]:
    """Flow-weighted mean path time per OD (before discretization)."""
    out = {}
    for od, raw in result.paths.items():
        total = math.fsum(f for _, f in raw)
        out[od] = math.fsum(f * result.path_time(p) for p, f in raw) / total
    return out


@dataclass(frozen=True)
class FairnessRow:
    od: tuple[int, int]
    t_hat_so: float
    t_ue: float
    violated: bool


def od_fairness_report(
    pathsets: Mapping[tuple[int, int], PathSet],
    ue_times: Mapping[tuple[int, int], float],
) -> tuple[list[FairnessRow], float]:
    """Flag ODs whose SO mean time exceeds their UE time; returns rows and the violating fraction."""
    if set(pathsets) != set(ue_times):
        raise MismatchedODSets(
            f"{len(set(pathsets) ^ set(ue_times))} OD pairs are present in only one of the two assignments"
        )
    rows = []
    for od in sorted(pathsets):
        t_so = pathsets[od].t_hat
        t_ue = float(ue_times[od])
        rows.append(FairnessRow(od, t_so, t_ue, t_so > t_ue))
    frac = sum(r.violated for r in rows) / len(rows) if rows else 0.0
    return rows, frac
