"""Per-OD path sets with integer driver counts and frozen path times."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = ["Path", "PathSet", "toy_pathset", "save_archive", "load_archive"]


@dataclass(frozen=True)
class Path:
    links: tuple[int, ...]
    flow: int
    time: float


@dataclass(frozen=True)
class PathSet:
    """Paths of one OD pair carrying ``flow`` drivers each (zero-flow paths are not stored).

    ``t_ue`` is the User-Equilibrium travel time on the OD, when known.
    """

    paths: tuple[Path, ...]
    od: tuple[int, int] = (0, 0)
    t_ue: float | None = None
    demand: float | None = field(default=None, compare=False)

    def __post_init__(self):
        for p in self.paths:
            if int(p.flow) != p.flow or p.flow <= 0:
                raise ValueError(f"path flows must be positive integers, got {p.flow}")
            if not math.isfinite(p.time):
                raise ValueError("path times must be finite")

    @classmethod
    def from_flows(
        cls,
        flows: Sequence[int],
        times: Sequence[float],
        od: tuple[int, int] = (0, 0),
        t_ue: float | None = None,
        links: Sequence[tuple[int, ...]] | None = None,
    ) -> "PathSet":
        if len(flows) != len(times):
            raise ValueError("flows and times differ in length")
        links = links if links is not None else [()] * len(flows)
        paths = tuple(
            Path(tuple(lk), int(q), float(t)) for q, t, lk in zip(flows, times, links) if int(q) > 0
        )
        return cls(paths, tuple(od), t_ue)

    @property
    def K(self) -> int:
        return len(self.paths)

    @cached_property
    def flows(self) -> np.ndarray:
        return np.array([p.flow for p in self.paths], dtype=np.int64)

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([p.time for p in self.paths], dtype=float)

    @property
    def Q(self) -> int:
        return int(sum(p.flow for p in self.paths))

    @property
    def total_time(self) -> float:
        return math.fsum(p.flow * p.time for p in self.paths)

    @property
    def t_hat(self) -> float:
        return self.total_time / self.Q if self.Q else math.nan

    @cached_property
    def t_hat_exact(self) -> Fraction:
        total = sum(Fraction(p.time) * p.flow for p in self.paths)
        return total / self.Q

    @cached_property
    def canonical_order(self) -> np.ndarray:
        """Path indices sorted by ascending time (ties by index)."""
        return np.array(sorted(range(self.K), key=lambda k: (self.paths[k].time, k)), dtype=np.int64)

    @cached_property
    def slots(self) -> np.ndarray:
        """Canonical unit-route slot layout: fastest path's slots first, contiguous per path."""
        order = self.canonical_order
        return np.repeat(order, self.flows[order])

    @cached_property
    def scaled_deviations(self) -> np.ndarray:
        """Per-path ``Q*t_k - sum_j Q_j t_j``; exact integers when times are integers."""
        total = self.total_time
        return self.Q * self.times - total

    @cached_property
    def integer_deviations(self) -> tuple[int, ...]:
        """Exact integers proportional to ``t_k - t_hat`` (a common positive scale for all paths)."""
        devs = [Fraction(p.time) - self.t_hat_exact for p in self.paths]
        den = math.lcm(*(d.denominator for d in devs)) if devs else 1
        return tuple(int(d * den) for d in devs)

    def to_dict(self) -> dict:
        return {
            "od": list(self.od),
            "Q": self.Q,
            "demand": self.demand,
            "t_hat": self.t_hat,
            "t_ue": self.t_ue,
            "paths": [{"links": list(p.links), "flow": p.flow, "time": p.time} for p in self.paths],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PathSet":
        paths = tuple(Path(tuple(p["links"]), int(p["flow"]), float(p["time"])) for p in d["paths"])
        ps = cls(paths, tuple(d["od"]), d.get("t_ue"), d.get("demand"))
        if "Q" in d and d["Q"] != ps.Q:
            raise ValueError(f"archive Q={d['Q']} disagrees with path flows (sum {ps.Q})")
        return ps


def toy_pathset(t_ue: float | None = None) -> PathSet:
    """The 18-driver, three-route illustration: flows 4/6/8 at 15/14/9 minutes."""
    return PathSet.from_flows([4, 6, 8], [15.0, 14.0, 9.0], od=(1, 2), t_ue=t_ue)


def save_archive(pathsets: Iterable[PathSet], path: str | os.PathLike, meta: dict | None = None) -> None:
    """Write PathSets as JSON: ``{"meta": {...}, "pathsets": [...]}``."""
    doc = {"meta": meta or {}, "pathsets": [ps.to_dict() for ps in pathsets]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_archive(path: str | os.PathLike) -> tuple[list[PathSet], dict]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return [PathSet.from_dict(d) for d in doc["pathsets"]], doc.get("meta", {})
