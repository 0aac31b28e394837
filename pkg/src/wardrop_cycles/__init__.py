"""Wardropian cycles: rotating drivers over system-optimal paths so each one's long-run mean travel time is the OD average."""
from .pathset import Path, PathSet, load_archive, save_archive, toy_pathset
from .schedule import CycleSchedule, DailyAssignment, DriverGroup, InconsistentAssignment, Provenance
from .traffic_core import Network, Objective, SolverConfig, build_pathsets, price_of_anarchy, solve_assignment
from .metrics import DeviationLedger, inequity, pareto_compare, verify_cue
from .cycles import balanced_ordering, full_cycle, gcd_cycle, partition_cycles, validate_cycle
from .rules import FixedCycle, Greedy, RandomRule, simulate

__version__ = "0.1.0"
