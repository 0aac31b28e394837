import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wardrop_cycles import traffic_core as tc
from wardrop_cycles.pathset import PathSet
from wardrop_cycles.tntp_io import read_network, read_trips

# t1 = 1 + q, t2 = 2 + q as BPR links with capacity 1, power 1
TWO_LINKS = tc.Network.from_links([(1, 2, 1.0, 1.0, 1.0, 1.0), (1, 2, 2.0, 1.0, 0.5, 1.0)])


def bisect(f, lo, hi, n=200):
    for _ in range(n):
        mid = (lo + hi) / 2
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


def test_two_link_ue_boundary():
    res = tc.solve_assignment(TWO_LINKS, {(1, 2): 1.0}, "UE")
    assert res.converged
    assert res.state.flow == pytest.approx([1.0, 0.0], abs=1e-6)
    assert res.state.time[0] == pytest.approx(2.0, abs=1e-6)
    assert res.state.time[0] <= res.state.time[1] + 1e-9


def test_two_link_so_matches_calculus():
    # total q1(1+q1) + q2(2+q2) with q2 = 1 - q1; marginal costs equal at the optimum
    q1 = bisect(lambda q: (1 + 2 * q) - (2 + 2 * (1 - q)), 0.0, 1.0)
    total = q1 * (1 + q1) + (1 - q1) * (3 - q1)
    assert q1 == pytest.approx(0.75)
    assert total == pytest.approx(1.875)
    res = tc.solve_assignment(TWO_LINKS, {(1, 2): 1.0}, "SO")
    assert res.state.flow == pytest.approx([q1, 1 - q1], abs=1e-5)
    assert res.total_time == pytest.approx(total, abs=1e-8)


def test_total_system_time_cases():
    net = tc.Network.from_links([(1, 2, 3.0, 1.0, 0.0, 1.0)])
    assert tc.total_system_time(net, tc.LinkState(np.zeros(1), np.array([3.0]))) == 0
    assert tc.total_system_time(net, tc.LinkState(np.array([2.0]), np.array([3.0]))) == 6


def test_price_of_anarchy():
    assert tc.price_of_anarchy(5.0, 5.0) == 1.0
    assert tc.price_of_anarchy(7_480_157, 7_194_761) == pytest.approx(1.04, abs=0.005)
    with pytest.raises(tc.ZeroSystemTime):
        tc.price_of_anarchy(1.0, 0.0)


@pytest.mark.parametrize("flows, q, times, expected", [
    ((4.0, 6.0, 8.0), 18, None, (4, 6, 8)),
    ((1.5, 1.5), 3, (10, 12), (2, 1)),
    ((0.2, 0.2, 0.6), 1, None, (0, 0, 1)),
])
def test_discretize(flows, q, times, expected):
    assert tuple(tc.discretize(flows, q, times)) == expected


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=6))
def test_discretize_preserves_total(flows):
    q = tc.round_half_up(sum(flows))
    out = tc.discretize(flows, q)
    assert out.sum() == q
    assert np.all(np.abs(out - np.asarray(flows)) < 1 + 1e-9)


def test_disconnected_od():
    net = tc.Network.from_links([(1, 2, 1.0, 1.0, 0.15, 4.0)], node_count=3)
    with pytest.raises(tc.DisconnectedOD):
        tc.solve_assignment(net, {(1, 3): 5.0})


def test_iteration_cap_warns():
    net = tc.Network.from_links([(1, 2, 1.0, 1.0, 1.0, 2.0), (1, 2, 1.2, 1.0, 1.0, 2.0), (1, 2, 1.5, 2.0, 1.0, 2.0)])
    cfg = tc.SolverConfig(relative_gap_target=1e-12, max_iterations=1, polish_factor=0)
    with pytest.warns(tc.NoConvergence):
        res = tc.solve_assignment(net, {(1, 2): 3.0}, "UE", cfg)
    assert not res.converged
    assert res.relative_gap > 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        tc.SolverConfig(relative_gap_target=0)
    with pytest.raises(ValueError):
        tc.SolverConfig(polish_factor=-1)
    tc.SolverConfig(polish_factor=0)


def test_fairness_report():
    a = PathSet.from_flows((2,), (10.0,), od=(1, 2))
    b = PathSet.from_flows((1, 1), (9.0, 13.0), od=(1, 3))
    rows, frac = tc.od_fairness_report({(1, 2): a, (1, 3): b}, {(1, 2): 10.0, (1, 3): 10.5})
    assert [r.violated for r in rows] == [False, True]
    assert frac == 0.5
    with pytest.raises(tc.MismatchedODSets):
        tc.od_fairness_report({(1, 2): a}, {(1, 3): 1.0})


# -- random small networks -----------------------------------------------------------


@st.composite
def ring_instances(draw):
    n = draw(st.integers(3, 6))
    links = []
    for i in range(1, n + 1):
        j = i % n + 1
        for a, b in ((i, j), (j, i)):
            links.append((a, b, draw(st.floats(1, 10)), draw(st.floats(1, 20)), 0.15, 4.0))
    for _ in range(draw(st.integers(0, 4))):
        a, b = draw(st.integers(1, n)), draw(st.integers(1, n))
        if a != b:
            links.append((a, b, draw(st.floats(1, 10)), draw(st.floats(1, 20)), 0.15, 4.0))
    demand = {}
    for _ in range(draw(st.integers(1, 4))):
        o, d = draw(st.integers(1, n)), draw(st.integers(1, n))
        if o != d:
            demand[(o, d)] = draw(st.floats(1, 30))
    if not demand:
        demand[(1, 2)] = 10.0
    return tc.Network.from_links(links, n), demand


@settings(max_examples=25, deadline=None)
@given(ring_instances())
def test_so_never_worse_than_ue(inst):
    net, demand = inst
    cfg = tc.SolverConfig(relative_gap_target=1e-6)
    ue = tc.solve_assignment(net, demand, "UE", cfg)
    so = tc.solve_assignment(net, demand, "SO", cfg)
    assert so.total_time <= ue.total_time * (1 + 1e-6)


@settings(max_examples=25, deadline=None)
@given(ring_instances())
def test_path_flows_reproduce_link_flows(inst):
    net, demand = inst
    res = tc.solve_assignment(net, demand, "UE")
    x = np.zeros(net.link_count)
    for od, plist in res.paths.items():
        assert sum(f for _, f in plist) == pytest.approx(demand[od])
        for p, f in plist:
            assert net.tails[p[0]] == od[0] and net.heads[p[-1]] == od[1]
            x[list(p)] += f
    assert np.allclose(x, res.state.flow)


# -- Sioux Falls ---------------------------------------------------------------------


def max_used_spread(res, floor=1e-3):
    worst = 0.0
    for plist in res.paths.values():
        t = [res.path_time(p) for p, f in plist if f > floor]
        if t:
            worst = max(worst, max(t) - min(t))
    return worst


def test_sioux_falls_equilibration(sioux_falls):
    assert sioux_falls.ue.relative_gap <= 1e-4
    assert max_used_spread(sioux_falls.ue) <= 0.5


def test_sioux_falls_so_dominates(sioux_falls):
    assert sioux_falls.so.total_time < sioux_falls.ue.total_time


def test_spread_shrinks_with_gap(sioux_falls_files):
    net = tc.Network.from_raw(read_network(sioux_falls_files[0]))
    demand = read_trips(sioux_falls_files[1])
    spreads = [
        max_used_spread(tc.solve_assignment(net, demand, "UE", tc.SolverConfig(relative_gap_target=g)))
        for g in (1e-3, 1e-4, 1e-5)
    ]
    assert spreads[0] > spreads[1] > spreads[2]


def test_polish_recovers_from_empty_alternative_links():
    # duplicate 2->1 link and idle ring links once made the path shift overshoot
    ring = [(1, 2), (2, 1), (2, 3), (3, 2), (3, 4), (4, 3), (4, 5), (5, 4), (5, 1), (1, 5), (1, 3), (2, 1)]
    net = tc.Network.from_links([(a, b, 1.0, 1.0, 0.15, 4.0) for a, b in ring], 5)
    res = tc.solve_assignment(net, {(3, 1): 1.0, (2, 3): 5.0}, "SO", tc.SolverConfig(relative_gap_target=1e-6, max_iterations=300))
    assert res.converged and res.relative_gap <= 1e-6
    for plist in res.paths.values():
        costs = [math.fsum(net.marginal_time(res.state.flow)[list(p)]) for p, f in plist if f > 1e-3]
        assert max(costs) - min(costs) < 1e-3


def test_cost_at_matches_full_vectors():
    net = TWO_LINKS
    x = np.array([0.3, 0.0])
    for marginal in (False, True):
        c, d = net.cost_at(np.arange(2), x, marginal)
        np.testing.assert_allclose(c, net.marginal_time(x) if marginal else net.link_time(x))
        h = 1e-7
        num = ((net.cost_at(np.arange(2), x + h, marginal)[0]) - c) / h
        np.testing.assert_allclose(d, num, rtol=1e-5)
