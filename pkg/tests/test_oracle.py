from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from wardrop_cycles import oracle as orc

SIX = (4, 4, 1, -3, -3, -3)
# a compatible 6 x 6 schedule of the six values with worst prefix 4
REFERENCE = [
    [4, -3, -3, 4, -3, 1],
    [4, -3, -3, 4, 1, -3],
    [-3, 4, -3, 1, 4, -3],
    [-3, 4, 1, -3, 4, -3],
    [-3, 1, 4, -3, -3, 4],
    [1, -3, 4, -3, -3, 4],
]


def test_multiset_permutations_count():
    assert len(list(orc.multiset_permutations([0, 0, 1, 2]))) == 12


def test_next_day_from_zero():
    val, _ = orc.brute_next_day([0, 0, 0], orc.SmallInstance((6, 1, 2), (1, 1, 1)))
    assert val == Fraction(14, 3)


def test_next_day_witness():
    val, wit = orc.brute_next_day([5, 0, 0], orc.SmallInstance((6, 1, 2), (1, 1, 1)))
    assert wit[0] == 1  # the time-1 path
    assert val == Fraction((5 - 2) ** 2 + 3 ** 2 + 1, 3)


def test_next_day_single():
    val, wit = orc.brute_next_day([0.5], orc.SmallInstance((7.0,), (1,)))
    assert val == Fraction(1, 4) and wit == (0,)


def test_next_day_limits():
    with pytest.raises(orc.TooLarge):
        orc.brute_next_day([0] * 11, orc.SmallInstance((1.0,), (11,)))
    with pytest.raises(ValueError):
        orc.brute_next_day([0], orc.SmallInstance((1.0,), (2,)))


def test_mean_partition_toy():
    groups = orc.exact_mean_partition(orc.SmallInstance((15, 14, 9), (4, 6, 8)))
    assert sorted(groups) == [(0, 3, 2)] * 2 + [(1, 0, 1)] * 4
    # these regroup into the 8-driver and 10-driver halves
    eight = tuple(np.sum([g for g in groups if g[1] == 0], axis=0))
    ten = tuple(np.sum([g for g in groups if g[1] > 0], axis=0))
    assert (sum(eight), sum(ten)) == (8, 10)


def test_mean_partition_trivial_and_equal():
    assert orc.exact_mean_partition(orc.SmallInstance((6, 1, 2), (1, 1, 1))) is None
    assert orc.exact_mean_partition(orc.SmallInstance((3.0,), (5,))) == [(1,)] * 5


def test_mean_partition_against_subset_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(60):
        n = int(rng.integers(1, 8))
        vals = rng.integers(-4, 5, size=n)
        vals = np.append(vals, -vals.sum())
        inst = orc.SmallInstance.from_deviations(vals.tolist())
        groups = orc.exact_mean_partition(inst)
        got = 1 if groups is None else len(groups)
        assert got == most_zero_groups(vals.tolist())


def most_zero_groups(vals):
    """Largest number of zero-sum blocks, by recursion over the subset holding the first element."""
    if not vals:
        return 0
    first, rest = vals[0], vals[1:]
    best = 0
    for mask in range(1 << len(rest)):
        pick = [rest[i] for i in range(len(rest)) if mask >> i & 1]
        if first + sum(pick) == 0:
            left = [rest[i] for i in range(len(rest)) if not mask >> i & 1]
            best = max(best, 1 + most_zero_groups(left))
    return best


def test_restricted_cycle_example():
    val, seq = orc.exact_restricted_cycle(SIX)
    assert val == 5
    assert Counter(seq) == Counter(SIX)
    assert orc.cyclic_window_value(seq) == 5
    assert orc.cyclic_window_value((4, -3, 4, -3, 1, -3)) == 5


@pytest.mark.parametrize("devs, value", [((1, -1), 1), ((0, 0, 0), 0), ((), 0)])
def test_restricted_cycle_small(devs, value):
    assert orc.exact_restricted_cycle(devs)[0] == value


def test_compatible_schedule_example():
    val, mat = orc.exact_compatible_schedule(SIX)
    assert val == 4
    assert orc.prefix_value(mat) == 4
    for col in mat.T:
        assert Counter(col.tolist()) == Counter(SIX)


def test_reference_schedule_is_compatible_and_scores_four():
    M = np.array(REFERENCE)
    for axis in (0, 1):
        for line in np.moveaxis(M, axis, 0):
            assert Counter(line.tolist()) == Counter(SIX)
    assert orc.prefix_value(REFERENCE) == 4


@pytest.mark.parametrize("devs, value", [((1, -1), 1), ((0, 0), 0)])
def test_compatible_small(devs, value):
    assert orc.exact_compatible_schedule(devs)[0] == value


def test_size_limits():
    with pytest.raises(orc.TooLarge):
        orc.exact_restricted_cycle([0] * 11)
    with pytest.raises(orc.TooLarge):
        orc.exact_compatible_schedule([0] * 7)
    with pytest.raises(orc.TooLarge):
        orc.exact_mean_partition(orc.SmallInstance((1.0,), (21,)))
