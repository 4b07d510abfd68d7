import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgesched.checks import random_instance
from edgesched.matching import match
from edgesched.objective import fragmentation
from edgesched.oracle import InstanceTooLarge, brute_force_match

from conftest import place
from helpers import tiny_cluster


def test_empty_batch(cluster):
    s = place(cluster, ("a1", "A", "N2"))
    m = match(s, [])
    assert m.targets == {}
    assert m.achieved_fragmentation == pytest.approx(fragmentation(s))


def test_forced_placement(cluster):
    # N2 and N4 keep only 370 MiB free each; N3 is the only node with room
    full = [(f"x{i}", "A", "N2") for i in range(5)] + [(f"y{i}", "A", "N4") for i in range(5)]
    s = place(cluster, *full, ("new", "A", None))
    assert match(s, ["new"]).placed == {"new": "N3"}


def test_two_pods_against_brute_force():
    s = tiny_cluster({"N2": (2000, 2048), "N3": (1000, 1024)}, {"A": (1000, 950)},
                     [("p1", "A", None), ("p2", "A", None)])
    fast, slow = match(s, ["p1", "p2"]), brute_force_match(s, ["p1", "p2"])
    assert len(fast.placed) == len(slow.placed) == 2
    assert fast.achieved_fragmentation == pytest.approx(slow.achieved_fragmentation, abs=1e-12)


def test_unseatable_pods_go_to_cloud():
    s = tiny_cluster({"E1": (1000, 1000), "E2": (1000, 1000)}, {"A": (500, 500), "W": (2000, 500)},
                     [("a", "A", None), ("w", "W", None)])
    m = match(s, ["a", "w"])
    assert set(m.placed) == {"a"}
    assert m.unplaced == ["w"]


def test_brute_force_refuses_large_instances(cluster):
    s = place(cluster, *[(f"a{i}", "A", None) for i in range(7)])
    with pytest.raises(InstanceTooLarge):
        brute_force_match(s, list(s.pods))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_match_agrees_with_brute_force(seed):
    state, new = random_instance(np.random.default_rng(seed))
    fast, slow = match(state, new), brute_force_match(state, new)
    assert len(fast.placed) == len(slow.placed)
    assert fast.achieved_fragmentation == pytest.approx(slow.achieved_fragmentation, abs=1e-9)
    # the seating respects capacity
    state.with_locations(fast.targets).validate()
