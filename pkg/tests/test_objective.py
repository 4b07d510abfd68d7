import math

import pytest
from hypothesis import given, strategies as st

from edgesched.fixtures import with_qos_targets
from edgesched.model import ResourceVector, ServiceSpec
from edgesched.objective import (DEFAULT_QOS, QosConstants, delta, delta_from_counts, f_transform,
                                 fragmentation, free_score, migration_count, node_fragmentation, pod_size,
                                 qos_total, suggest_score)

from conftest import place

# computed with decimal arithmetic, independently of the package
SIZE_A = 0.0643558180506182806
SIZE_D = 0.128711636101236561


def test_delta_examples():
    assert delta_from_counts(2, 4, 1.0) == -0.5
    assert delta_from_counts(4, 4, 1.0) == 0.0
    assert delta_from_counts(1, 4, 0.1) == pytest.approx(0.15, abs=1e-15)
    assert delta_from_counts(0, 0, 0.3) == pytest.approx(0.7)


def test_delta_on_state(cluster):
    s = place(cluster, ("a1", "A", "N2"), ("a2", "A", "N5"))
    assert delta(s, "A") == -0.5


def test_f_transform_examples():
    assert f_transform(0.0) == 10000
    assert f_transform(-0.5) == -50
    assert f_transform(0.25) == 10000.25


def test_f_transform_jump_at_zero():
    assert f_transform(0.0) - f_transform(-1e-12) == pytest.approx(DEFAULT_QOS.gamma)


def test_qos_constants_bounds():
    with pytest.raises(ValueError):
        QosConstants(alpha=1, beta=2)
    with pytest.raises(ValueError):
        QosConstants(alpha=100, beta=1, gamma=50)


def test_qos_total_examples(cluster):
    edge = place(cluster, *[(f"{s}{i}", s, "N4") for i, s in enumerate("ABCD")])
    assert qos_total(edge) == 40000
    cloud = place(cluster, *[(f"{s}{i}", s, "N5") for i, s in enumerate("ABCD")])
    assert qos_total(cloud) == -400
    empty = type(cluster)(cluster.nodes, {}, {})
    assert qos_total(empty) == 0


def test_migration_count_examples(cluster):
    before = place(cluster, ("a1", "A", "N2"), ("b1", "B", "N3"))
    assert migration_count(before, before) == 0
    assert migration_count(before, before.with_locations({"a1": "N3"})) == 1
    assert migration_count(before, before.with_locations({"a1": "N5"})) == 1
    assert migration_count(before, before.with_locations({"a1": "N5", "b1": "N2"})) == 2


def test_migration_count_excludes_new_pods(cluster):
    before = place(cluster, ("a1", "A", "N2"))
    after = place(before, ("n1", "A", "N3"))
    assert migration_count(before, after, exclude_new=["n1"]) == 0
    with pytest.raises(ValueError):
        migration_count(before, after)


def test_fragmentation_examples(cluster):
    assert node_fragmentation(ResourceVector(0, 0), ResourceVector(4000, 4096)) == 1
    assert node_fragmentation(ResourceVector(4000, 4096), ResourceVector(4000, 4096)) == 0
    assert node_fragmentation(ResourceVector(2000, 2048), ResourceVector(4000, 4096)) == 0.75
    assert fragmentation(cluster) == 3
    # cloud pods do not count
    assert fragmentation(place(cluster, ("d1", "D", "N5"))) == 3


def test_pod_size_examples(cluster):
    totals = ResourceVector(16000, 14336)
    assert pod_size(cluster.services["A"], totals) == pytest.approx(SIZE_A, rel=1e-12)
    assert pod_size(cluster.services["D"], totals) == pytest.approx(SIZE_D, rel=1e-12)
    whole = ServiceSpec("W", totals)
    assert pod_size(whole, totals) == 1
    with pytest.raises(ValueError):
        pod_size(whole, ResourceVector(0, 1))


def test_suggest_score_examples(cluster):
    s = place(cluster, ("a1", "A", "N5"))
    assert suggest_score(s, "a1") == pytest.approx(10100 / SIZE_A, rel=1e-12)
    assert suggest_score(s, "a1") == pytest.approx(156939.9676041095, rel=1e-12)
    twins = place(cluster, ("a1", "A", "N5"), ("c1", "C", "N5"))
    assert suggest_score(twins, "a1") == suggest_score(twins, "c1")
    with pytest.raises(ValueError):
        suggest_score(place(cluster, ("a1", "A", "N2")), "a1")


def test_suggest_score_over_satisfied_service(cluster):
    # Q=0.1 with 1 of 2 pods on the edge: Delta moves 0.4 -> 0.9, gain beta * 1/2
    s = with_qos_targets(place(cluster, ("a1", "A", "N2"), ("a2", "A", "N5")), {"A": 0.1})
    assert suggest_score(s, "a2") == pytest.approx(0.5 / SIZE_A)


def test_free_score_examples(cluster):
    s = place(cluster, ("a1", "A", "N2"))
    assert free_score(s, "a1") == pytest.approx(-10100 / SIZE_A, rel=1e-12)
    twins = place(cluster, ("a1", "A", "N2"), ("c1", "C", "N3"))
    assert free_score(twins, "a1") == free_score(twins, "c1")
    far = with_qos_targets(place(cluster, ("a1", "A", "N2"), ("a2", "A", "N2")), {"A": 0.1})
    assert free_score(far, "a1") == pytest.approx(-0.5 / SIZE_A)
    with pytest.raises(ValueError):
        free_score(place(cluster, ("a1", "A", "N5")), "a1")


@given(on_edge=st.integers(0, 20), extra=st.integers(0, 20),
       q=st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 1.0]))
def test_scores_are_antisymmetric(on_edge, extra, q):
    from edgesched.objective import move_gain
    n = on_edge + extra
    if extra == 0:
        return
    up = move_gain(on_edge, n, q, +1)
    down = move_gain(on_edge + 1, n, q, -1)
    assert up == pytest.approx(-down)
    assert up > 0


@given(st.lists(st.tuples(st.integers(0, 10), st.integers(0, 10)), min_size=1, max_size=4))
def test_qos_monotone_in_edge_pods(pairs):
    from edgesched.objective import service_qos
    for e, extra in pairs:
        n = e + extra + 1
        assert service_qos(e + 1, n, 1.0) > service_qos(e, n, 1.0)
        assert math.isfinite(service_qos(e, n, 0.5))
