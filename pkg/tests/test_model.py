import pytest

from edgesched.fixtures import (DEFAULT_CLUSTER, cluster_from_dict, cluster_to_dict, load_cluster,
                                with_qos_targets)
from edgesched.model import (CapacityError, ResourceVector, apply_allocation_delta, edge_capacity_totals,
                             edge_view, free_resources)

from conftest import place


def test_resource_vector_partial_order():
    a, b = ResourceVector(1000, 950), ResourceVector(2000, 900)
    assert not a <= b and not b <= a
    assert a + b == ResourceVector(3000, 1850)
    assert a * 3 == ResourceVector(3000, 2850)
    with pytest.raises(ValueError):
        a - b
    with pytest.raises(ValueError):
        ResourceVector.of(-1, 0)


def test_default_cluster_shape(cluster):
    assert [n.node_id for n in cluster.edge_nodes] == ["N2", "N3", "N4"]
    assert cluster.cloud_id == "N5"
    assert edge_capacity_totals(cluster) == ResourceVector(16000, 14336)
    assert edge_capacity_totals(cluster, "largest") == ResourceVector(7000, 5120)
    assert cluster.services["D"].pod_resources == ResourceVector(2000, 1900)


def test_free_resources_examples(cluster):
    assert free_resources(cluster, "N3") == ResourceVector(4000, 4096)
    one = place(cluster, ("a1", "A", "N3"))
    assert free_resources(one, "N3") == ResourceVector(3000, 3146)
    four = place(cluster, *[(f"a{i}", "A", "N3") for i in range(4)])
    assert free_resources(four, "N3") == ResourceVector(0, 296)
    with pytest.raises(ValueError):
        free_resources(cluster, "N5")
    with pytest.raises(KeyError):
        free_resources(cluster, "N9")


def test_edge_view_examples(cluster):
    cloud_only = place(cluster, ("a1", "A", "N5"), ("b1", "B", "N5"))
    assert edge_view(cloud_only).edge_pods == []
    mixed = place(cluster, ("a1", "A", "N2"), ("b1", "B", "N5"))
    view = edge_view(mixed)
    assert [p.pod_id for p in view.edge_pods] == ["a1"]
    assert [p.pod_id for p in view.cloud_pods] == ["b1"]
    assert view.total_edge_free == ResourceVector(15000, 14336 - 950)


def test_apply_allocation_delta_identity_and_move(cluster):
    s = place(cluster, ("a1", "A", "N5"))
    assert apply_allocation_delta(s, []) == s
    moved = apply_allocation_delta(s, [("a1", "N2")])
    assert moved.pods["a1"].node_id == "N2"
    assert free_resources(moved, "N2") == ResourceVector(4000, 5120 - 950)
    assert s.pods["a1"].node_id == "N5"  # original untouched


def test_apply_allocation_delta_is_atomic(cluster):
    # N3 already holds one B pod: free (3000, 2196); each extra B fits alone, two do not
    s = place(cluster, ("b0", "B", "N3"), ("b1", "B", "N5"), ("b2", "B", "N5"))
    apply_allocation_delta(s, [("b1", "N3")])
    apply_allocation_delta(s, [("b2", "N3")])
    with pytest.raises(CapacityError) as err:
        apply_allocation_delta(s, [("b1", "N3"), ("b2", "N3")])
    assert err.value.node_id == "N3"
    with pytest.raises(KeyError):
        apply_allocation_delta(s, [("zz", "N3")])


def test_validate_flags_overload(cluster):
    over = place(cluster, *[(f"d{i}", "D", "N3") for i in range(3)])
    with pytest.raises(CapacityError):
        over.validate()
    place(cluster, ("d0", "D", "N3"), ("d1", "D", "N3")).validate()


def test_service_counts(cluster):
    s = place(cluster, ("a1", "A", "N2"), ("a2", "A", "N5"), ("c1", "C", None))
    counts = s.service_counts()
    assert counts["A"] == (1, 2)
    assert counts["C"] == (0, 1)
    assert counts["D"] == (0, 0)


def test_cluster_dict_round_trip(tmp_path, cluster):
    assert cluster_from_dict(cluster_to_dict(cluster, (22, 17))) == cluster
    path = tmp_path / "cluster.yaml"
    path.write_text("nodes:\n  - {id: E, kind: edge, cpu_cores: 1, memory_gb: 1}\n"
                    "  - {id: C, kind: cloud, cpu_cores: 0, memory_gb: 0}\n"
                    "services:\n  - {id: X, cpu_millicores: 2000, memory_mib: 100}\n")
    loaded = load_cluster(path)
    assert loaded.services["X"].edge_infeasible
    assert loaded.node("E").capacity == ResourceVector(1000, 1024)


def test_cluster_needs_one_cloud():
    data = {"nodes": [n for n in DEFAULT_CLUSTER["nodes"] if n["kind"] == "edge"],
            "services": DEFAULT_CLUSTER["services"]}
    with pytest.raises(ValueError):
        cluster_from_dict(data)


def test_with_qos_targets(cluster):
    s = with_qos_targets(cluster, (0.5, 0.1, 1.0, 0.1))
    assert s.services["C"].qos_target == 1.0
    assert s.services["B"].qos_target == 0.1
    with pytest.raises(ValueError):
        with_qos_targets(cluster, (0.5,))
