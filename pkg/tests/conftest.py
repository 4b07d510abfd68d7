import pytest

from edgesched.fixtures import default_cluster
from edgesched.model import PodRecord


def place(state, *pods):
    """Add ``(pod_id, service, node)`` triples to ``state``."""
    return state.with_pods(PodRecord(p, s, n) for p, s, n in pods)


@pytest.fixture
def cluster():
    return default_cluster()
