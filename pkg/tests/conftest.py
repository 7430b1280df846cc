import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kmclust.graph import PartitionMap, WeightedGraph, random_partition
from kmclust.runtime import Runtime

settings.register_profile("suite", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "suite"))


def path_graph(n, w=1):
    return WeightedGraph(n, tuple((i, i + 1, w) for i in range(n - 1)))


def star_graph(leaves, w=1):
    return WeightedGraph(leaves + 1, tuple((0, i, w) for i in range(1, leaves + 1)))


def runtime(graph, k=3, seed=0, mode="charged"):
    return Runtime(graph, random_partition(graph.n, k, seed), mode)


def single_machine(graph, mode="charged"):
    return Runtime(graph, PartitionMap(1, np.zeros(graph.n, dtype=np.int64)), mode)


@pytest.fixture(params=["charged", "distributed"])
def mode(request):
    return request.param


# Every superstep of every suite run is re-checked here, independently of the
# runtime's own bookkeeping: payloads fit the word cap and the rounds booked
# equal the longest ordered-pair queue.
SUPERSTEP_AUDIT = {"supersteps": 0, "messages": 0, "max_words": 0, "violations": []}


@pytest.fixture(autouse=True, scope="session")
def _audit_every_flush():
    from kmclust import runtime as rt_mod

    original = rt_mod.flush

    def audited(superstep, ledger):
        queues = {link: len(q) for link, q in superstep.queues.items()}
        sizes = [len(p) for q in superstep.queues.values() for p in q]
        before = ledger.rounds
        out = original(superstep, ledger)
        booked = ledger.rounds - before
        SUPERSTEP_AUDIT["supersteps"] += 1
        SUPERSTEP_AUDIT["messages"] += len(sizes)
        SUPERSTEP_AUDIT["max_words"] = max([SUPERSTEP_AUDIT["max_words"], *sizes])
        if booked != max(queues.values(), default=0) or any(s > superstep.word_cap for s in sizes):
            SUPERSTEP_AUDIT["violations"].append({"queues": queues, "booked": booked})
        return out

    rt_mod.flush = audited
    yield SUPERSTEP_AUDIT
    rt_mod.flush = original
    assert not SUPERSTEP_AUDIT["violations"], SUPERSTEP_AUDIT["violations"][:3]
