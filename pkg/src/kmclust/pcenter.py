"""p-center by scanning radius probes with an approximate-MIS feasibility test."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .facility_location import MisStats, approximate_mis, connect_clients
from .powers import EpsPowers
from .runtime import Runtime
from .seeding import derive_seed


@dataclass(frozen=True, eq=False)
class CenterSolution:
    C: tuple[int, ...]
    assignment: dict[int, tuple[int, int]]
    radius: Fraction
    d_probe: Fraction
    probes: list[tuple[Fraction, int]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "C": list(self.C),
            "radius": str(self.radius),
            "d_probe": str(self.d_probe),
            "probes": [{"d": str(d), "mis_size": k} for d, k in self.probes],
            "assignment": [{"client": j, "facility": f, "facility_host": h}
                           for j, (f, h) in sorted(self.assignment.items())],
        }


def probe_radii(n: int, max_weight: Fraction, eps) -> list[Fraction]:
    """0, then (1+ε)^e for e = 0..⌈log_{1+ε}(n·N)⌉."""
    pw = EpsPowers(eps)
    top = pw.ceil_log(max(Fraction(1), n * max_weight))
    return [Fraction(0)] + [pw.pow(e) for e in range(top + 1)]


def solve_pcenter(rt: Runtime, p: int, eps=0.1, seed: int = 0, mis_c: float = 4.0) -> CenterSolution:
    """Smallest probe d whose MIS at distance 2(1+ε)d has at most p members.

    MIS sizes only shrink as d grows, so the first feasible probe is the
    binding one; the last probe covers the diameter and always succeeds.
    """
    n = rt.n
    if not 1 <= p <= n:
        raise ValueError(f"p={p} outside [1, n={n}]")
    pw = EpsPowers(eps)
    everyone = np.ones(n, dtype=bool)
    probes: list[tuple[Fraction, int]] = []
    max_w = rt.graph.max_weight if rt.graph.m else Fraction(1)
    with rt.ledger.section("pcenter"):
        for idx, d in enumerate(probe_radii(n, max_w, eps)):
            I = approximate_mis(rt, everyone, 2 * pw.base * d, eps, derive_seed(seed, "pcenter", idx),
                                c=mis_c, stats=MisStats())
            size = rt.announce_count(I)
            probes.append((d, size))
            if size <= p:
                break
        else:
            raise AssertionError("the largest probe must be feasible")
    sol = connect_clients(rt, I, None, eps, label="pcenter_assign")
    # every machine reports its worst client distance to the coordinator
    local = [max((sol.connection[int(v)] for v in rt.partition.H[m] if int(v) in sol.connection),
                 default=Fraction(0)) for m in range(rt.k)]
    radius = max(x[0] for x in rt.gather(0, local))
    return CenterSolution(sol.S, sol.assignment, radius, d, probes)
