"""Synchronous k-machine substrate.

Machines exchange messages of at most ``word_cap`` words per ordered pair per
round.  Messages are queued in a :class:`Superstep`; at the barrier every
ordered pair drains its queue one message per round, so a superstep costs as
many rounds as its longest queue.

Subroutines whose cost is taken from a published bound instead of being
simulated are booked on a separate meter, ``charged_rounds``.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

DEFAULT_WORD_CAP = 4


class BandwidthError(RuntimeError):
    """A message exceeded the per-message word cap."""


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    payload: tuple

    @property
    def words(self) -> int:
        return len(self.payload)


@dataclass
class RoundLedger:
    charging: bool = False
    charge_constant: float = 1.0
    log_exponent: int = 3
    eps_exponent: int = 2
    rounds: int = 0
    messages: int = 0
    words: int = 0
    supersteps: int = 0
    charged_rounds: float = 0.0
    max_queue: int = 0
    max_message_words: int = 0
    link_messages: Counter = field(default_factory=Counter)
    per_subroutine: dict = field(default_factory=lambda: defaultdict(
        lambda: {"rounds": 0, "charged_rounds": 0.0, "calls": 0}))
    audit: list | None = None
    _sections: list = field(default_factory=list)

    @contextmanager
    def section(self, name: str):
        self._sections.append(name)
        try:
            yield
        finally:
            self._sections.pop()

    def _book_rounds(self, r: int) -> None:
        self.rounds += r
        if self._sections:
            self.per_subroutine[self._sections[-1]]["rounds"] += r

    def busiest_link(self) -> int:
        return max(self.link_messages.values(), default=0)

    def to_json(self) -> dict:
        return {
            "rounds": self.rounds,
            "charged_rounds": self.charged_rounds,
            "messages": self.messages,
            "words": self.words,
            "supersteps": self.supersteps,
            "max_queue": self.max_queue,
            "max_message_words": self.max_message_words,
            "per_subroutine": {k: dict(v) for k, v in sorted(self.per_subroutine.items())},
        }


class Superstep:
    """Outboxes of all machines for one barrier."""

    def __init__(self, k: int, word_cap: int = DEFAULT_WORD_CAP):
        self.k = k
        self.word_cap = word_cap
        self.queues: dict[tuple[int, int], list[tuple]] = defaultdict(list)
        self.local: list[Message] = []

    def send(self, src: int, dst: int, payload) -> None:
        payload = tuple(payload)
        if len(payload) > self.word_cap:
            raise BandwidthError(f"{len(payload)}-word payload exceeds cap {self.word_cap}")
        if src == dst:
            self.local.append(Message(src, dst, payload))
        else:
            self.queues[(src, dst)].append(payload)

    def __len__(self):
        return sum(len(q) for q in self.queues.values())


def flush(superstep: Superstep, ledger: RoundLedger) -> list[list[tuple[int, tuple]]]:
    """Deliver every queued message; returns per-machine inboxes of (src, payload)."""
    inboxes: list[list[tuple[int, tuple]]] = [[] for _ in range(superstep.k)]
    for msg in superstep.local:
        inboxes[msg.dst].append((msg.src, msg.payload))
    q_max = 0
    for (src, dst), queue in sorted(superstep.queues.items()):
        for payload in queue:
            if len(payload) > superstep.word_cap:
                raise BandwidthError(f"{len(payload)}-word payload exceeds cap {superstep.word_cap}")
            w = len(payload)
            ledger.words += w
            ledger.max_message_words = max(ledger.max_message_words, w)
            inboxes[dst].append((src, payload))
        ledger.messages += len(queue)
        ledger.link_messages[(src, dst)] += len(queue)
        q_max = max(q_max, len(queue))
    # one message per ordered pair per round: the longest queue sets the cost
    assert all(len(q) <= q_max for q in superstep.queues.values())
    if ledger.audit is not None and superstep.queues:
        ledger.audit.append({
            "queues": {link: len(q) for link, q in superstep.queues.items()},
            "sizes": [len(p) for q in superstep.queues.values() for p in q],
            "booked": q_max,
        })
    if q_max:
        ledger.supersteps += 1
        ledger.max_queue = max(ledger.max_queue, q_max)
        ledger._book_rounds(q_max)
    superstep.queues.clear()
    superstep.local.clear()
    return inboxes


def charge_formula(n: int, k: int, eps: float, constant: float = 1.0,
                   log_exponent: int = 3, eps_exponent: int = 2) -> float:
    logn = math.ceil(math.log2(n)) if n > 1 else 0
    return constant * (n / k) * logn**log_exponent / eps**eps_exponent


def charge(ledger: RoundLedger, subroutine: str, n: int, k: int, eps: float, calls: int = 1) -> None:
    """Book ``calls`` black-box SSSP calls at the Õ(n/k)·poly(log n)/poly(ε) rate."""
    if not ledger.charging or calls <= 0:
        return
    amount = calls * charge_formula(n, k, eps, ledger.charge_constant,
                                    ledger.log_exponent, ledger.eps_exponent)
    ledger.charged_rounds += amount
    entry = ledger.per_subroutine[subroutine]
    entry["charged_rounds"] += amount
    entry["calls"] += calls


class Runtime:
    """A graph, its partition, the shortest-path mode, and the cost meters.

    ``mode`` is ``"distributed"`` (message-level simulation) or ``"charged"``
    (exact central computation billed through :func:`charge`).
    """

    MODES = ("distributed", "charged")

    def __init__(self, graph, partition, mode: str = "charged", ledger: RoundLedger | None = None,
                 word_cap: int = DEFAULT_WORD_CAP, charge_constant: float = 1.0, log_exponent: int = 3):
        if mode not in self.MODES:
            raise ValueError(f"unknown sssp mode {mode!r}")
        if partition.n != graph.n:
            raise ValueError("partition size does not match graph")
        self.graph = graph
        self.partition = partition
        self.mode = mode
        self.word_cap = word_cap
        if ledger is None:
            ledger = RoundLedger(charging=(mode == "charged"), charge_constant=charge_constant,
                                 log_exponent=log_exponent)
        self.ledger = ledger
        self.step = Superstep(partition.k, word_cap)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def k(self) -> int:
        return self.partition.k

    @property
    def host(self) -> np.ndarray:
        return self.partition.host

    def ref(self, v: int) -> tuple[int, int]:
        """A vertex reference travels with its host id (packed into one word)."""
        return (int(v), int(self.partition.host[v]))

    def send(self, src: int, dst: int, payload) -> None:
        self.step.send(src, dst, payload)

    def broadcast_all(self, src: int, payload) -> None:
        broadcast_all(self, src, payload)

    def flush(self):
        return flush(self.step, self.ledger)

    def charge(self, subroutine: str, eps: float, calls: int = 1) -> None:
        charge(self.ledger, subroutine, self.n, self.k, eps, calls)

    def allgather(self, values) -> list[tuple]:
        """Every machine broadcasts one small tuple; all machines learn all of them."""
        vals = [v if isinstance(v, tuple) else (v,) for v in values]
        for j in range(self.k):
            self.broadcast_all(j, vals[j])
        view = dict(self.flush()[0])
        view[0] = vals[0]
        return [view[j] for j in range(self.k)]

    def gather(self, root: int, values) -> list[tuple]:
        """Each machine sends one small tuple to ``root``."""
        vals = [v if isinstance(v, tuple) else (v,) for v in values]
        for j in range(self.k):
            if j != root:
                self.send(j, root, vals[j])
        view = dict(self.flush()[root])
        view[root] = vals[root]
        return [view[j] for j in range(self.k)]

    def scatter(self, root: int, values) -> None:
        """``root`` sends machine j its own small tuple ``values[j]``."""
        for j in range(self.k):
            if j != root:
                self.send(root, j, values[j] if isinstance(values[j], tuple) else (values[j],))
        self.flush()

    def announce_count(self, mask: np.ndarray) -> int:
        """Machines learn the global size of a distributed vertex set (one broadcast round)."""
        local = np.bincount(self.host[mask], minlength=self.k)
        return int(sum(x[0] for x in self.allgather([int(c) for c in local])))


def broadcast_all(rt: Runtime, machine: int, payload) -> None:
    """Queue ``k - 1`` copies of ``payload``, one to every other machine."""
    for dst in range(rt.k):
        if dst != machine:
            rt.step.send(machine, dst, payload)
