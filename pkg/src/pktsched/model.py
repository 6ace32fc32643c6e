"""Domain types and the single-node discrete-time engine.

Time is an integer clock starting at 1. At every step ``t`` the engine

1. inserts packets released at ``t``,
2. drops packets whose deadline is before ``t``,
3. samples the buffer occupancy,
4. asks the policy for at most one packet and sends it.

A packet with ``d == t`` can still be sent at ``t``.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator


class SimulationError(RuntimeError):
    """Internal invariant violated during a run (a policy bug)."""


class ConfigError(ValueError):
    """Invalid run or generator configuration."""


@dataclass(frozen=True, slots=True)
class Packet:
    id: int
    r: int
    d: int
    w: float

    def __post_init__(self):
        if self.d < self.r:
            raise ValueError(f"packet {self.id}: deadline {self.d} before release {self.r}")
        if not self.w > 0:
            raise ValueError(f"packet {self.id}: weight must be positive, got {self.w}")

    @property
    def tau(self) -> int:
        return self.d - self.r


@dataclass
class Instance:
    horizon: int
    packets: list[Packet]
    meta: Any = "external"

    def __post_init__(self):
        self.packets = sorted(self.packets, key=lambda p: (p.r, p.id))
        for i, p in enumerate(self.packets):
            if p.id != i:
                raise ValueError("packet ids must be 0..n-1 in (r, id) order")
            if not 1 <= p.r <= self.horizon:
                raise ValueError(f"packet {p.id}: release {p.r} outside [1, {self.horizon}]")

    def __len__(self):
        return len(self.packets)

    @property
    def max_deadline(self) -> int:
        return max((p.d for p in self.packets), default=self.horizon)

    def arrivals(self) -> dict[int, list[Packet]]:
        by_step: dict[int, list[Packet]] = {}
        for p in self.packets:
            by_step.setdefault(p.r, []).append(p)
        return by_step

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[int, int, float]], horizon: int | None = None) -> "Instance":
        """Build an instance from ``(r, d, w)`` triples; ids follow (r, input order)."""
        triples = sorted(enumerate(triples), key=lambda it: (it[1][0], it[0]))
        packets = [Packet(i, int(r), int(d), float(w)) for i, (_, (r, d, w)) in enumerate(triples)]
        if horizon is None:
            horizon = max((p.r for p in packets), default=1)
        return cls(horizon, packets)


class Buffer:
    """Pending packets at one node, indexed for the two MG orderings.

    Both heaps use lazy deletion; ``pending`` is the source of truth.
    """

    def __init__(self):
        self.pending: dict[int, Packet] = {}
        self.t = 0
        self._by_deadline: list[tuple[int, float, int]] = []
        self._by_weight: list[tuple[float, int, int]] = []

    def __len__(self):
        return len(self.pending)

    def __iter__(self) -> Iterator[Packet]:
        return iter(self.pending.values())

    def __contains__(self, pid: int) -> bool:
        return pid in self.pending

    def add(self, p: Packet):
        self.pending[p.id] = p
        heapq.heappush(self._by_deadline, (p.d, -p.w, p.id))
        heapq.heappush(self._by_weight, (-p.w, p.d, p.id))

    def expire(self, t: int) -> list[Packet]:
        """Advance the clock to ``t`` and drop everything with ``d < t``."""
        self.t = t
        dropped = []
        heap = self._by_deadline
        while heap and heap[0][0] < t:
            _, _, pid = heapq.heappop(heap)
            p = self.pending.pop(pid, None)
            if p is not None:
                dropped.append(p)
        return dropped

    def remove(self, pid: int) -> Packet:
        return self.pending.pop(pid)

    def earliest(self) -> Packet:
        """Max weight among the earliest-deadline packets (ties: lower id)."""
        heap = self._by_deadline
        while heap[0][2] not in self.pending:
            heapq.heappop(heap)
        return self.pending[heap[0][2]]

    def heaviest(self) -> Packet:
        """Earliest deadline among the max-weight packets (ties: lower id)."""
        heap = self._by_weight
        while heap[0][2] not in self.pending:
            heapq.heappop(heap)
        return self.pending[heap[0][2]]

    def snapshot(self) -> list[Packet]:
        return sorted(self.pending.values(), key=lambda p: p.id)


@dataclass
class RunResult:
    sent: list[tuple[int, int]]
    zeta: float
    zeta_total: float
    occupancy_trace: list[int]
    window: tuple[int, int]
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def nbar(self) -> float:
        """Mean occupancy over the measurement window."""
        lo, hi = self.window
        trace = self.occupancy_trace[lo - 1:hi]
        return sum(trace) / len(trace) if trace else 0.0


def check_window(t_end: int, window: tuple[int, int]):
    lo, hi = window
    if t_end < 1:
        raise ConfigError(f"t_end must be >= 1, got {t_end}")
    if lo > hi:
        raise ConfigError(f"empty window {window}")
    if lo < 1 or hi > t_end:
        raise ConfigError(f"window {window} not inside [1, {t_end}]")


def simulate(policy, instance: Instance, t_end: int, window: tuple[int, int]) -> RunResult:
    """Drive ``policy`` (an object with ``select(buffer, t)``) over ``instance``.

    Policies may also define ``observe(buffer, t)``, called after expiry and
    before selection, and ``finish()`` returning a dict merged into ``extras``.
    """
    check_window(t_end, window)
    arrivals = instance.arrivals()
    buf = Buffer()
    sent: list[tuple[int, int]] = []
    trace: list[int] = []
    lo, hi = window
    zeta = zeta_total = 0.0
    observe = getattr(policy, "observe", None)
    for t in range(1, t_end + 1):
        for p in arrivals.get(t, ()):
            buf.add(p)
        buf.expire(t)
        trace.append(len(buf))
        if observe is not None:
            observe(buf, t)
        if not buf.pending:
            continue
        p = policy.select(buf, t)
        if p is None or p.id not in buf.pending:
            raise SimulationError(f"policy returned a packet not in the buffer at t={t}: {p}")
        buf.remove(p.id)
        sent.append((t, p.id))
        zeta_total += p.w
        if lo <= t <= hi:
            zeta += p.w
    extras = policy.finish() if hasattr(policy, "finish") else {}
    return RunResult(sent, zeta, zeta_total, trace, window, extras)


# --- instance text format ---------------------------------------------------

def _fmt_weight(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def dump_instance(instance: Instance, path: str | Path | None = None,
                  slots: dict[int, int] | None = None) -> str:
    """Serialize as ``H=<horizon>`` then ``id r d w`` lines (``@slot`` appended if given)."""
    lines = [f"H={instance.horizon}"]
    for p in instance.packets:
        line = f"{p.id} {p.r} {p.d} {_fmt_weight(p.w)}"
        if slots is not None and p.id in slots:
            line += f" @{slots[p.id]}"
        lines.append(line)
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def parse_instance(text: str) -> Instance:
    horizon = None
    packets = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("H="):
            horizon = int(line[2:])
            continue
        parts = [x for x in line.split() if not x.startswith("@")]
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 'id r d w', got {raw!r}")
        pid, r, d, w = parts
        packets.append(Packet(int(pid), int(r), int(d), float(w)))
    if horizon is None:
        raise ValueError("missing H=<horizon> header")
    return Instance(horizon, packets)


def load_instance(path: str | Path) -> Instance:
    return parse_instance(Path(path).read_text())
