"""Tandem (multi-node) runs and the buffer-size sufficiency study."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import Buffer, ConfigError, Instance, Packet, SimulationError, check_window
from .policies import GOLDEN, PolicySpec, make_policy
from .workload import GenConfig, generate, make_rng

log = logging.getLogger(__name__)


# --- tandem ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TandemConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    nodes: int = 3
    adjust_deadlines: bool = True
    policy: PolicySpec = field(default_factory=PolicySpec)
    node_policies: tuple[PolicySpec, ...] | None = None   # per sending node, overrides ``policy``

    def __post_init__(self):
        if self.nodes < 2:
            raise ConfigError(f"a tandem needs at least 2 nodes, got {self.nodes}")
        if self.node_policies is not None and len(self.node_policies) != self.nodes - 1:
            raise ConfigError(f"need {self.nodes - 1} node policies, got {len(self.node_policies)}")

    def policy_for(self, k: int) -> PolicySpec:
        return self.node_policies[k - 1] if self.node_policies else self.policy


@dataclass
class TandemResult:
    zeta: list[float]                     # weight sent from sending node k (index k-1), in window
    sent: list[list[tuple[int, int]]]
    dropped: list[int]

    @property
    def delivered(self) -> float:
        """Throughput reaching the sink (sent by the last sending node)."""
        return self.zeta[-1]


def effective_deadline(d: int, k: int, nodes: int, adjust: bool) -> int:
    """Deadline at sending node ``k`` (1-based) of a chain whose sink is node ``nodes``."""
    return d - (nodes - 1 - k) if adjust else d


def run_tandem(config: TandemConfig, t_end: int | None = None, window: tuple[int, int] | None = None,
               instance: Instance | None = None) -> TandemResult:
    """Chain of ``nodes - 1`` sending nodes feeding a sink.

    A packet sent by node k at step t joins node k+1 at step t+1. A packet
    whose effective deadline at a node is already past when it arrives there
    is dropped at that node.
    """
    if instance is None:
        instance = generate(config.gen)
    t_end = t_end or instance.max_deadline
    window = window or (1, t_end)
    check_window(t_end, window)
    lo, hi = window
    n_send = config.nodes - 1
    for k in range(2, n_send + 1):
        if config.policy_for(k).kind == "LMG":
            raise ConfigError("LMG replays the node's own arrival log; only node 1 can run it")
    policies = [make_policy(config.policy_for(k), instance) for k in range(1, n_send + 1)]
    buffers = [Buffer() for _ in range(n_send)]
    zeta = [0.0] * n_send
    sent: list[list[tuple[int, int]]] = [[] for _ in range(n_send)]
    dropped = [0] * n_send
    arrivals = instance.arrivals()
    incoming: list[list[Packet]] = [[] for _ in range(n_send)]

    for t in range(1, t_end + 1):
        incoming[0] = arrivals.get(t, [])
        outgoing: list[list[Packet]] = [[] for _ in range(n_send)]
        for k in range(n_send):
            buf = buffers[k]
            for p in incoming[k]:
                d = effective_deadline(p.d, k + 1, config.nodes, config.adjust_deadlines)
                if d < t:
                    dropped[k] += 1
                    continue
                buf.add(Packet(p.id, t, d, p.w))
            dropped[k] += len(buf.expire(t))
            pol = policies[k]
            if hasattr(pol, "observe"):
                pol.observe(buf, t)
            if not buf.pending:
                continue
            q = pol.select(buf, t)
            if q is None or q.id not in buf.pending:
                raise SimulationError(f"node {k + 1}: policy returned a packet not in the buffer at t={t}")
            buf.remove(q.id)
            sent[k].append((t, q.id))
            if lo <= t <= hi:
                zeta[k] += q.w
            if k + 1 < n_send:
                outgoing[k + 1].append(instance.packets[q.id])
        incoming = outgoing
    return TandemResult(zeta, sent, dropped)


# --- buffer sizing --------------------------------------------------------------------

@numba.njit(cache=True)
def _mg_count_chunk(counts, taus, weights, grid, rowcnt, colcnt, state, phi, hist, trace):
    """Advance the count-grid MG simulation over one chunk of steps.

    ``grid[d % (d_max+1), w]`` counts pending packets by deadline and weight.
    ``state`` holds [next step, total pending, overflow steps].
    """
    n_rows = grid.shape[0]
    w_top = grid.shape[1] - 1
    t = state[0]
    total = state[1]
    k = 0
    last = hist.shape[0] - 1
    for i in range(counts.shape[0]):
        row = (t - 1) % n_rows
        if rowcnt[row] > 0:
            for w in range(1, w_top + 1):
                c = grid[row, w]
                if c > 0:
                    colcnt[w] -= c
                    grid[row, w] = 0
            total -= rowcnt[row]
            rowcnt[row] = 0
        for _ in range(counts[i]):
            r = (t + taus[k]) % n_rows
            w = weights[k]
            grid[r, w] += 1
            rowcnt[r] += 1
            colcnt[w] += 1
            k += 1
        total += counts[i]
        if total > last:
            state[2] += 1
            hist[last] += 1
        else:
            hist[total] += 1
        if trace.shape[0] > 0:
            trace[i] = total
        if total > 0:
            # e: heaviest packet among the earliest deadline
            e_row = -1
            for off in range(n_rows):
                r = (t + off) % n_rows
                if rowcnt[r] > 0:
                    e_row = r
                    break
            e_w = 0
            for w in range(w_top, 0, -1):
                if grid[e_row, w] > 0:
                    e_w = w
                    break
            # h: earliest deadline among the heaviest
            h_w = 0
            for w in range(w_top, 0, -1):
                if colcnt[w] > 0:
                    h_w = w
                    break
            h_row = -1
            for off in range(n_rows):
                r = (t + off) % n_rows
                if grid[r, h_w] > 0:
                    h_row = r
                    break
            if e_w >= h_w / phi:
                r, w = e_row, e_w
            else:
                r, w = h_row, h_w
            grid[r, w] -= 1
            rowcnt[r] -= 1
            colcnt[w] -= 1
            total -= 1
        t += 1
    state[0] = t
    state[1] = total


class CountGridMG:
    """MG occupancy simulator that only tracks counts per (deadline, weight).

    Occupancy under MG depends on which (deadline, weight) class is sent, not
    on packet identity, so this reproduces the packet-level engine's trace.
    """

    def __init__(self, w_max: int, d_max: int, hist_size: int, phi: float = GOLDEN):
        self.grid = np.zeros((d_max + 1, w_max + 1), dtype=np.int64)
        self.rowcnt = np.zeros(d_max + 1, dtype=np.int64)
        self.colcnt = np.zeros(w_max + 1, dtype=np.int64)
        self.state = np.array([1, 0, 0], dtype=np.int64)
        self.hist = np.zeros(hist_size + 1, dtype=np.int64)
        self.phi = phi

    def feed(self, counts, taus, weights, trace: bool = False):
        out = np.zeros(len(counts) if trace else 0, dtype=np.int64)
        _mg_count_chunk(np.asarray(counts, dtype=np.int64), np.asarray(taus, dtype=np.int64),
                        np.asarray(weights, dtype=np.int64), self.grid, self.rowcnt, self.colcnt,
                        self.state, self.phi, self.hist, out)
        return out

    @property
    def overflow(self) -> int:
        return int(self.state[2])


@dataclass
class BufferSizeResult:
    lam: float
    target: float
    b: int
    ratio: float
    steps: int
    mean_occupancy: float
    exceed_fraction: float
    underresolved: bool


def smallest_buffer(hist: np.ndarray, target: float) -> int:
    """Smallest b with (steps where occupancy > b) / steps <= target."""
    steps = hist.sum()
    # exceed[b] = number of steps with occupancy > b
    exceed = steps - np.cumsum(hist)
    ok = np.nonzero(exceed <= target * steps)[0]
    return int(ok[0])


def buffer_size_study(lam: float, target: float = 1e-6, w_max: int = 20, d_max: int = 20,
                      run_length: int = 10_000_000, seed: int = 0, chunk: int = 100_000) -> BufferSizeResult:
    """Occupancy quantile of the single-node model under MG."""
    if not lam > 0:
        raise ConfigError(f"lambda must be > 0, got {lam}")
    if not 0 < target <= 1:
        raise ConfigError(f"target must be in (0, 1], got {target}")
    underresolved = run_length < 10 / target
    if underresolved:
        warnings.warn(f"run_length={run_length} is too short to resolve target={target:g}", stacklevel=2)
    load = lam * (d_max + 1)
    sim = CountGridMG(w_max, d_max, int(load + 12 * math.sqrt(load) + 64))
    rng = make_rng((seed, 0xB5))
    done = 0
    while done < run_length:
        m = min(chunk, run_length - done)
        counts = rng.poisson(lam, m)
        n = int(counts.sum())
        taus = rng.integers(0, d_max + 1, n, dtype=np.int16)
        weights = rng.integers(1, w_max + 1, n, dtype=np.int16)
        sim.feed(counts, taus, weights)
        done += m
    hist = sim.hist
    b = smallest_buffer(hist, target)
    if sim.overflow and b >= len(hist) - 1:
        raise SimulationError("occupancy histogram overflowed; enlarge hist_size")
    occ = np.arange(len(hist))
    exceed = hist[b + 1:].sum() / run_length
    return BufferSizeResult(lam, target, b, b / lam, run_length,
                            float((occ * hist).sum() / run_length), float(exceed), underresolved)
