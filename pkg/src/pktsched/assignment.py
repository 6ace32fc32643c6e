"""Maximum-weight assignment of unit packets to time slots.

Each item may occupy one slot inside its own contiguous range ``[lo, hi]``
and each slot holds at most one item. The feasible item sets form a
transversal matroid, so taking items heaviest-first and keeping every item
that can still be matched gives an optimum. Matchability of a new item is
decided by an augmenting-path search; because every range is an interval,
the set of slots reachable from the new item is itself an interval and the
search only has to grow ``[lo, hi]`` outwards.

After the optimal set is chosen, slots are reassigned earliest-deadline-first
so that the earliest slot is filled whenever some item can use it.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple

from .model import Instance, check_window


class Item(NamedTuple):
    id: int
    w: float
    lo: int
    hi: int


@dataclass
class AssignmentProblem:
    items: list[Item]
    slots: tuple[int, int]

    def __post_init__(self):
        self.items = [Item(*it) for it in self.items]
        s0, s1 = self.slots
        for it in self.items:
            if it.lo > it.hi:
                raise ValueError(f"item {it.id}: empty range [{it.lo}, {it.hi}]")
            if it.lo < s0 or it.hi > s1:
                raise ValueError(f"item {it.id}: range [{it.lo}, {it.hi}] outside slots {self.slots}")


@dataclass
class AssignmentSolution:
    assigned: dict[int, int] = field(default_factory=dict)
    total_weight: float = 0.0


def _greedy_order(items):
    return sorted(items, key=lambda it: (-it.w, it.hi, it.id))


def _select_common_release(items, s0, s1):
    """Greedy for the case where every item becomes available at ``s0``.

    An item fits iff some free slot lies at or before its deadline; taking the
    latest such slot (union-find over slots) keeps the set feasible.
    """
    nslots = s1 - s0 + 1
    # parent[k] points at the latest candidate free slot <= k-1 (shifted by one; 0 = none)
    parent = list(range(nslots + 1))

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    chosen = []
    for it in _greedy_order(items):
        k = find(it.hi - s0 + 1)
        if k == 0:
            continue
        parent[k] = k - 1
        chosen.append(it)
        if len(chosen) == nslots:
            break
    return chosen


def _select_general(items, s0, s1):
    nslots = s1 - s0 + 1
    owner = [-1] * nslots          # slot offset -> index into ``chosen``
    tight_lo = [-1] * nslots       # full, closed intervals: no item inside can move out
    tight_hi = [-1] * nslots
    chosen: list[Item] = []
    where: list[int] = []          # chosen index -> slot offset

    for it in _greedy_order(items):
        lo, hi = it.lo - s0, it.hi - s0
        if tight_lo[lo] != -1 and tight_hi[lo] >= hi:
            continue
        parent: dict[int, int] = {}
        # scanned region is always the contiguous [sl, sr]
        sl, sr = lo, lo - 1
        pending = [(lo, hi, -1)]
        free = -1
        while pending and free < 0:
            a, b, via = pending.pop()
            s = sr + 1
            while s <= b:
                if tight_lo[s] != -1:
                    s = tight_hi[s] + 1
                    continue
                parent[s] = via
                j = owner[s]
                if j < 0:
                    free = s
                    break
                pending.append((chosen[j].lo - s0, chosen[j].hi - s0, j))
                s += 1
            if free >= 0:
                break
            sr = max(sr, s - 1)
            s = sl - 1
            while s >= a:
                if tight_lo[s] != -1:
                    s = tight_lo[s] - 1
                    continue
                parent[s] = via
                j = owner[s]
                if j < 0:
                    free = s
                    break
                pending.append((chosen[j].lo - s0, chosen[j].hi - s0, j))
                s -= 1
            if free >= 0:
                break
            sl = min(sl, s + 1)

        if free < 0:
            for s in range(sl, sr + 1):
                tight_lo[s] = sl
                tight_hi[s] = sr
            continue

        new = len(chosen)
        chosen.append(it)
        where.append(-1)
        s = free
        while True:
            j = parent[s]
            if j < 0:
                owner[s] = new
                where[new] = s
                break
            prev = where[j]
            owner[s] = j
            where[j] = s
            s = prev
    return chosen


def edf_slots(chosen, s0):
    """Assign a feasible item set to slots earliest-deadline-first."""
    order = sorted(chosen, key=lambda it: (it.lo, it.hi, it.id))
    heap: list[tuple[int, float, int, Item]] = []
    assigned: dict[int, int] = {}
    i, t = 0, s0
    while i < len(order) or heap:
        if not heap and order[i].lo > t:
            t = order[i].lo
        while i < len(order) and order[i].lo <= t:
            it = order[i]
            heapq.heappush(heap, (it.hi, -it.w, it.id, it))
            i += 1
        hi, _, _, it = heapq.heappop(heap)
        if hi < t:
            raise AssertionError(f"infeasible item set: item {it.id} misses slot {t}")
        assigned[it.id] = t
        t += 1
    return assigned


def solve(problem: AssignmentProblem) -> AssignmentSolution:
    items = problem.items
    if not items:
        return AssignmentSolution()
    s0, s1 = problem.slots
    if all(it.lo == s0 for it in items):
        chosen = _select_common_release(items, s0, s1)
    else:
        chosen = _select_general(items, s0, s1)
    return AssignmentSolution(edf_slots(chosen, s0), sum(it.w for it in chosen))


BRUTEFORCE_LIMIT = 10


def solve_bruteforce(problem: AssignmentProblem) -> AssignmentSolution:
    """Exhaustive enumeration of injective partial assignments (small problems only)."""
    items = problem.items
    s0, s1 = problem.slots
    if len(items) > BRUTEFORCE_LIMIT or s1 - s0 + 1 > BRUTEFORCE_LIMIT:
        raise ValueError(f"bruteforce refuses problems beyond {BRUTEFORCE_LIMIT} items/slots")
    best_w = 0.0
    best: dict[int, int] = {}
    used: set[int] = set()
    current: dict[int, int] = {}

    def rec(k, acc):
        nonlocal best_w, best
        if k == len(items):
            if acc > best_w:
                best_w, best = acc, dict(current)
            return
        it = items[k]
        rec(k + 1, acc)
        for s in range(it.lo, it.hi + 1):
            if s not in used:
                used.add(s)
                current[it.id] = s
                rec(k + 1, acc + it.w)
                del current[it.id]
                used.discard(s)

    rec(0, 0.0)
    return AssignmentSolution(best, best_w)


def offline_optimum(instance: Instance, t_end: int, window: tuple[int, int],
                    mode: str = "horizon") -> tuple[float, AssignmentSolution]:
    """Best achievable windowed throughput with full knowledge of the arrivals.

    ``mode="window"`` maximizes the weight sent inside ``window`` directly.
    ``mode="horizon"`` maximizes total weight over ``[1, t_end]`` and then counts
    only the slots inside ``window``; that value can fall below what an online
    policy sends inside the window.
    """
    check_window(t_end, window)
    lo, hi = window
    if mode == "window":
        s0, s1 = lo, hi
    elif mode == "horizon":
        s0, s1 = 1, t_end
    else:
        raise ValueError(f"unknown offline mode {mode!r}")
    items = []
    for p in instance.packets:
        a, b = max(p.r, s0), min(p.d, s1)
        if a <= b:
            items.append(Item(p.id, p.w, a, b))
    sol = solve(AssignmentProblem(items, (s0, s1)))
    weight = {it.id: it.w for it in items}
    zeta = sum(weight[pid] for pid, s in sol.assigned.items() if lo <= s <= hi)
    return zeta, sol
