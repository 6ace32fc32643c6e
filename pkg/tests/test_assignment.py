import random

import pytest
from hypothesis import given, strategies as st

from pktsched import AssignmentProblem, Instance, PolicySpec, offline_optimum, run, solve, solve_bruteforce
from pktsched.assignment import edf_slots

from conftest import small_instances, mlp_trap


def random_problem(rng, n_items, n_slots, common_release=False):
    s0 = rng.randint(0, 3)
    s1 = s0 + n_slots - 1
    items = []
    for i in range(n_items):
        lo = s0 if common_release else rng.randint(s0, s1)
        hi = rng.randint(lo, s1)
        items.append((i, rng.choice([1, 2, 3, 5, 8, rng.randint(1, 20)]), lo, hi))
    return AssignmentProblem(items, (s0, s1))


@st.composite
def problems(draw, max_items=8, max_slots=6):
    n_slots = draw(st.integers(1, max_slots))
    items = []
    for i in range(draw(st.integers(0, max_items))):
        lo = draw(st.integers(0, n_slots - 1))
        hi = draw(st.integers(lo, n_slots - 1))
        items.append((i, draw(st.integers(1, 9)), lo, hi))
    return AssignmentProblem(items, (0, n_slots - 1))


def check_solution(prob, sol):
    items = {it.id: it for it in prob.items}
    slots = list(sol.assigned.values())
    assert len(slots) == len(set(slots))
    for pid, s in sol.assigned.items():
        assert items[pid].lo <= s <= items[pid].hi
    assert sol.total_weight == pytest.approx(sum(items[pid].w for pid in sol.assigned))


def test_one_slot_heavier_wins():
    sol = solve(AssignmentProblem([("A", 5, 0, 0), ("B", 7, 0, 0)], (0, 0)))
    assert sol.assigned == {"B": 0} and sol.total_weight == 7


def test_three_items_two_slots():
    sol = solve(AssignmentProblem([("A", 5, 0, 1), ("B", 7, 0, 1), ("C", 6, 1, 1)], (0, 1)))
    assert sol.assigned == {"B": 0, "C": 1}
    assert sol.total_weight == 13


def test_mlp_trap_buffer_at_t1():
    sol = solve(AssignmentProblem([("A", 1, 0, 0), ("B", 100, 0, 1)], (0, 1)))
    assert sol.assigned == {"A": 0, "B": 1}
    assert sol.total_weight == 101


def test_bruteforce_edges():
    assert solve_bruteforce(AssignmentProblem([], (0, 3))).total_weight == 0
    assert solve_bruteforce(AssignmentProblem([(0, 4, 0, 3)], (0, 3))).total_weight == 4
    with pytest.raises(ValueError):
        solve_bruteforce(AssignmentProblem([(i, 1, 0, 0) for i in range(11)], (0, 0)))


def test_malformed_problem():
    with pytest.raises(ValueError):
        AssignmentProblem([(0, 1, 2, 1)], (0, 3))
    with pytest.raises(ValueError):
        AssignmentProblem([(0, 1, 0, 5)], (0, 3))


@pytest.mark.parametrize("common", [False, True])
def test_matches_bruteforce_random(common):
    rng = random.Random(11 if common else 12)
    for _ in range(400):
        prob = random_problem(rng, rng.randint(0, 8), rng.randint(1, 6), common)
        sol = solve(prob)
        check_solution(prob, sol)
        assert sol.total_weight == solve_bruteforce(prob).total_weight


@given(problems())
def test_optimal_and_valid(prob):
    sol = solve(prob)
    check_solution(prob, sol)
    assert sol.total_weight == solve_bruteforce(prob).total_weight


@given(problems())
def test_first_slot_filled_when_usable(prob):
    s0 = prob.slots[0]
    if any(it.lo == s0 for it in prob.items):
        assert s0 in solve(prob).assigned.values()


@given(problems(max_items=7), st.integers(1, 9), st.data())
def test_adding_an_item_never_hurts(prob, w, data):
    s1 = prob.slots[1]
    lo = data.draw(st.integers(0, s1))
    hi = data.draw(st.integers(lo, s1))
    bigger = AssignmentProblem(prob.items + [(len(prob.items), w, lo, hi)], prob.slots)
    assert solve(bigger).total_weight >= solve(prob).total_weight


def test_edf_slots_fill_earliest():
    from pktsched.assignment import Item
    chosen = [Item("x", 1, 0, 2), Item("y", 1, 0, 0)]
    assert edf_slots(chosen, 0) == {"y": 0, "x": 1}


def test_offline_mlp_trap(hard_instance):
    zeta, sol = offline_optimum(hard_instance, 2, (1, 2))
    assert zeta == 200
    assert sorted(sol.assigned) == [1, 2]


def test_offline_same_slot_packets():
    inst = Instance.from_triples([(1, 1, 3), (1, 1, 8), (1, 1, 5)])
    assert offline_optimum(inst, 1, (1, 1))[0] == 8


def test_offline_modes_differ_on_boundary():
    # the online side can beat horizon counting inside a sub-window
    inst = Instance.from_triples([(1, 2, 10), (1, 1, 1), (2, 2, 1.5)])
    assert offline_optimum(inst, 2, (2, 2), "horizon")[0] == 1.5
    assert offline_optimum(inst, 2, (2, 2), "window")[0] == 10
    assert run(PolicySpec("MLP"), inst, 2, (2, 2)).zeta == 10
    with pytest.raises(ValueError):
        offline_optimum(inst, 2, (1, 2), "both")


def _window_bruteforce(inst, t_end, window):
    lo, hi = window
    items = [(p.id, p.w, max(p.r, lo), min(p.d, hi)) for p in inst.packets if max(p.r, lo) <= min(p.d, hi)]
    return solve_bruteforce(AssignmentProblem(items, window)).total_weight


@given(small_instances(max_packets=8, horizon=5, max_tau=3))
def test_offline_window_mode_oracle(inst):
    t_end = 8
    for window in [(1, 8), (3, 8), (2, 5)]:
        assert offline_optimum(inst, t_end, window, "window")[0] == _window_bruteforce(inst, t_end, window)


@given(small_instances(max_packets=8, horizon=5, max_tau=3))
def test_offline_horizon_mode_oracle(inst):
    # full window: both readings agree with a direct enumeration
    total = _window_bruteforce(inst, 8, (1, 8))
    assert offline_optimum(inst, 8, (1, 8), "horizon")[0] == total


@given(small_instances())
def test_offline_dominates_full_horizon(inst):
    t_end = inst.max_deadline
    off, _ = offline_optimum(inst, t_end, (1, t_end))
    for kind in ["MG", "Greedy", "EDFalpha", "MLP", "MM", "SMMG"]:
        assert run(PolicySpec(kind), inst, t_end, (1, t_end)).zeta_total <= off + 1e-9


@given(small_instances(), st.data())
def test_window_mode_dominates_any_window(inst, data):
    t_end = inst.max_deadline
    lo = data.draw(st.integers(1, t_end))
    hi = data.draw(st.integers(lo, t_end))
    off, _ = offline_optimum(inst, t_end, (lo, hi), "window")
    for kind in ["MG", "MLP", "SMMG"]:
        assert run(PolicySpec(kind), inst, t_end, (lo, hi)).zeta <= off + 1e-9


def test_mlp_trap_weights_scale():
    zeta, _ = offline_optimum(mlp_trap(2, 50), 2, (1, 2))
    assert zeta == 100
