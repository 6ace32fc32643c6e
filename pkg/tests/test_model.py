import pytest
from hypothesis import given

from pktsched import ConfigError, Instance, Packet, PolicySpec, SimulationError, run
from pktsched.model import Buffer, dump_instance, parse_instance, simulate

from conftest import small_instances, mlp_trap

KINDS = ["MG", "Greedy", "EDFalpha", "MLP", "MM", "SMMG"]


def test_packet_validation():
    with pytest.raises(ValueError):
        Packet(0, 3, 2, 1.0)
    with pytest.raises(ValueError):
        Packet(0, 1, 2, 0.0)
    assert Packet(0, 2, 5, 1.0).tau == 3


def test_instance_ids_and_release_range():
    with pytest.raises(ValueError):
        Instance(2, [Packet(1, 1, 1, 1.0)])
    with pytest.raises(ValueError):
        Instance(2, [Packet(0, 3, 3, 1.0)])
    inst = Instance.from_triples([(2, 3, 1), (1, 1, 4)])
    assert [(p.id, p.r) for p in inst.packets] == [(0, 1), (1, 2)]


def test_single_packet_sent():
    inst = Instance.from_triples([(1, 1, 5)])
    res = run(PolicySpec("MG"), inst, 1, (1, 1))
    assert res.sent == [(1, 0)]
    assert res.zeta_total == 5


def test_heavier_of_two_expiring_packets():
    inst = Instance.from_triples([(1, 1, 1), (1, 1, 9)])
    res = run(PolicySpec("Greedy"), inst, 1, (1, 1))
    assert res.zeta_total == 9
    assert len(res.sent) == 1


def test_mlp_trap_mg_and_mlp(hard_instance):
    assert run(PolicySpec("MG"), hard_instance, 2, (1, 2)).zeta == 200
    assert run(PolicySpec("MLP"), hard_instance, 2, (1, 2)).zeta == 101


def test_empty_instance():
    res = run(PolicySpec("MG"), Instance(10, []), 10, (1, 10))
    assert res.zeta == 0 and res.sent == []
    assert res.occupancy_trace == [0] * 10


def test_window_errors():
    inst = mlp_trap()
    with pytest.raises(ConfigError):
        run(PolicySpec("MG"), inst, 2, (2, 1))
    with pytest.raises(ConfigError):
        run(PolicySpec("MG"), inst, 2, (1, 3))


def test_deadline_inclusive_and_trace_point():
    # the d=2 packet is still sendable at t=2; occupancy is taken before the send
    inst = Instance.from_triples([(1, 2, 1), (1, 2, 1)])
    res = run(PolicySpec("MG"), inst, 3, (1, 3))
    assert [t for t, _ in res.sent] == [1, 2]
    assert res.occupancy_trace == [2, 1, 0]


def test_bad_policy_is_fatal():
    class Rogue:
        def select(self, buf, t):
            return Packet(99, 1, 1, 1.0)

    with pytest.raises(SimulationError):
        simulate(Rogue(), mlp_trap(), 2, (1, 2))


def test_buffer_e_h_ties():
    buf = Buffer()
    for p in [Packet(0, 1, 3, 5.0), Packet(1, 1, 1, 5.0), Packet(2, 1, 1, 2.0)]:
        buf.add(p)
    assert buf.earliest().id == 1
    assert buf.heaviest().id == 1
    buf.remove(1)
    assert buf.earliest().id == 2
    assert buf.heaviest().id == 0
    assert [p.id for p in buf.expire(2)] == [2]


def test_text_roundtrip(tmp_path):
    inst = Instance.from_triples([(1, 3, 2.5), (2, 2, 7)], horizon=4)
    path = tmp_path / "inst.txt"
    text = dump_instance(inst, path, slots={0: 1})
    assert text.splitlines() == ["H=4", "0 1 3 2.5 @1", "1 2 2 7"]
    back = parse_instance(path.read_text())
    assert back.packets == inst.packets and back.horizon == 4
    with pytest.raises(ValueError):
        parse_instance("0 1 1 1\n")


@given(small_instances())
def test_schedule_validity(inst):
    t_end = inst.max_deadline
    for kind in KINDS:
        res = run(PolicySpec(kind), inst, t_end, (1, t_end))
        times = [t for t, _ in res.sent]
        assert times == sorted(set(times))
        assert len({pid for _, pid in res.sent}) == len(res.sent)
        for t, pid in res.sent:
            p = inst.packets[pid]
            assert p.r <= t <= p.d
        assert res.zeta_total == pytest.approx(sum(inst.packets[pid].w for _, pid in res.sent))
        assert res.zeta <= res.zeta_total
        # work conserving: a send whenever the buffer is nonempty
        assert len(res.sent) == sum(1 for n in res.occupancy_trace if n > 0)


@given(small_instances())
def test_runs_are_deterministic(inst):
    t_end = inst.max_deadline
    a = run(PolicySpec("MLP"), inst, t_end, (1, t_end))
    b = run(PolicySpec("MLP"), inst, t_end, (1, t_end))
    assert a == b
