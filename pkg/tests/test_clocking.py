from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vespa_sim.clocking import (
    ActuatorState,
    ClockDomain,
    Clocking,
    CrossingError,
    DfsActuator,
    Resynchronizer,
    WriteResult,
)
from vespa_sim.config import DfsClock, FixedClock, paper_testbed
from vespa_sim.engine import FS_PER_S, Kernel

from conftest import NOC_GRID, TILE_GRID

MHZ = 1_000_000
L = 10_000_000_000  # default reconfiguration latency, 10 us


def period(f):
    return FS_PER_S / f


def gaps(edges):
    return [b - a for a, b in zip(edges, edges[1:])]


def switched(old, new, mode, t_req=3 * 10**9 + 123):
    dom = ClockDomain(0, DfsClock(10 * MHZ, 100 * MHZ, 5 * MHZ, old))
    act = DfsActuator(dom, mode)
    done = act.request(new, t_req)
    act.advance(done)
    return dom, t_req, done


def make(desc=None, mode="dual", policy="reject"):
    desc = replace(desc or paper_testbed(), dfs_mode=mode, busy_policy=policy)
    k = Kernel()
    return Clocking(desc, k), k, desc


@pytest.mark.parametrize("island, freq, expected", [
    ("noc", 100 * MHZ, WriteResult.ACCEPTED),
    ("A1", 47 * MHZ, WriteResult.OFF_STEP_GRID),
    ("A1", 55 * MHZ, WriteResult.OUT_OF_RANGE),
    ("noc", 5 * MHZ, WriteResult.OUT_OF_RANGE),
])
def test_write_frequency_outcomes(island, freq, expected):
    c, _, desc = make()
    assert c.write_frequency(desc.island(island).id, freq, 0) is expected


def test_second_write_while_busy_is_rejected():
    c, k, desc = make()
    noc = desc.island("noc").id
    assert c.write_frequency(noc, 50 * MHZ, 0) is WriteResult.ACCEPTED
    assert c.registers[noc].busy
    assert c.write_frequency(noc, 60 * MHZ, 5) is WriteResult.BUSY
    k.run_until(L)
    assert not c.registers[noc].busy
    assert c.effective_freq(noc, L) == 50 * MHZ
    assert c.actuators[noc].fsm_state is ActuatorState.STABLE
    assert c.write_frequency(noc, 60 * MHZ, L) is WriteResult.ACCEPTED


def test_queue_policy_applies_the_pending_write():
    c, k, desc = make(policy="queue")
    a1 = desc.island("A1").id
    c.write_frequency(a1, 20 * MHZ, 0)
    assert c.write_frequency(a1, 30 * MHZ, 1) is WriteResult.QUEUED
    k.run_until(3 * L)
    assert c.effective_freq(a1, 3 * L) == 30 * MHZ


def test_fixed_and_missing_islands():
    desc = paper_testbed()
    io = desc.island("io")
    islands = tuple(replace(i, clock=FixedClock(25 * MHZ)) if i.id == io.id else i for i in desc.islands)
    c, _, _ = make(replace(desc, islands=islands))
    assert c.write_frequency(io.id, 25 * MHZ, 0) is WriteResult.FIXED_ISLAND
    assert c.write_frequency(99, 25 * MHZ, 0) is WriteResult.NO_SUCH_ISLAND


def test_new_frequency_takes_effect_after_latency():
    c, k, desc = make()
    a2 = desc.island("A2").id
    c.write_frequency(a2, 10 * MHZ, 1000)
    assert c.effective_freq(a2, 1000 + L // 2) == 50 * MHZ
    k.run_until(1000 + L)
    dom = c.domain(a2)
    t = 1000 + L + 10**9
    e = dom.next_edge(t)
    assert dom.edge_after(e) - e == 100_000_000


def test_dual_10_to_50_max_gap_is_100ns():
    dom, t_req, done = switched(10 * MHZ, 50 * MHZ, "dual")
    g = gaps(dom.edges(t_req - 10**9, done + 10**9))
    assert max(g) == 100_000_000
    assert min(g) == 20_000_000


def test_naive_10_to_50_has_exactly_one_long_gap():
    dom, t_req, done = switched(10 * MHZ, 50 * MHZ, "naive")
    g = gaps(dom.edges(t_req - 10**9, done + 10**9))
    assert sum(x >= L for x in g) == 1


def test_identity_request_leaves_edges_unchanged():
    ref = ClockDomain(0, DfsClock(10 * MHZ, 100 * MHZ, 5 * MHZ, 35 * MHZ))
    dom, t_req, done = switched(35 * MHZ, 35 * MHZ, "dual")
    assert dom.edges(0, done + 10**9) == ref.edges(0, done + 10**9)


@given(st.sampled_from(NOC_GRID), st.sampled_from(NOC_GRID), st.integers(0, 10**10))
def test_dual_mode_gap_bound(old, new, t_req):
    dom, t_req, done = switched(old, new, "dual", t_req)
    bound = max(period(old), period(new))
    assert max(gaps(dom.edges(max(0, t_req - 10**9), done + 10**9))) <= bound + 1


@given(st.sampled_from(NOC_GRID), st.sampled_from(NOC_GRID), st.integers(10**6, 10**10))
def test_naive_mode_gates_once(old, new, t_req):
    dom, t_req, done = switched(old, new, "naive", t_req)
    g = gaps(dom.edges(max(0, t_req - 10**9), done + 10**9))
    assert sum(x >= L for x in g) == 1
    assert dom.edges(t_req, done) == []


def test_crossing_delay_examples():
    c, _, desc = make()
    a1, noc = desc.island("A1").id, desc.island("noc").id
    assert c.crossing_delay(noc, noc, 12345) == 12345
    edge = 7 * 20_000_000
    assert c.crossing_delay(noc, a1, edge) == edge + 40_000_000
    assert c.crossing_delay(noc, a1, edge + 1) == edge + 40_000_000
    with pytest.raises(CrossingError):
        c.crossing_delay(desc.island("A1").id, desc.island("A2").id, 0)


@given(st.sampled_from([f for f in TILE_GRID if f % (20 * MHZ) == 0 or f == 50 * MHZ]), st.integers(0, 10**9))
def test_halving_destination_frequency_doubles_delay(f, t):
    fast = ClockDomain(1, FixedClock(f))
    slow = ClockDomain(1, FixedClock(f // 2))
    d_fast = fast.edge_after(t, 2) - t
    d_slow = slow.edge_after(t, 2) - t
    assert abs(d_slow - 2 * d_fast) <= period(f // 2) + 1


def test_gated_destination_defers_crossing():
    c, k, desc = make(mode="naive")
    a1, noc = desc.island("A1").id, desc.island("noc").id
    c.write_frequency(a1, 25 * MHZ, 0)
    arrival = L // 2
    # first post-reconfiguration edge is one new period after completion, the second one more
    assert c.crossing_delay(noc, a1, arrival) == L + 2 * 40_000_000
    assert c.effective_freq(a1, arrival) == 0


def test_resynchronizer_depth():
    with pytest.raises(ValueError):
        Resynchronizer(0, 1, 1)
    c, _, _ = make()
    assert all(r.depth == 2 for r in c.resync.values())


writes = st.lists(st.tuples(st.integers(0, 3 * L), st.sampled_from(NOC_GRID)), min_size=1, max_size=8)


@given(writes, st.sampled_from(["dual", "naive"]))
def test_busy_rejection_implies_later_completion(ws, mode):
    c, k, desc = make(mode=mode)
    noc = desc.island("noc").id
    for t, f in sorted(ws):
        k.run_until(t)
        r = c.write_frequency(noc, f, t)
        if r is WriteResult.BUSY:
            assert c.actuators[noc].completes_at > t
        assert c.registers[noc].busy == c.actuators[noc].busy


@given(writes, st.sampled_from(["dual", "naive"]), st.lists(st.integers(0, 5 * L), max_size=20))
def test_effective_frequency_is_legal_or_in_transition(ws, mode, probes):
    c, k, desc = make(mode=mode)
    noc = desc.island("noc").id
    spec = desc.island("noc").clock
    for t, f in sorted(ws):
        k.run_until(t)
        c.write_frequency(noc, f, t)
    k.run_until(6 * L)
    for t in probes:
        f = c.domain(noc).freq_at(t)
        assert spec.is_legal(f) or (mode == "naive" and f == 0)
    assert spec.is_legal(c.effective_freq(noc, 6 * L))


def test_listeners_see_rewritten_edges():
    dom = ClockDomain(0, DfsClock(10 * MHZ, 100 * MHZ, 5 * MHZ, 10 * MHZ))
    seen = []
    dom.listeners.append(lambda t: seen.append((t, dom.current_freq)))
    DfsActuator(dom, "dual").request(20 * MHZ, 500)
    assert seen == [(500, 20 * MHZ)]
