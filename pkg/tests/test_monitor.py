import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vespa_sim.clocking import WriteResult
from vespa_sim.config import A1_POS, CPU_POS, IO_POS, MEM_POS, MHZ, paper_testbed
from vespa_sim.engine import FS_PER_S, cycle_edge_time, parse_time
from vespa_sim.monitor import (
    CONTROL,
    CTRL_RESET,
    EXEC_TIME,
    PKTS_IN,
    PKTS_OUT,
    RTT_COUNT,
    RTT_LAST_HI,
    RTT_LAST_LO,
    RTT_SUM_HI,
    RTT_SUM_LO,
    STAT_RTT,
    TILE_REGISTERS,
    TileCounters,
    UnmappedAddress,
)
from vespa_sim.noc import PacketClass
from vespa_sim.soc import Soc


def fresh(**kw):
    return Soc(paper_testbed(), **kw)


def test_fresh_counters_read_zero():
    soc = fresh()
    m = soc.monitor
    for off, _, _ in TILE_REGISTERS:
        if off != CONTROL:
            assert m.read_register(m.address_of(A1_POS, off)) == 0
    assert m.read_register(m.address_of(A1_POS, CONTROL)) == 0xF


def test_pkts_in_counts_an_invocation():
    soc = fresh()
    tile = soc.accelerator("A1")
    prof = tile.profile
    items = 3 * prof.items_per_burst
    soc.measure_throughput("A1", items * prof.bytes_read_per_item)
    # one RdData and one MemResp per burst come back to the tile
    m = soc.monitor
    assert m.read_register(m.address_of(A1_POS, PKTS_IN)) == 2 * 3
    # and RdCtrl, WrCtrl and WrData go out
    assert m.read_register(m.address_of(A1_POS, PKTS_OUT)) == 3 * 3


def test_frequency_register_roundtrip():
    soc = fresh()
    m = soc.monitor
    noc = soc.desc.island("noc").id
    addr = m.freq_address(noc)
    assert m.write_register(addr, 50) is WriteResult.ACCEPTED
    soc.run_for(parse_time("100us"))
    assert m.write_register(addr, 100) is WriteResult.ACCEPTED
    soc.run_for(parse_time("100us"))
    assert m.read_register(addr) == 100


def test_disabled_rtt_stays_zero():
    soc = fresh()
    m = soc.monitor
    m.write_register(m.address_of(A1_POS, CONTROL), 0xF & ~(1 << STAT_RTT))
    soc.measure_throughput("A1", 4096)
    assert m.read_register(m.address_of(A1_POS, RTT_COUNT)) == 0
    assert m.read_register(m.address_of(A1_POS, PKTS_IN)) > 0


def test_record_rtt_rejects_reversed_times():
    with pytest.raises(ValueError):
        TileCounters().record_rtt(10, 5)


@given(st.lists(st.integers(0, 2**40), min_size=1, max_size=20))
def test_rtt_sum_count_last(rtts):
    c = TileCounters()
    for r in rtts:
        c.record_rtt(1000, 1000 + r)
    assert (c.rtt_sum, c.rtt_count, c.rtt_last) == (sum(rtts), len(rtts), rtts[-1])
    assert c.rtt_mean == pytest.approx(sum(rtts) / len(rtts))


def test_latched_high_words():
    soc = fresh()
    m = soc.monitor
    c = soc.monitor.counters[A1_POS]
    c.record_rtt(0, (7 << 32) | 5)
    lo = m.read_register(m.address_of(A1_POS, RTT_SUM_LO))
    c.record_rtt(0, 1 << 33)  # high word changes after the low read
    hi = m.read_register(m.address_of(A1_POS, RTT_SUM_HI))
    assert (hi << 32) | lo == (7 << 32) | 5
    lo = m.read_register(m.address_of(A1_POS, RTT_LAST_LO))
    assert (m.read_register(m.address_of(A1_POS, RTT_LAST_HI)) << 32) | lo == 1 << 33


def test_reset_bit_is_write_one_to_clear():
    soc = fresh()
    soc.measure_throughput("A1", 4096)
    m = soc.monitor
    ctrl = m.address_of(A1_POS, CONTROL)
    exec_before = m.read_register(m.address_of(A1_POS, EXEC_TIME))
    m.write_register(ctrl, 0xF)
    assert m.read_register(m.address_of(A1_POS, PKTS_IN)) > 0
    m.write_register(ctrl, 0xF | CTRL_RESET)
    for off in (PKTS_IN, PKTS_OUT, RTT_COUNT, RTT_SUM_LO):
        assert m.read_register(m.address_of(A1_POS, off)) == 0
    # the reset bit does not stick and exec_time is automatic only
    assert m.read_register(ctrl) == 0xF
    assert m.read_register(m.address_of(A1_POS, EXEC_TIME)) == exec_before


def test_bad_addresses():
    m = fresh().monitor
    with pytest.raises(UnmappedAddress):
        m.read_register(0x0FFC)
    with pytest.raises(UnmappedAddress):
        m.read_register(m.address_of(A1_POS, 0x24))
    with pytest.raises(UnmappedAddress):
        m.read_register(0x1002)
    with pytest.raises(UnmappedAddress):
        m.read_register(m.tile_address(16, 0))
    with pytest.raises(PermissionError):
        m.write_register(m.address_of(A1_POS, PKTS_IN), 0)


def test_reads_are_idempotent():
    soc = Soc(paper_testbed().with_tg_enabled(3), seed=3)
    soc.run_for(parse_time("300us"))
    m = soc.monitor
    addrs = [r["address"] for r in m.register_table()]
    first = [m.read_register(int(a, 16)) for a in addrs]
    second = [m.read_register(int(a, 16)) for a in addrs]
    assert first == second


def test_register_table_is_complete():
    m = fresh().monitor
    rows = m.register_table()
    assert len(rows) == 6 + 16 * len(TILE_REGISTERS)
    assert len({r["address"] for r in rows}) == len(rows)


@settings(max_examples=8)
@given(st.integers(0, 11), st.integers(0, 2**16))
def test_packet_conservation_after_drain(tgs, seed):
    soc = Soc(paper_testbed().with_tg_enabled(tgs), seed=seed)
    for slot in ("A1", "A2"):
        soc.accelerator(slot).start_invocation(40, 0)
    soc.run_for(parse_time("200us"))
    soc.drain()
    counters = soc.monitor.counters.values()
    assert sum(c.pkts_out for c in counters) == sum(c.pkts_in for c in counters)


@settings(max_examples=10)
@given(st.sampled_from([10, 25, 35, 50]), st.integers(1, 200))
def test_exec_time_times_period_is_wall_time(mhz, items):
    desc = paper_testbed().with_island_freq("A1", mhz * MHZ)
    soc = Soc(desc)
    r = soc.measure_throughput("A1", items * soc.accelerator("A1").profile.bytes_read_per_item)
    # the invocation starts on edge 0, so it ends exactly on edge exec_cycles
    assert r.t_start == 0
    assert cycle_edge_time(mhz * MHZ, r.exec_cycles) == r.t_done


def test_idle_traffic_is_zero():
    soc = fresh()
    assert soc.sample_traffic(MEM_POS, parse_time("1ms")).mpkts == 0.0


def test_sampling_window_must_be_positive():
    with pytest.raises(ValueError):
        fresh().sample_traffic(MEM_POS, 0)


@pytest.mark.parametrize("rate_pps", [1e5, 7.3e5, 2.5e6])
def test_constant_rate_injector(rate_pps):
    soc = fresh()
    period = round(FS_PER_S / rate_pps)

    def fire():
        soc.net.inject(soc.net.packet(PacketClass.MEM_RESP, CPU_POS, IO_POS), soc.now)
        soc.kernel.after(period, fire)

    soc.kernel.at(0, fire)
    window = parse_time("1ms")
    soc.run_for(window)
    point = soc.sample_traffic(IO_POS, window)
    one_packet = 1 / (window / FS_PER_S) / 1e6
    assert abs(point.mpkts - rate_pps / 1e6) <= one_packet
    assert point.time_fs == 2 * window


def test_tg_island_speedup_raises_memory_rate():
    desc = paper_testbed().with_tg_enabled(11)
    soc = Soc(desc.with_island_freq("tg", 10 * MHZ), seed=1)
    soc.run_for(parse_time("200us"))
    slow = soc.sample_traffic(MEM_POS, parse_time("500us")).mpkts
    assert soc.set_freq("tg", 50 * MHZ) is WriteResult.ACCEPTED
    soc.run_for(parse_time("200us"))
    fast = soc.sample_traffic(MEM_POS, parse_time("500us")).mpkts
    assert fast > slow
