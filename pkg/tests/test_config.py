from dataclasses import replace
from importlib import resources

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vespa_sim.config import (
    A1_POS,
    A2_POS,
    MEM_POS,
    ConfigError,
    DfsClock,
    FixedClock,
    IslandSpec,
    MemModel,
    NocParams,
    SoCDescription,
    TileKind,
    TileSpec,
    dump_description,
    load_description,
    load_file,
    paper_testbed,
    resolve_config,
    validate,
)
from vespa_sim.noc import hop_count

MHZ = 1_000_000

MINIMAL = """
schema_version: 1
grid: {rows: 1, cols: 1}
tiles:
  - {pos: [0, 0], kind: MEM}
islands:
  - {id: 0, tiles: [[0, 0]], routers: [[0, 0]], clock: {fixed_hz: 100MHz}}
"""


def test_minimal_document():
    d = load_description(MINIMAL)
    assert (d.rows, d.cols) == (1, 1)
    assert d.tiles[0].kind is TileKind.MEM
    assert d.islands[0].clock == FixedClock(100 * MHZ)
    assert d.noc == NocParams() and d.memory == MemModel()


def test_missing_island_coverage_names_the_tile():
    text = MINIMAL.replace("tiles: [[0, 0]], ", "tiles: [], ")
    with pytest.raises(ConfigError, match=r"tile \(0,0\) not in any island"):
        load_description(text)


def test_parse_error_reports_position():
    with pytest.raises(ConfigError, match=r"line \d+, column \d+"):
        load_description("grid: {rows: 1\ntiles: [")


@pytest.mark.parametrize("mutate, field", [
    (lambda t: t.replace("grid: {rows: 1, cols: 1}", "grid: {rows: 1, cols: 1, depth: 2}"), "grid"),
    (lambda t: t.replace("kind: MEM", "kind: MEM, colour: red"), "tiles[0]"),
    (lambda t: t.replace("kind: MEM", "kind: DSP"), "tiles[0].kind"),
    (lambda t: t.replace("schema_version: 1", "schema_version: 9"), "schema_version"),
    (lambda t: t.replace("fixed_hz: 100MHz", "fixed_hz: 1.5Hz"), "islands[0].clock.fixed_hz"),
])
def test_schema_violations_name_the_field(mutate, field):
    with pytest.raises(ConfigError) as exc:
        load_description(mutate(MINIMAL))
    assert field in str(exc.value)


def test_shipped_testbed_document_equals_constructor():
    text = resources.files("vespa_sim.data").joinpath("paper_testbed.yaml").read_text()
    assert load_description(text) == paper_testbed()
    assert resolve_config("paper-testbed") == paper_testbed()


def test_paper_testbed_shape(testbed):
    assert validate(testbed) == []
    kinds = [t.kind for t in testbed.tiles]
    assert kinds.count(TileKind.TG) == 11
    assert kinds.count(TileKind.MEM) == kinds.count(TileKind.CPU) == kinds.count(TileKind.IO) == 1
    assert all(t.accel == "dfadd" for t in testbed.tiles_of_kind(TileKind.TG))
    assert hop_count(A1_POS, MEM_POS) == 1
    far = max(hop_count(t.position, MEM_POS) for t in testbed.tiles)
    assert hop_count(A2_POS, MEM_POS) == far == 6
    noc = testbed.island("noc").clock
    assert noc.legal() == [f * MHZ for f in range(10, 101, 5)] and len(noc.legal()) == 19
    assert all(i.clock.max_hz == 50 * MHZ for i in testbed.islands if i.name != "noc")
    assert len(testbed.islands) == 6
    assert len(paper_testbed(5).islands) == 5 and validate(paper_testbed(5)) == []
    assert testbed.island("noc").routers == tuple(t.position for t in testbed.tiles)


def test_off_grid_initial_frequency(testbed):
    d = testbed.with_island_freq("A1", 47 * MHZ)
    assert any("not on step grid" in e for e in validate(d))


def test_two_mem_tiles(testbed):
    d = testbed.with_tile((0, 0), kind=TileKind.MEM)
    assert any("exactly one MEM tile" in e for e in validate(d))


def test_report_has_one_entry_per_violation(testbed):
    d = testbed.with_tile((0, 0), kind=TileKind.MEM).with_island_freq("A2", 47 * MHZ)
    assert len(validate(d)) == 2


def test_other_invariants(testbed):
    assert any("replication" in e for e in validate(testbed.with_tile(A1_POS, replication=0)))
    assert any("unknown accelerator" in e for e in validate(testbed.with_tile(A1_POS, accel="sha")))
    bad = replace(testbed, islands=testbed.islands + (IslandSpec(9, (), (), FixedClock(1)),))
    assert any("empty" in e for e in validate(bad))
    p = replace(testbed.profiles[0], burst_bytes=10**9)
    assert any("burst_bytes" in e for e in validate(replace(testbed, profiles=(p,) + testbed.profiles[1:])))
    p = replace(testbed.profiles[0], bytes_read_per_item=0)
    assert any("strictly positive" in e for e in validate(replace(testbed, profiles=(p,) + testbed.profiles[1:])))


def test_unknown_tg_count(testbed):
    with pytest.raises(ValueError):
        testbed.with_tg_enabled(12)


def test_resolve_config_reads_files(tmp_path, testbed):
    path = tmp_path / "soc.yaml"
    path.write_text(dump_description(testbed))
    assert load_file(str(path)) == resolve_config(str(path)) == testbed


# -- round-trip property ----------------------------------------------------------

tile_freqs = st.sampled_from([f * MHZ for f in range(10, 51, 5)])


@st.composite
def descriptions(draw):
    d = paper_testbed(draw(st.sampled_from([5, 6])))
    names = [p.name for p in d.profiles]
    for slot in (A1_POS, A2_POS):
        d = d.with_tile(slot, accel=draw(st.sampled_from(names)), replication=draw(st.integers(1, 16)))
    d = d.with_tg_enabled(draw(st.integers(0, 11)))
    d = d.with_island_freq("A1", draw(tile_freqs)).with_island_freq("tg", draw(tile_freqs))
    d = d.with_island_freq("noc", draw(st.sampled_from([f * MHZ for f in range(10, 101, 5)])))
    d = replace(d, memory=MemModel(draw(st.integers(1, 64)), draw(st.integers(0, 200))),
                noc=NocParams(draw(st.sampled_from([4, 8, 16])), draw(st.integers(0, 3)),
                              draw(st.integers(1, 8)), draw(st.integers(2, 4))),
                dfs_mode=draw(st.sampled_from(["dual", "naive"])),
                busy_policy=draw(st.sampled_from(["reject", "queue"])))
    if draw(st.booleans()):
        isl = d.islands[-1]
        islands = tuple(replace(i, clock=FixedClock(draw(st.integers(1, 10**9)))) if i.id == isl.id else i
                        for i in d.islands)
        d = replace(d, islands=islands)
    return d


@given(descriptions())
def test_load_after_dump_is_identity(desc):
    assert validate(desc) == []
    assert load_description(dump_description(desc)) == desc


@given(st.integers(1, 20).flatmap(lambda lo: st.tuples(st.just(lo), st.integers(1, 5), st.integers(0, 10))))
def test_dfs_legal_set_is_arithmetic(args):
    lo, step, k = args
    clock = DfsClock(lo * MHZ, (lo + k * step) * MHZ, step * MHZ, lo * MHZ)
    legal = clock.legal()
    assert len(legal) == k + 1
    assert all(clock.is_legal(f) for f in legal)
    assert not clock.is_legal(lo * MHZ + 1)
