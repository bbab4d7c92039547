import csv
import shutil
import subprocess
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vespa_sim import cli
from vespa_sim.config import A1_POS, dump_description, paper_testbed

REPO = Path(__file__).resolve().parents[1]
SCEN = REPO / "scenarios"


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def header(path):
    with open(path, newline="") as fh:
        return tuple(next(csv.reader(fh)))


def write_config(tmp_path, desc, name="soc.yaml"):
    p = tmp_path / name
    p.write_text(dump_description(desc))
    return p


@pytest.fixture
def dfadd_config(tmp_path):
    return write_config(tmp_path, paper_testbed().with_tile(A1_POS, accel="dfadd", replication=1))


def test_run_reports_dfadd_baseline(tmp_path, dfadd_config):
    out = tmp_path / "o"
    code = cli.main(["run", "--config", str(dfadd_config), "--measure", "A1",
                     "--budget-bytes", "65536", "--out", str(out)])
    assert code == cli.EXIT_OK
    a1 = next(r for r in rows(out / "metrics.csv") if r["name"] == "A1")
    assert float(a1["throughput_mbps"]) == pytest.approx(9.22, rel=0.02)
    assert int(a1["bytes_read"]) == 65536
    assert int(a1["rtt_count"]) > 0


def test_zero_duration_run(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--duration", "0", "--out", str(out)]) == cli.EXIT_OK
    metrics = rows(out / "metrics.csv")
    assert len(metrics) == 16
    for r in metrics:
        for col in ("exec_time_cycles", "pkts_in", "pkts_out", "rtt_count", "rtt_last_fs"):
            assert int(r[col]) == 0
    assert rows(out / "trace.csv") == []
    assert header(out / "trace.csv") == cli.TRACE_COLUMNS


def test_repeat_runs_are_byte_identical(tmp_path):
    args = ["run", "--config", str(SCEN / "dfs_testbed.yaml"), "--duration", "300us", "--window", "50us",
            "--seed", "7"]
    for name in ("a", "b"):
        assert cli.main(args + ["--out", str(tmp_path / name)]) == cli.EXIT_OK
    for f in ("metrics.csv", "trace.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_changes_tg_behaviour(tmp_path):
    base = ["run", "--config", str(SCEN / "dfs_testbed.yaml"), "--duration", "300us", "--window", "50us"]
    cli.main(base + ["--seed", "1", "--out", str(tmp_path / "a")])
    cli.main(base + ["--seed", "2", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()


def test_output_schemas_do_not_depend_on_data(tmp_path):
    cli.main(["run", "--duration", "0", "--out", str(tmp_path / "empty")])
    cli.main(["run", "--config", str(SCEN / "dfs_testbed.yaml"), "--duration", "200us", "--window", "50us",
              "--out", str(tmp_path / "busy")])
    for d in ("empty", "busy"):
        assert header(tmp_path / d / "metrics.csv") == cli.METRICS_COLUMNS
        assert header(tmp_path / d / "trace.csv") == cli.TRACE_COLUMNS
    trace = rows(tmp_path / "busy" / "trace.csv")
    assert {r["stat"] for r in trace} == {"incoming_mpkts", "freq_hz"}
    assert all(r["probe"] == "tile 0,3" for r in trace if r["stat"] == "incoming_mpkts")


# -- exit codes ----------------------------------------------------------------------

def test_missing_config_is_a_config_error(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_invalid_config_is_a_config_error(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("rows: 4\ncols: [\n")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_kernel_fault_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(cli, "RUN_TIMEOUT_FS", 10**9)  # 1 us cannot finish 1 MB
    assert cli.main(["run", "--measure", "A1", "--out", str(tmp_path)]) == cli.EXIT_FAULT
    assert "simulation fault" in capsys.readouterr().err


def test_partial_sweep_failure(tmp_path):
    space = tmp_path / "space.yaml"
    space.write_text("slots:\n  A1:\n    accel: [dfadd, aes]\n    replication: [1]\nmeasure: [A1]\n")
    out = tmp_path / "o"
    code = cli.main(["sweep", str(space), "--budget-bytes", "4096", "--out", str(out)])
    assert code == cli.EXIT_PARTIAL
    got = rows(out / "sweep.csv")
    assert [r["status"] for r in got] == ["ok", "failed"]
    assert "aes" in got[1]["error"]


def test_bad_schedule_is_a_config_error(tmp_path):
    sched = tmp_path / "s.yaml"
    sched.write_text("commands:\n  - {at: 2ms, active_tgs: 1}\n  - {at: 1ms, active_tgs: 2}\n")
    assert cli.main(["profile", "--schedule", str(sched), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


# -- sweeps ------------------------------------------------------------------------------

def test_empty_space_gives_header_only(tmp_path):
    space = tmp_path / "space.yaml"
    space.write_text("")
    assert cli.main(["sweep", str(space), "--out", str(tmp_path)]) == cli.EXIT_OK
    assert header(tmp_path / "sweep.csv") == cli.SWEEP_COLUMNS
    assert rows(tmp_path / "sweep.csv") == []


@given(st.lists(st.sampled_from(["adpcm", "dfadd", "gsm"]), min_size=1, max_size=3, unique=True),
       st.lists(st.sampled_from([1, 2, 4]), min_size=1, max_size=3, unique=True),
       st.lists(st.integers(0, 11), min_size=1, max_size=4, unique=True),
       st.lists(st.integers(0, 99), min_size=1, max_size=3, unique=True),
       st.booleans())
def test_space_size_is_the_cartesian_product(accels, ks, tgs, seeds, swap):
    placements = "[default, swapped]" if swap else "[default]"
    text = (f"slots:\n  A2:\n    accel: {accels}\n    replication: {ks}\n"
            f"islands:\n  noc: [10MHz, 100MHz]\ntgs: {tgs}\nseeds: {seeds}\nplacements: {placements}\n")
    space = cli.parse_space(text)
    expected = len(accels) * len(ks) * 2 * len(tgs) * len(seeds) * (2 if swap else 1)
    assert space.size == expected == len(list(space.points()))


def test_sweep_rows_and_reproduction(tmp_path):
    space = tmp_path / "space.yaml"
    space.write_text("slots:\n  A1:\n    accel: [dfmul]\n    replication: [1, 2]\n"
                     "tgs: [0, 3]\nseeds: [5]\nmeasure: [A1]\n")
    out = tmp_path / "o"
    assert cli.main(["sweep", str(space), "--budget-bytes", "8192", "--emit-configs", "--out", str(out)]) == 0
    got = rows(out / "sweep.csv")
    assert len(got) == 4
    assert [r["point"] for r in got] == ["0", "1", "2", "3"]
    assert all(r["status"] == "ok" for r in got)
    assert header(out / "sweep.csv") == cli.SWEEP_COLUMNS
    row = got[3]
    assert row["primary_accel"] == "dfmul" and int(row["active_tgs"]) == 3
    again = tmp_path / "again"
    cfg = out / "configs" / f"point-{int(row['point']):04d}.yaml"
    assert cli.main(["run", "--config", str(cfg), "--seed", row["seed"], "--measure", "A1",
                     "--budget-bytes", "8192", "--out", str(again)]) == 0
    a1 = next(r for r in rows(again / "metrics.csv") if r["name"] == "A1")
    assert a1["throughput_mbps"] == row["primary_throughput_mbps"]


def test_sweep_area_columns(tmp_path):
    space = tmp_path / "space.yaml"
    space.write_text("slots:\n  A1:\n    accel: [adpcm]\n    replication: [4]\n"
                     "  A2:\n    accel: [gsm]\n    replication: [1]\nmeasure: [A1]\n")
    cli.main(["sweep", str(space), "--budget-bytes", "4096", "--out", str(tmp_path)])
    (row,) = rows(tmp_path / "sweep.csv")
    assert int(row["lut"]) == 27313 + 9900 and int(row["dsp"]) == 324 + 62
    assert row["capacity_violation"] == "False"
    assert 0.0 <= float(row["mem_busy_fraction"]) <= 1.0


def test_swapped_placement_follows_the_accelerator(tmp_path):
    space = tmp_path / "space.yaml"
    space.write_text("slots:\n  A1:\n    accel: [dfadd]\n    replication: [1]\n"
                     "  A2:\n    accel: [dfsin]\n    replication: [1]\n"
                     "placements: [default, swapped]\nmeasure: [A1]\n")
    cli.main(["sweep", str(space), "--budget-bytes", "4096", "--out", str(tmp_path)])
    default, swapped = rows(tmp_path / "sweep.csv")
    assert default["measured"] == "A1" and swapped["measured"] == "A2"
    assert default["primary_accel"] == swapped["primary_accel"] == "dfadd"


# -- profiles ------------------------------------------------------------------------------

def test_empty_schedule_is_flat(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["profile", "--config", str(SCEN / "dfs_testbed.yaml"), "--duration", "2ms",
                     "--window", "250us", "--out", str(out)]) == 0
    freq = rows(out / "freq_profile.csv")
    by_island = {}
    for r in freq:
        by_island.setdefault(r["island"], set()).add(r["freq_hz"])
    assert all(len(v) == 1 for v in by_island.values())
    traffic = [float(r["mpkts"]) for r in rows(out / "mem_traffic.csv")]
    assert len(traffic) == 8
    steady = traffic[1:]
    assert max(steady) - min(steady) <= 0.1 * max(steady)
    assert rows(out / "events.csv") == []


def test_busy_command_is_logged_and_run_continues(tmp_path, capsys):
    sched = tmp_path / "s.yaml"
    sched.write_text("commands:\n"
                     "  - {at: 100us, set_freq: {island: A1, hz: 30MHz}}\n"
                     "  - {at: 101us, set_freq: {island: A1, hz: 40MHz}}\n"
                     "  - {at: 150us, set_freq: {island: A2, hz: 47MHz}}\n"
                     "  - {at: 200us, tg: {pos: [0, 0], enabled: true}}\n")
    out = tmp_path / "o"
    assert cli.main(["profile", "--schedule", str(sched), "--window", "100us", "--out", str(out)]) == 0
    results = [r["result"] for r in rows(out / "events.csv")]
    assert results[0] == "accepted" and results[1] == "busy" and results[2] == "off_step_grid"
    assert results[3].startswith("rejected")
    err = capsys.readouterr().err
    assert "busy" in err and "off_step_grid" in err
    assert rows(out / "mem_traffic.csv")[-1]["time_fs"] == str(600 * 10**9)


def test_profile_outputs_and_plot_data(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["profile", "--config", str(SCEN / "dfs_testbed.yaml"),
                     "--schedule", str(SCEN / "dfs_schedule.yaml"), "--duration", "1ms",
                     "--window", "250us", "--out", str(out)]) == 0
    assert header(out / "freq_profile.csv") == cli.FREQ_COLUMNS
    assert header(out / "mem_traffic.csv") == cli.TRAFFIC_COLUMNS
    assert header(out / "events.csv") == cli.EVENT_COLUMNS
    import json

    plot = json.loads((out / "plot_data.json").read_text())
    labels = [s["label"] for s in plot["series"]]
    assert "MEM incoming traffic" in labels
    assert {s["panel"] for s in plot["series"]} == {"frequency", "traffic"}
    for s in plot["series"]:
        assert len(s["x"]) == len(s["y"]) > 0


def test_render_flag_writes_an_image(tmp_path):
    pytest.importorskip("matplotlib")
    img = tmp_path / "fig.png"
    assert cli.main(["profile", "--duration", "500us", "--window", "250us", "--render", str(img),
                     "--out", str(tmp_path)]) == 0
    assert img.read_bytes()[:4] == b"\x89PNG"


def test_console_script_is_installed(tmp_path):
    exe = shutil.which("vespa-sim")
    if exe is None:
        pytest.skip("package not installed")
    res = subprocess.run([exe, "run", "--duration", "0", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
    assert (tmp_path / "metrics.csv").exists()
