import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from wlansense import cli
from wlansense.scenario import (ScenarioError, apply_overrides, load, load_raw, parse_override,
                                shipped, shipped_names)
from wlansense.simulate import read_payloads, stream_seed, substream, write_payloads

GOLDEN = Path(__file__).parent / "golden"


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


# -- scenarios ---------------------------------------------------------------------

def test_shipped_scenarios_load():
    names = shipped_names()
    assert {"living_room", "conference_room", "dmg_lab"} <= set(names)
    for n in names:
        sc = shipped(n)
        assert sc.scene.sta(sc.tx) and sc.scene.sta(sc.rx)


def test_parse_override_types():
    assert parse_override("a.b=3") == ("a.b", 3)
    assert parse_override("a=[1, 2]") == ("a", [1, 2])
    assert parse_override("a=TB") == ("a", "TB")
    with pytest.raises(ScenarioError):
        parse_override("novalue")


def test_apply_overrides_nested_and_indexed():
    raw = {"stas": [{"id": "AP", "position": [0, 0, 0]}], "procedure": {}}
    out = apply_overrides(raw, ["stas.0.position.2=1.5", "procedure.mode=NonTB", "new.key=true"])
    assert out["stas"][0]["position"] == [0, 0, 1.5]
    assert out["procedure"]["mode"] == "NonTB" and out["new"]["key"] is True
    assert raw["procedure"] == {}  # input untouched
    with pytest.raises(ScenarioError):
        apply_overrides(raw, ["stas.7.id=x"])


def test_load_rejects_unknown_keys(tmp_path):
    raw = load_raw("living_room")
    raw["bogus"] = 1
    p = tmp_path / "s.json"
    p.write_text(json.dumps(raw))
    with pytest.raises(ScenarioError):
        load(p)


def test_load_with_overrides_changes_link():
    sc = load("living_room", ["link.rx=STA1"])
    assert (sc.tx, sc.rx) == ("AP", "STA1")
    with pytest.raises(ScenarioError):
        load("living_room", ["link.rx=NOPE"])


def test_missing_scenario_file():
    with pytest.raises(ScenarioError):
        load("/nonexistent/scenario.json")


def test_substreams_independent():
    seeds = {stream_seed(7, n) for n in ("channel", "noise", "loss", "evaluation")}
    assert len(seeds) == 4
    assert substream(7, "noise").entropy == substream(7, "noise").entropy


def test_payload_file_roundtrip(tmp_path):
    blobs = [b"", b"\x01\x02", bytes(range(256))]
    write_payloads(blobs, tmp_path / "p.bin")
    assert read_payloads(tmp_path / "p.bin") == blobs


# -- CLI -------------------------------------------------------------------------------

def test_simulate_exit_ok_and_outputs(tmp_path):
    assert run(tmp_path, "simulate", "--scenario", "living_room", "--seed", "0", "--no-eval") == 0
    for f in ("trace.txt", "payloads.bin", "curve.csv", "hist.csv"):
        assert (tmp_path / f).is_file()


def test_living_room_trace_matches_golden(tmp_path):
    run(tmp_path, "simulate", "--scenario", "living_room", "--seed", "0", "--no-eval")
    assert (tmp_path / "trace.txt").read_bytes() == (GOLDEN / "living_room_seed0.trace").read_bytes()


def frame_order(path):
    return [line.split(" | ")[1:3] for line in Path(path).read_text().splitlines()
            if "Measure" not in line]


def test_seed_changes_payloads_not_frame_order(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(a, "simulate", "--scenario", "living_room", "--seed", "0", "--no-eval")
    run(b, "simulate", "--scenario", "living_room", "--seed", "5", "--no-eval")
    assert frame_order(a / "trace.txt") == frame_order(b / "trace.txt")
    assert (a / "payloads.bin").read_bytes() != (b / "payloads.bin").read_bytes()


@pytest.mark.parametrize("args", [
    ["simulate", "--scenario", "/no/such.json", "--seed", "1"],
    ["simulate", "--scenario", "living_room", "--seed", "1", "--set", "procedure.mode=Bogus"],
    ["simulate", "--scenario", "living_room", "--seed", "1", "--set", "procedure.initiator=STA1"],
    ["simulate", "--scenario", "living_room"],
    ["sequences", "everything", "--seed", "1"],
    ["quant-bench", "--seed", "1", "--channels", "0"],
    ["nosuchcommand"],
])
def test_config_errors_exit_2(tmp_path, args):
    assert run(tmp_path, *args) == cli.EXIT_CONFIG


def test_invariant_violation_exits_3(tmp_path, monkeypatch):
    from wlansense.protocol import validate

    def broken(trace):
        raise validate.InvariantViolation("forced")
    monkeypatch.setattr("wlansense.simulate.check_trace", broken)
    assert run(tmp_path, "simulate", "--scenario", "living_room", "--seed", "1", "--no-eval") == 3


def test_simulate_modes_run(tmp_path):
    for name in ("conference_room", "dmg_lab"):
        assert run(tmp_path / name, "simulate", "--scenario", name, "--seed", "2", "--no-eval") == 0


def test_sequences_matrix(tmp_path):
    assert run(tmp_path, "sequences", "matrix", "--seed", "0") == 0
    rows = list(csv.DictReader(open(tmp_path / "sync_matrix.csv")))
    assert len(rows) == 64
    diag = [int(r["value"]) for r in rows if r["row"] == r["col"]]
    assert diag == [256] * 8  # max autocorrelation sidelobe, not the 1024 peak


def test_sequences_ce_and_sync(tmp_path):
    assert run(tmp_path, "sequences", "ce", "--seed", "0") == 0
    assert run(tmp_path, "sequences", "sync", "--seed", "0") == 0
    assert (tmp_path / "ce0.csv").is_file() and (tmp_path / "sync_8.csv").is_file()


def test_quant_bench(tmp_path):
    assert run(tmp_path, "quant-bench", "--seed", "3", "--channels", "10", "--n-b", "6", "8") == 0
    rows = list(csv.DictReader(open(tmp_path / "quant_bench.csv")))
    assert len(rows) == 8 and {r["scheme"] for r in rows} == {"legacy", "simplified", "pow2", "fractional"}


def test_af_outputs(tmp_path):
    assert run(tmp_path, "af", "--seed", "0", "--full-doppler-points", "3") == 0
    for name in ("af_ce0_full", "caf_ce0_ce1_full", "af_ce0_local", "caf_ce0_ce1_local"):
        assert (tmp_path / f"{name}.csv").stat().st_size > 0
    local = (tmp_path / "af_ce0_local.csv").read_text().splitlines()
    assert len(local) == 1 + 129 * 21


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "wlansense", "sequences", "matrix", "--seed", "0",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("[[256")
