import csv
import json

import pytest

from greencores.cli import main
from greencores.traces import parse_supply_trace, parse_vm_trace

SMALL = ["--servers", "4", "--duration-s", "86400"]


@pytest.fixture
def synth_file(tmp_path):
    path = tmp_path / "synth.json"
    path.write_text(json.dumps({"servers": 4, "arrival_rate": 300 / 86400}))
    return str(path)


def test_simulate_writes_report(tmp_path, synth_file):
    out = tmp_path / "sim"
    assert main(["simulate", "--synth", synth_file, "--out", str(out)] + SMALL) == 0
    data = json.loads((out / "report.json").read_text())
    assert data["policy"] == "proposed"
    assert (out / "timeseries.csv").exists()


def test_missing_trace_exits_1(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code = main(["simulate", "--vm-trace", str(missing), "--supply-trace", str(missing), "--out", str(tmp_path)])
    assert code == 1
    assert str(missing) in capsys.readouterr().err


def test_only_one_trace_flag_exits_1(tmp_path):
    assert main(["simulate", "--vm-trace", "x.csv", "--out", str(tmp_path)]) == 1


def test_bad_flag_exits_1(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--policy", "first-fit"])
    assert exc.value.code == 1


def test_empty_vm_trace(tmp_path):
    vm = tmp_path / "vm.csv"
    vm.write_text("vm_id,arrival_s,lifetime_s,cores,criticality\n")
    sup = tmp_path / "s.csv"
    sup.write_text("time_s,value\n0,1\n900,2\n")
    out = tmp_path / "o"
    assert main(["simulate", "--vm-trace", str(vm), "--supply-trace", str(sup), "--out", str(out)]) == 0
    data = json.loads((out / "report.json").read_text())
    assert data["evictions_total"] == 0 and data["harvested_green_core_seconds"] == 0


def test_malformed_trace_exits_1(tmp_path, capsys):
    vm = tmp_path / "vm.csv"
    vm.write_text("vm_id,arrival_s,lifetime_s,cores,criticality\n1,0,10,0,critical\n")
    sup = tmp_path / "s.csv"
    sup.write_text("time_s,fraction\n0,1\n")
    assert main(["simulate", "--vm-trace", str(vm), "--supply-trace", str(sup), "--out", str(tmp_path)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_compare_needs_two_policies(tmp_path, synth_file):
    assert main(["compare", "--policies", "proposed", "--synth", synth_file, "--out", str(tmp_path)] + SMALL) == 1
    assert main(["compare", "--policies", "proposed,nope", "--synth", synth_file, "--out", str(tmp_path)]
                + SMALL) == 1


def test_compare_outputs_and_determinism(tmp_path, synth_file):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["compare", "--synth", synth_file, "--out", str(a)] + SMALL) == 0
    assert main(["compare", "--synth", synth_file, "--out", str(b), "--jobs", "2"] + SMALL) == 0
    ja = json.loads((a / "compare.json").read_text())
    assert ja == json.loads((b / "compare.json").read_text())
    assert max(ja["normalized_harvest"].values()) == 1.0
    hashes = {r["trace_hash"] for r in ja["reports"].values()}
    assert len(hashes) == 1
    with open(a / "compare.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["policy"] for r in rows] == ["proposed", "best-fit", "crit-aware"]


def test_sweep_default_distance_equals_simulate(tmp_path, synth_file):
    assert main(["sweep", "--distances", "1.3,0.05", "--synth", synth_file, "--out", str(tmp_path / "sw")]
                + SMALL) == 0
    assert main(["simulate", "--synth", synth_file, "--out", str(tmp_path / "sim")] + SMALL) == 0
    with open(tmp_path / "sw" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    sim = json.loads((tmp_path / "sim" / "report.json").read_text())
    assert int(rows[0]["harvest_core_s"]) == sim["harvested_green_core_seconds"]
    assert int(rows[0]["evictions"]) == sim["evictions_total"]
    assert float(rows[1]["tau_critical_rnw"]) < 1.0


@pytest.mark.parametrize("d", ["1.5", "-0.2", "abc"])
def test_sweep_infeasible_distance(tmp_path, d):
    assert main(["sweep", "--distances", d, "--out", str(tmp_path)] + SMALL) == 1


def test_gen_trace_round_trip(tmp_path, synth_file):
    out = tmp_path / "g"
    assert main(["gen-trace", "--synth", synth_file, "--seed", "3", "--out", str(out)] + SMALL) == 0
    vm = parse_vm_trace(out / "vm_trace.csv")
    sup = parse_supply_trace(out / "supply.csv")
    assert len(vm) > 0 and len(sup) == 96
    sim = tmp_path / "s"
    assert main(["simulate", "--vm-trace", str(out / "vm_trace.csv"), "--supply-trace", str(out / "supply.csv"),
                 "--out", str(sim)] + SMALL) == 0
    syn = tmp_path / "s2"
    assert main(["simulate", "--synth", synth_file, "--seed", "3", "--out", str(syn)] + SMALL) == 0
    assert json.loads((sim / "report.json").read_text()) == json.loads((syn / "report.json").read_text())


def test_config_file_and_flag_precedence(tmp_path, synth_file):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"policy": "best-fit", "server_count": 4}))
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--synth", synth_file, "--out", str(out),
                 "--duration-s", "86400"]) == 0
    assert json.loads((out / "report.json").read_text())["policy"] == "best-fit"
    assert main(["simulate", "--config", str(cfg), "--policy", "crit-aware", "--synth", synth_file,
                 "--out", str(out), "--duration-s", "86400"]) == 0
    assert json.loads((out / "report.json").read_text())["policy"] == "crit-aware"
