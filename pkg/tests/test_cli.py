import csv
import json

import pytest

from wardrop_cycles import cli
from wardrop_cycles.pathset import PathSet, load_archive, save_archive, toy_pathset

NET = """<NUMBER OF ZONES> 2
<NUMBER OF NODES> 3
<FIRST THRU NODE> 1
<NUMBER OF LINKS> 4
<END OF METADATA>
~ init term cap len fft b power speed toll type ;
1 2 10 1 5 0.15 4 0 0 1 ;
1 3 10 1 4 0.15 4 0 0 1 ;
3 2 10 1 2 0.15 4 0 0 1 ;
2 1 10 1 5 0.15 4 0 0 1 ;
"""


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def tiny(tmp_path):
    (tmp_path / "Tiny_net.tntp").write_text(NET)
    (tmp_path / "Tiny_trips.tntp").write_text("<NUMBER OF ZONES> 2\n<END OF METADATA>\nOrigin 1\n 2 : 30;\n")
    (tmp_path / "Empty_net.tntp").write_text(NET)
    (tmp_path / "Empty_trips.tntp").write_text("<NUMBER OF ZONES> 2\n<END OF METADATA>\n")
    return tmp_path


def test_assign_tiny_city(tiny, monkeypatch, capsys):
    monkeypatch.setenv(cli.DATA_ENV, str(tiny))
    out = tiny / "out"
    assert cli.main(["--out", str(out), "assign", "--city", "Tiny"]) == 0
    pathsets, meta = load_archive(out / "pathsets.json")
    assert meta["city"] == "Tiny"
    assert [ps.Q for ps in pathsets] == [30]
    (poa,) = rows(out / "poa_summary.csv")
    assert float(poa["poa"]) >= 1.0
    assert "PoA" in capsys.readouterr().out


def test_empty_trips_warns_and_succeeds(tiny, monkeypatch):
    monkeypatch.setenv(cli.DATA_ENV, str(tiny))
    with pytest.warns(UserWarning):
        rc = cli.main(["--out", str(tiny / "e"), "assign", "--city", "Empty"])
    assert rc == 0
    assert load_archive(tiny / "e" / "pathsets.json")[0] == []
    assert rows(tiny / "e" / "poa_summary.csv")[0]["poa"] == ""


def test_cycle_on_toy_archive(tmp_path):
    save_archive([toy_pathset()], tmp_path / "pathsets.json", {"city": "toy"})
    assert cli.main(["--out", str(tmp_path), "cycle"]) == 0
    (r,) = rows(tmp_path / "cycle_lengths.csv")
    assert (r["full"], r["gcd"], r["partition_max"], r["wardropian"]) == ("18", "9", "5", "true")


def test_single_path_archive(tmp_path):
    save_archive([PathSet.from_flows((3,), (2.0,), od=(1, 2)), PathSet.from_flows((5,), (4.0,), od=(1, 3))],
                 tmp_path / "pathsets.json")
    assert cli.main(["--out", str(tmp_path), "cycle", "--min-paths", "1"]) == 0
    got = rows(tmp_path / "cycle_lengths.csv")
    assert {(r["full"], r["gcd"]) for r in got} == {("3", "1"), ("5", "1")}
    assert cli.main(["--out", str(tmp_path), "cycle", "--min-q", "1", "--min-paths", "1", "--methods", "gcd"]) == 0
    assert all(r["gcd"] == "1" and r["full"] == "" for r in rows(tmp_path / "cycle_lengths.csv"))


def test_cycle_output_is_idempotent(tmp_path):
    save_archive([toy_pathset(), PathSet.from_flows((2, 5), (3.0, 1.5), od=(2, 1))], tmp_path / "pathsets.json")
    cli.main(["--out", str(tmp_path / "a"), "cycle", "--archive", str(tmp_path / "pathsets.json")])
    cli.main(["--out", str(tmp_path / "b"), "cycle", "--archive", str(tmp_path / "pathsets.json")])
    for name in ("cycle_lengths.csv", "cycle_length_stats.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_rota_option(tmp_path):
    save_archive([toy_pathset()], tmp_path / "pathsets.json")
    assert cli.main(["--out", str(tmp_path), "cycle", "--rota", "1-2"]) == 0
    assert len(rows(tmp_path / "rota_1_2.csv")) == 9 * 18


def test_simulate_horizon_one(tmp_path):
    save_archive([toy_pathset()], tmp_path / "pathsets.json", {"city": "toy"})
    assert cli.main(["--out", str(tmp_path), "simulate", "--horizon", "1"]) == 0
    (r,) = rows(tmp_path / "inequity_ratios.csv")
    assert r["city"] == "toy" and float(r["sum_I1"]) > 0
    assert [r[f"ratio_{d}"] for d in (5, 10, 20, 50)] == ["", "", "", ""]
    assert {x["day"] for x in rows(tmp_path / "inequity_distribution.csv")} == {"1"}


def test_simulate_ratios(tmp_path):
    save_archive([toy_pathset()], tmp_path / "pathsets.json")
    assert cli.main(["--out", str(tmp_path), "simulate", "--horizon", "20", "--detail"]) == 0
    (r,) = rows(tmp_path / "inequity_ratios.csv")
    assert r["ratio_5"] and r["ratio_20"] and not r["ratio_50"]
    assert len(rows(tmp_path / "simulation_detail.csv")) == 20 * 18


def test_config_file_and_override(tmp_path):
    save_archive([toy_pathset()], tmp_path / "pathsets.json")
    conf = tmp_path / "run.conf"
    conf.write_text("# defaults\nhorizon = 3\nmin_q = 2\nnot_an_option = 1\n")
    assert cli.main(["--out", str(tmp_path), "--config", str(conf), "simulate"]) == 0
    assert json.loads((tmp_path / "manifest_simulate.json").read_text())["settings"]["horizon"] == 3
    assert cli.main(["--out", str(tmp_path), "--config", str(conf), "simulate", "--horizon", "4"]) == 0
    assert json.loads((tmp_path / "manifest_simulate.json").read_text())["settings"]["horizon"] == 4


def test_oracle_subcommand(capsys):
    assert cli.main(["oracle", "restricted", "--values", "4,4,1,-3,-3,-3"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == 5
    assert cli.main(["oracle", "next-day", "--values", "6,1,2", "--ledger", "5,0,0"]) == 0
    assert json.loads(capsys.readouterr().out)["assignment"][0] == 1
    assert cli.main(["oracle", "partition", "--values", "15,14,9", "--flows", "4,6,8"]) == 0
    assert len(json.loads(capsys.readouterr().out)["groups"]) == 6


def test_errors_exit_nonzero(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path), "cycle"]) == 1
    assert "error" in capsys.readouterr().err
    assert cli.main(["assign", "--net", str(tmp_path / "x_net.tntp")]) == 1
    with pytest.raises(SystemExit):
        cli.main(["frobnicate"])
