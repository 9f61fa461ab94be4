import csv
import io
import json
import subprocess
import sys

import pytest

from fleetcoop.cli import main

EMPTY_CORE = "n=3\n" + "".join(f"members={m} cost={c}\n" for m, c in [
    ("1", 1), ("2", 1), ("3", 1), ("1,2", 1), ("1,3", 1), ("2,3", 1), ("1,2,3", 2)])


def run(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_game_on_case_b(data_dir, tmp_path, capsys):
    code, out, _ = run(["game", str(data_dir / "case_b.toml"), "--out", str(tmp_path)], capsys)
    assert code == 0
    table = rows(tmp_path / "game.csv")
    assert len(table) == 7
    assert [r["coalition"] for r in table] == ["{1}", "{2}", "{3}", "{1, 2}", "{1, 3}", "{2, 3}", "{1, 2, 3}"]
    side = json.loads((tmp_path / "game.json").read_text())
    grand = side["coalitions"]["{1, 2, 3}"]["cost"]
    assert sum(side["shapley"]) == pytest.approx(grand, abs=1e-6)
    assert side["shapley_in_core"] in (True, False)
    assert (tmp_path / "core_vertices.csv").exists()
    assert "core: nonempty" in out


def test_game_single_aggregator(data_dir, tmp_path, capsys):
    code, _, _ = run(["game", str(data_dir / "solo.toml"), "--out", str(tmp_path)], capsys)
    assert code == 0
    table = rows(tmp_path / "game.csv")
    assert len(table) == 1
    assert table[0]["value_usd"] == table[0]["phi_1"] == "0.545"
    assert table[0]["energy_kwh"] == "2.180"


def test_game_override_with_empty_core(data_dir, tmp_path, capsys):
    cfn = tmp_path / "empty.cfn"
    cfn.write_text(EMPTY_CORE)
    out_dir = tmp_path / "out"
    code, out, _ = run(["game", str(data_dir / "case_b.toml"), "--override", str(cfn), "--out", str(out_dir)], capsys)
    assert code == 3
    assert len(rows(out_dir / "game.csv")) == 7
    assert rows(out_dir / "core_vertices.csv") == [{"vertex": "empty", "x_1": "", "x_2": "", "x_3": ""}]
    assert "core: empty" in out


def test_shapley_on_published_game(data_dir, tmp_path, capsys):
    code, out, _ = run(["shapley", str(data_dir / "published_game.cfn"), "--out", str(tmp_path)], capsys)
    assert code == 0
    lines = dict(line.split(",", 1) for line in out.splitlines())
    assert lines["shapley"] == "-0.062,0.829,0.614"  # 0.828833 shown at 3 decimals
    phi = json.loads((tmp_path / "shapley.json").read_text())["shapley"]
    assert phi == pytest.approx([-0.062, 0.828, 0.614], abs=0.001)
    assert lines["core"] == "nonempty" and lines["shapley_in_core"] == "true"


def test_shapley_empty_core(tmp_path, capsys):
    cfn = tmp_path / "empty.cfn"
    cfn.write_text(EMPTY_CORE)
    code, out, _ = run(["shapley", str(cfn)], capsys)
    assert code == 3 and "core,empty" in out


def test_shapley_missing_coalition(tmp_path, capsys):
    cfn = tmp_path / "partial.cfn"
    cfn.write_text(EMPTY_CORE.replace("members=1,3 cost=1\n", ""))
    code, _, err = run(["shapley", str(cfn)], capsys)
    assert code == 1 and "IncompleteFunction" in err and "{1, 3}" in err


@pytest.mark.parametrize("mode", ["aware", "blind"])
def test_bench_modes(data_dir, tmp_path, capsys, mode):
    code, _, _ = run(["bench", str(data_dir / "case_b.toml"), "--mode", mode, "--out", str(tmp_path)], capsys)
    assert code == 0
    table = rows(tmp_path / f"bench_{mode}.csv")
    assert [r["aggregator"] for r in table] == ["1", "2", "3"]
    side = json.loads((tmp_path / f"bench_{mode}.json").read_text())
    assert side["mode"] == mode


def test_bench_sampled_is_byte_identical(data_dir, tmp_path, capsys):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        code, _, _ = run(["bench", str(data_dir / "case_b.toml"), "--mode", "aware", "--samples", "2000",
                          "--seed", "5", "--out", str(d)], capsys)
        assert code == 0
        outs.append(((d / "bench_aware.csv").read_bytes(), (d / "bench_aware.json").read_bytes()))
    assert outs[0] == outs[1]


@pytest.mark.parametrize("argv", [
    [],
    ["game"],
    ["bench", "x.toml"],
    ["bench", "x.toml", "--mode", "psychic"],
    ["game", "x.toml", "--node-budget", "0"],
    ["shapley", "does-not-exist.cfn"],
    ["game", "does-not-exist.toml"],
])
def test_usage_errors(argv, capsys):
    code, _, _ = run(argv, capsys)
    assert code == 1


def test_blind_rejects_sampling_flags(data_dir, tmp_path, capsys):
    code, _, _ = run(["bench", str(data_dir / "case_b.toml"), "--mode", "blind", "--samples", "10",
                      "--out", str(tmp_path)], capsys)
    assert code == 1


def test_bad_prior_is_usage_error(data_dir, tmp_path, capsys):
    code, _, _ = run(["bench", str(data_dir / "case_b.toml"), "--mode", "aware", "--prior", "0.5,0.5,0.5",
                      "--out", str(tmp_path)], capsys)
    assert code == 1


def test_budget_exhaustion_exit_code(data_dir, tmp_path, capsys):
    code, _, _ = run(["game", str(data_dir / "case_b.toml"), "--node-budget", "1", "--out", str(tmp_path)], capsys)
    assert code == 4


def test_infeasible_coalition_exit_code(data_dir, tmp_path, capsys):
    # fleet 2 starts with empty batteries and cannot reach even its own charger
    text = (data_dir / "case_b.toml").read_text().replace(
        "owner = 2\nbattery_capacity_kwh = 24.0\ninitial_soc_kwh = 3.0",
        "owner = 2\nbattery_capacity_kwh = 24.0\ninitial_soc_kwh = 0.0")
    sc = tmp_path / "dead.toml"
    sc.write_text(text)
    code, _, err = run(["game", str(sc), "--out", str(tmp_path / "o")], capsys)
    assert code == 2
    assert "coalition {2} infeasible" in err and "request 1" in err


def test_invalid_scenario_is_usage_error(data_dir, tmp_path, capsys):
    sc = tmp_path / "short.toml"
    sc.write_text((data_dir / "case_b.toml").read_text().replace("steps = 24", "steps = 12"))
    code, _, err = run(["game", str(sc), "--out", str(tmp_path / "o")], capsys)
    assert code == 1 and "HorizonTooShort" in err


def test_sweep_single_pair(tmp_path, capsys):
    spec = tmp_path / "one.toml"
    spec.write_text("node_counts = [9]\naggregator_counts = [3]\nseed = 7\nn_requests = 4\n")
    code, _, _ = run(["sweep", str(spec), "--out", str(tmp_path)], capsys)
    assert code == 0
    table = rows(tmp_path / "sweep.csv")
    assert len(table) == 1 and table[0]["energy_kwh"] == "1.741"


def test_console_script_entry(data_dir):
    proc = subprocess.run([sys.executable, "-m", "fleetcoop.cli", "shapley", str(data_dir / "published_game.cfn")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("shapley,")
