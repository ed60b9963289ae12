import json

import pytest
from click.testing import CliRunner

from crowdsense import cli, scenario
from crowdsense.scenario import RunReport


@pytest.fixture
def runner():
    return CliRunner()


def test_setup_and_reload(runner, tmp_path):
    res = runner.invoke(cli.main, ["setup", "--profile", "test", "--out-dir", str(tmp_path), "--seed", "1"])
    assert res.exit_code == 0, res.output
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "circle.json", "circle_secrets.json", "public.json", "secrets.json"]
    res = runner.invoke(cli.main, ["bench", "--params", str(tmp_path), "--repetitions", "1", "--phase", "credit"])
    assert res.exit_code == 0 and "credit" in res.output


def test_setup_env_override(runner, tmp_path):
    res = runner.invoke(cli.main, ["setup", "--seed", "2"], env={cli.OUT_DIR_ENV: str(tmp_path / "x")})
    assert res.exit_code == 0
    assert (tmp_path / "x" / "public.json").exists()


def test_corrupted_params_rejected(runner, tmp_path):
    runner.invoke(cli.main, ["setup", "--out-dir", str(tmp_path), "--seed", "1"])
    doc = json.loads((tmp_path / "public.json").read_text())
    doc["body"]["grid"] = [1, 1]
    (tmp_path / "public.json").write_text(json.dumps(doc))
    res = runner.invoke(cli.main, ["bench", "--params", str(tmp_path), "--repetitions", "1"])
    assert res.exit_code != 0
    assert "IntegrityError" in repr(res.exception)


def test_run_bundled(runner, tmp_path):
    out = tmp_path / "r.csv"
    res = runner.invoke(cli.main, ["run", "double_report", "--csv", str(out)])
    assert res.exit_code == 0, res.output
    assert "1 1 bob bob" in res.output
    assert out.read_text().startswith("section,key,value")


def test_run_is_byte_identical(runner):
    a = runner.invoke(cli.main, ["run", "happy_path"]).output
    b = runner.invoke(cli.main, ["run", "happy_path"]).output
    assert a == b


def test_run_failure_exit_code(runner, monkeypatch):
    def failing(cfg):
        rep = RunReport(cfg.name, cfg.seed)
        rep.check("forced", False)
        return rep
    monkeypatch.setattr(cli, "run_scenario", failing)
    res = runner.invoke(cli.main, ["run", "happy_path"])
    assert res.exit_code == 1 and "FAIL forced" in res.output


def test_run_bad_config(runner, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("version: 1\nusers: []\n")
    res = runner.invoke(cli.main, ["run", str(bad)])
    assert res.exit_code == 2 and "seed" in res.output


def test_list_scenarios(runner):
    res = runner.invoke(cli.main, ["list-scenarios"])
    assert res.output.split() == ["adversarial", "circle", "double_report", "happy_path"]


def test_bench_zero_repetitions(runner):
    res = runner.invoke(cli.main, ["bench", "--repetitions", "0"])
    assert res.exit_code == 2


def test_bench_strict_reports_mismatch(runner):
    res = runner.invoke(cli.main, ["bench", "--repetitions", "1", "--strict"])
    assert res.exit_code == 1 and "NO" in res.output
    res = runner.invoke(cli.main, ["bench", "--repetitions", "1", "--strict", "--phase", "credit"])
    assert res.exit_code == 0


def test_credit_sim(runner, tmp_path):
    args = ["credit-sim", "--mode", "w-sweep", "--points", "10,20", "--fixed", "100", "--trials", "4",
            "--seed", "3", "--strategy", "uniform", "--strategy", "gaussian-high"]
    a = runner.invoke(cli.main, args + ["--out", str(tmp_path / "a.csv")])
    b = runner.invoke(cli.main, args + ["--out", str(tmp_path / "b.csv")])
    assert a.exit_code == b.exit_code == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2 * 4
    assert all(line.split(",")[1] == "100" for line in lines[1:])


def test_credit_sim_range_error(runner):
    res = runner.invoke(cli.main, ["credit-sim", "--mode", "w-sweep", "--points", "2000", "--trials", "1"])
    assert res.exit_code == 2
    res = runner.invoke(cli.main, ["credit-sim", "--points", "a,b"])
    assert res.exit_code == 2


def test_trace_demo(runner):
    res = runner.invoke(cli.main, ["trace-demo", "--users", "5", "--seed", "4"])
    assert res.exit_code == 0 and "honest collisions 0" in res.output
    assert runner.invoke(cli.main, ["trace-demo", "--users", "0"]).exit_code == 2


def test_size_report(runner):
    res = runner.invoke(cli.main, ["size-report"])
    assert "registration_request   2176+|I|" in res.output
    res = runner.invoke(cli.main, ["size-report", "--widths", "backend", "--measure"])
    assert res.exit_code == 0 and "MISMATCH" not in res.output


def test_library_is_quiet(capfd):
    rep = scenario.run_scenario(scenario.ScenarioConfig.load(scenario.bundled("circle")))
    assert rep.ok
    out, err = capfd.readouterr()
    assert out == "" and err == ""
