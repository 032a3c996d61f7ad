import json
import subprocess
import sys

import pytest

from magdirac import cli
from magdirac.bnf import ModelSymbol
from magdirac.koszul import ChainElement, KoszulData


def run_cli(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_rationals_exact():
    cfg = cli.parse_config(["landau", "--m", "2", "--mu", "1,9/4", "--h", "1", "--lambda-max", "2"])
    assert [str(v) for v in cfg.params["mu"]] == ["1", "9/4"]


def test_grid_specs():
    g = cli.parse_grid("log:1e-3..1e-1:20")
    assert len(g) == 20 and g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(1e-1)
    assert cli.parse_grid("lin:0..1:5") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert cli.parse_grid("0.1,1/2") == [0.1, 0.5]
    for bad in ("log:0..1:3", "log:1..2", "lin:a..b:3", "1,,2"):
        with pytest.raises(ValueError):
            cli.parse_grid(bad)


def test_parse_phi():
    assert cli.parse_phi("odd-gaussian:t=2").parity == -1
    assert cli.parse_phi("bump:R=1.5").support == 1.5
    with pytest.raises(ValueError):
        cli.parse_phi("gaussian:s=1")
    with pytest.raises(ValueError):
        cli.parse_phi("cauchy:t=1")


def test_bundle_defaults():
    cfg = cli.parse_config(["bundle", "--h-grid", "0.01"])
    c = cfg.params["cfg"]
    assert (c.m, c.epsilon, c.chi) == (1, 0.25, [0, 1])


def test_empty_config_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    cfg = cli.parse_config(["bundle", "--config", str(p), "--h-grid", "0.01"])
    assert cfg.params["cfg"].chi == [0, 1]


def test_all_errors_reported():
    with pytest.raises(cli.ConfigError) as exc:
        cli.parse_config(["landau", "--m", "x", "--mu", "1,-2", "--h", "0", "--lambda-max", "-1", "--bogus", "3", "--format", "xml"])
    keys = {e.split(":")[0] for e in exc.value.errors}
    assert {"--m", "--mu", "--h", "--lambda-max", "--bogus", "--format"} <= keys


def test_missing_required_listed():
    with pytest.raises(cli.ConfigError) as exc:
        cli.parse_config(["heat-trace", "--m", "1"])
    assert {"--lambda: required", "--t-grid: required"} <= set(exc.value.errors)


def test_unknown_subcommand(capsys):
    code, _, err = run_cli(["frobnicate"], capsys)
    assert code == 2 and "subcommand" in err


def test_landau_csv(tmp_path, capsys):
    out = tmp_path / "spectrum.csv"
    code, _, _ = run_cli(["landau", "--m", "1", "--mu", "1", "--h", "1", "--lambda-max", "2",
                          "--oracle-cutoff", "12", "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# schema_version: 1"
    assert "eigenvalue,multiplicity,tau,sign" in lines
    rep = json.loads((tmp_path / "spectrum.csv.report.json").read_text())
    assert rep["passed"] and {c["name"] for c in rep["checks"]} >= {"oracle_match", "one_dimensional_kernel"}


def test_determinism(tmp_path, capsys):
    args = ["koszul", "--m", "1", "--Nw", "4", "--Mc", "1", "--samples", "3", "--seed", "7", "--format", "csv"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli(args + ["--out", str(a)], capsys)[0] == 0
    assert run_cli(args + ["--out", str(b)], capsys)[0] == 0
    assert a.read_text() == b.read_text()


def test_koszul_variable_rho(capsys):
    code, out, _ = run_cli(["koszul", "--m", "1", "--Nw", "4", "--Mc", "1", "--rho", "1,1/4", "--samples", "3"], capsys)
    obj = json.loads(out)
    assert code == 0 and obj["passed"]


def test_heat_trace_and_failure_exit(capsys, monkeypatch):
    args = ["heat-trace", "--m", "2", "--lambda", "1,1.5", "--t-grid", "log:0.1..5:20", "--format", "json"]
    code, out, _ = run_cli(args, capsys)
    assert code == 0 and len(json.loads(out)["tables"]["heat_trace"]["rows"]) == 20

    import magdirac.trace as trace
    real = trace.landau_trace_sum

    def broken(*a, **k):
        s = real(*a, **k)
        return trace.LandauSum(s.value * (1 + 1e-6), s.tail, s.box)

    monkeypatch.setattr(trace, "landau_trace_sum", broken)
    code, out, err = run_cli(args, capsys)
    obj = json.loads(out)
    assert code == 1 and not obj["passed"]
    assert obj["checks"][0]["name"] == "mehler_equals_landau_sum" and not obj["checks"][0]["passed"]
    assert "check failed" in err


def test_u0(capsys):
    code, out, _ = run_cli(["u0", "--nu", "1", "--mu", "1,1.5", "--phi", "odd-gaussian:t=1", "--format", "json"], capsys)
    obj = json.loads(out)
    assert code == 0 and obj["checks"][0]["name"] == "vanishes_on_odd"


def bnf_input(tmp_path):
    d1 = ModelSymbol(KoszulData(1, [1]), 6, 2, ChainElement.from_terms(1, 6, 2, [(1, {1: 2}, {}, 0, [1])]))
    p = tmp_path / "d1.json"
    p.write_text(json.dumps(d1.to_json()))
    return p


def test_bnf_verify(tmp_path, capsys):
    p = bnf_input(tmp_path)
    code, out, _ = run_cli(["bnf", "--input", str(p), "--N", "4", "--verify"], capsys)
    obj = json.loads(out)
    assert code == 0 and obj["passed"]
    assert all(v == 0 for w, v in obj["defect_profile"].items() if int(w) <= 4)
    assert {"f", "a", "omega"} <= set(obj["result"])


def test_bnf_config_errors(tmp_path, capsys):
    p = bnf_input(tmp_path)
    code, _, err = run_cli(["bnf", "--input", str(p), "--N", "5"], capsys)
    assert code == 2 and "--N" in err
    bad = tmp_path / "bad.json"
    bad.write_text('{"m": 1}')
    code, _, err = run_cli(["bnf", "--input", str(bad), "--N", "2"], capsys)
    assert code == 2 and "lacks keys" in err
    code, _, err = run_cli(["bnf", "--input", str(tmp_path / "nope.json"), "--N", "2"], capsys)
    assert code == 2 and "no such file" in err


def test_bundle_sweep(tmp_path, capsys):
    cfgf = tmp_path / "cfg.json"
    cfgf.write_text(json.dumps({"m": 2, "epsilon": 0.25, "chi": [0, 0, 1]}))
    out = tmp_path / "b.csv"
    code, _, _ = run_cli(["bundle", "--config", str(cfgf), "--h-grid", "log:0.0015..0.02:12", "--c", "0.1",
                          "--snap-resonant", "--out", str(out)], capsys)
    assert code == 0
    text = out.read_text()
    assert "stat,slope,stderr,note" in text
    k_row = [l for l in text.splitlines() if l.startswith("k_h,")][0]
    assert abs(float(k_row.split(",")[1]) - 2) < 0.1


def test_bundle_bad_config(tmp_path, capsys):
    cfgf = tmp_path / "cfg.json"
    cfgf.write_text(json.dumps({"m": 1, "chi": [0, 0, 1], "color": "blue"}))
    code, _, err = run_cli(["bundle", "--config", str(cfgf), "--h-grid", "0.01", "--c", "-1"], capsys)
    assert code == 2 and "--config" in err and "--c" in err


def test_runtime_error_exit(capsys):
    # the Landau sum box for t -> 0 exceeds the lattice cap
    code, _, err = run_cli(["heat-trace", "--m", "3", "--lambda", "1,1,1", "--t-grid", "1e-6"], capsys)
    assert code == 3 and "error" in err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "magdirac", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "0.1.0" in r.stdout
