import json
from pathlib import Path

import numpy as np

from steelrank.cli import RunConfig, main, quality_harness, render_json, run

DATA = Path(__file__).parent / "data"
IQ = str(DATA / "iq_birth_condition.csv")


def run_main(capsys, args):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_steel_mode_reproduces_reference_values(capsys):
    code, out, _ = run_main(
        capsys,
        ["--input", IQ, "--alternative", "less", "--method", "all",
         "--nsim", "100000", "--seed", "20260809", "--mode", "steel"],
    )
    assert code == 0
    report = json.loads(out)
    obs = report["observation"]
    assert obs["w_star"] == [7, 17, 12.5]
    assert abs(obs["s_min"] - (-1.7713)) <= 5e-5
    assert abs(report["p_values"]["asymptotic"]["estimate"] - 0.0946) <= 5e-4
    p_sim = report["p_values"]["monte_carlo"]["estimate"]
    assert abs(p_sim - 0.10474) <= 3 * np.sqrt(0.10474 * (1 - 0.10474) / 100000)
    assert report["moments"]["tau"] == [6.210249083] * 3


def test_reports_are_byte_identical_across_runs_and_workers(capsys, monkeypatch):
    args = ["--input", IQ, "--alternative", "less", "--method", "simulated",
            "--nsim", "20000", "--seed", "7"]
    monkeypatch.setenv("STEELRANK_THREADS", "1")
    _, first, _ = run_main(capsys, args)
    monkeypatch.setenv("STEELRANK_THREADS", "8")
    _, second, _ = run_main(capsys, args)
    monkeypatch.delenv("STEELRANK_THREADS")
    _, third, _ = run_main(capsys, args)
    assert first == second == third


def test_json_round_trip_is_canonical(capsys):
    _, out, _ = run_main(capsys, ["--input", IQ, "--method", "asymptotic"])
    assert render_json(json.loads(out)) == out


def test_csv_wide_and_whitespace_formats(tmp_path, capsys):
    wide = tmp_path / "wide.csv"
    wide.write_text("a,b,c\n1,4,7\n2,5,8\n3,6,\n,9,\n")
    _, out, _ = run_main(
        capsys, ["--input", str(wide), "--format", "csv_wide", "--method", "asymptotic"]
    )
    report = json.loads(out)
    assert report["groups"]["sizes"] == [3, 4, 2]

    ws = tmp_path / "data.txt"
    ws.write_text("ctrl 1 2 3\nt1 4 5 6 7\nt1 8\n")
    _, out, _ = run_main(
        capsys, ["--input", str(ws), "--format", "whitespace", "--method", "asymptotic"]
    )
    report = json.loads(out)
    assert report["groups"]["sizes"] == [3, 5]


def test_parse_error_reports_line_number(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("group,value\na,1\na,2\nb,oops\nb,4\n")
    code, _, err = run_main(capsys, ["--input", str(bad)])
    assert code == 2
    payload = json.loads(err)
    assert payload["error"]["type"] == "ParameterError"
    assert "line 4" in payload["error"]["message"]


def test_unknown_control_group(capsys):
    code, _, err = run_main(capsys, ["--input", IQ, "--control", "nope"])
    assert code == 2
    assert "nope" in json.loads(err)["error"]["message"]


def test_exact_over_budget_suggests_monte_carlo(tmp_path, capsys):
    rng = np.random.default_rng(0)
    f = tmp_path / "big.csv"
    lines = ["group,value"]
    for g in ("a", "b"):
        lines += [f"{g},{v:.6f}" for v in rng.normal(size=40)]
    f.write_text("\n".join(lines) + "\n")
    code, _, err = run_main(capsys, ["--input", str(f), "--method", "exact"])
    assert code == 2
    payload = json.loads(err)
    assert payload["error"]["type"] == "BudgetError"
    assert "monte_carlo" in payload["error"]["message"]


def test_degenerate_single_value_groups(tmp_path, capsys):
    f = tmp_path / "deg.csv"
    f.write_text("group,value\na,5\nb,5\n")
    _, out, _ = run_main(
        capsys, ["--input", str(f), "--mode", "confidence", "--seed", "1"]
    )
    report = json.loads(out)
    for pv in report["p_values"].values():
        assert pv["estimate"] == 1.0
    assert report["warnings"]
    conf = report["confidence"]
    assert conf["unreachable"]
    assert conf["lower"] == [0] and conf["upper"] == [0]


def test_confidence_mode_directions(capsys):
    _, out, _ = run_main(
        capsys,
        ["--input", IQ, "--mode", "confidence", "--alternative", "less",
         "--method", "asymptotic", "--conf-level", "0.9", "--round-eps", "0.5"],
    )
    report = json.loads(out)
    conf = report["confidence"]
    assert conf["direction"] == "upper"
    assert conf["widened_by"] == 0.5
    assert conf["lower"] == [None, None, None]
    assert len(conf["upper"]) == 3


def test_pairwise_mode(capsys):
    _, out, _ = run_main(
        capsys,
        ["--input", IQ, "--mode", "pairwise", "--method", "all",
         "--nsim", "20000", "--seed", "3"],
    )
    report = json.loads(out)
    assert report["pairwise"]["pairs"] == ["1-2", "1-3", "1-4", "2-3", "2-4", "3-4"]
    assert set(report["p_values"]) == {"monte_carlo", "mvn_sample"}
    for pv in report["p_values"].values():
        assert 0 <= pv["estimate"] <= 1


def test_harness_without_ties_columns_coincide():
    rng = np.random.default_rng(15)
    groups = [rng.normal(size=30).tolist() for _ in range(3)]
    rows = quality_harness(groups, "greater", p_grid=(0.2, 0.05), nsim=2000, seed=2)
    for row in rows:
        assert abs(row["p_asym_adj"] - row["p_asym_unadj"]) <= 1e-12
        assert set(row) == {"threshold", "p_sim", "p_asym_adj", "p_asym_unadj"}


def test_harness_mode_text_output_is_csv(tmp_path, capsys):
    rng = np.random.default_rng(1)
    f = tmp_path / "h.csv"
    lines = ["group,value"]
    for g in ("a", "b", "c"):
        lines += [f"{g},{v:.1f}" for v in rng.normal(size=25)]
    f.write_text("\n".join(lines) + "\n")
    code, out, _ = run_main(
        capsys,
        ["--input", str(f), "--mode", "quality_harness", "--nsim", "5000",
         "--seed", "4", "--output", "text", "--alternative", "greater"],
    )
    assert code == 0
    assert "threshold,p_sim,p_asym_adj,p_asym_unadj" in out


def test_pre_round_flag(tmp_path, capsys):
    f = tmp_path / "r.csv"
    f.write_text("group,value\na,1.04\na,1.06\nb,2.11\nb,2.12\n")
    _, out, _ = run_main(
        capsys, ["--input", str(f), "--pre-round", "1", "--method", "asymptotic"]
    )
    report = json.loads(out)
    # 1.04 and 1.06 collapse onto 1.0/1.1; 2.11 and 2.12 onto 2.1
    assert report["diagnostics"]["max_tie_fraction"] == 0.5


def test_out_file(tmp_path):
    target = tmp_path / "report.json"
    code = main(["--input", IQ, "--method", "asymptotic", "--out", str(target)])
    assert code == 0
    assert json.loads(target.read_text())["schema_version"] == 1


def test_run_config_direct():
    report = run(RunConfig(input=IQ, method="asymptotic", alternative="less"))
    assert report["observation"]["statistic"] == "s_min"
