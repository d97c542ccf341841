import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from sibhist import write_dataset
from sibhist.cli import ESTIMATE_COLUMNS, build_parser, main
from sibhist.synthetic import generate_survey


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    ds = generate_survey(400, seed=3)
    write_dataset(ds, d / "respondents.csv", d / "siblings.csv")
    return d


def _args(files, *extra):
    return ["--respondents", str(files / "respondents.csv"),
            "--siblings", str(files / "siblings.csv"), "--frame", "f15-49", *extra]


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_estimate(files, tmp_path):
    out = tmp_path / "estimates.csv"
    code = main(["estimate", *_args(files, "--window-years", "7", "--estimators", "ind_excl,agg_excl",
                                    "--out", str(out))])
    assert code == 0
    rows = _read(out)
    assert list(rows[0]) == ESTIMATE_COLUMNS
    assert {r["estimator"] for r in rows} == {"IND_EXCL", "AGG_EXCL"}
    assert len(rows) == 2 * 14
    assert all(r["se"] == "" for r in rows)
    assert rows[0]["cell"] == "f15-19" and rows[0]["window_start"] == "-84"


def test_estimate_with_bootstrap(files, tmp_path):
    out = tmp_path / "e.csv"
    reps = tmp_path / "replicates.csv"
    tallies = tmp_path / "tallies.csv"
    argv = ["estimate", *_args(files, "--bootstrap", "200", "--seed", "7", "--out", str(out),
                              "--replicates", str(reps), "--tallies", str(tallies))]
    assert main(argv) == 0
    rows = _read(out)
    filled = [r for r in rows if r["point"] not in ("", "0.0")]
    assert filled and all(r["se"] and r["ci_lo"] and r["ci_hi"] for r in filled)
    assert all(float(r["ci_lo"]) <= float(r["ci_hi"]) for r in filled)
    assert _read(reps)[0].keys() == {"rep_index", "resp_id", "multiplier"}
    assert len(_read(tallies)) == 400 * 14
    # same flags, same bytes
    again = tmp_path / "e2.csv"
    argv[argv.index(str(out))] = str(again)
    assert main(argv) == 0
    assert out.read_bytes() == again.read_bytes()


def test_too_few_replicates_is_a_usage_error(files, tmp_path):
    assert main(["estimate", *_args(files, "--bootstrap", "20", "--out", str(tmp_path / "x.csv"))]) == 64


def test_respondent_inclusion_and_json(files, tmp_path):
    out = tmp_path / "e.json"
    assert main(["estimate", *_args(files, "--estimators", "agg,ind", "--include-respondent",
                                    "--format", "json", "--out", str(out))]) == 0
    rows = json.loads(out.read_text())
    assert {r["estimator"] for r in rows} == {"AGG_INCL", "IND_INCL"}
    assert set(rows[0]) == set(ESTIMATE_COLUMNS)
    assert rows[0]["se"] is None


def test_exposure_modes_share_deaths(files, tmp_path):
    a, b = tmp_path / "py.csv", tmp_path / "hc.csv"
    assert main(["estimate", *_args(files, "--tallies", str(a), "--out", str(tmp_path / "1.csv"))]) == 0
    assert main(["estimate", *_args(files, "--exposure", "headcount", "--tallies", str(b),
                                    "--out", str(tmp_path / "2.csv"))]) == 0
    ta, tb = _read(a), _read(b)
    assert [r["y_D"] for r in ta] == [r["y_D"] for r in tb]
    n_a = np.array([float(r["y_N_inF"]) + float(r["y_N_notF"]) for r in ta])
    n_b = np.array([float(r["y_N_inF"]) + float(r["y_N_notF"]) for r in tb])
    assert not np.allclose(n_a, n_b)


def test_absolute_window(files, tmp_path):
    out = tmp_path / "e.csv"
    assert main(["estimate", *_args(files, "--window", "1100:1199", "--cells", "10y",
                                    "--out", str(out))]) == 0
    rows = _read(out)
    assert rows[0]["window_start"] == "1100" and rows[0]["cell"] == "f15-24"


def test_empty_cells(files, tmp_path):
    out = tmp_path / "e.csv"
    argv = ["estimate", *_args(files, "--ages", "90:99", "--out", str(out))]
    assert main(argv) == 2
    assert main(argv + ["--allow-empty"]) == 0
    assert all(r["point"] == "" for r in _read(out))


def test_load_failure(files, tmp_path, capsys):
    bad = tmp_path / "siblings.csv"
    bad.write_text("resp_id,sib_index,sex,dob_cmc,alive,dod_cmc\nnobody,1,f,900,1,\n")
    code = main(["estimate", "--respondents", str(files / "respondents.csv"), "--siblings", str(bad),
                 "--out", str(tmp_path / "e.csv")])
    assert code == 1
    assert "ORPHAN_SIBLING" in capsys.readouterr().err
    assert main(["report", "--respondents", str(tmp_path / "missing.csv"),
                 "--siblings", str(bad)]) == 1


def test_check(files, tmp_path):
    out = tmp_path / "ic.csv"
    assert main(["check", *_args(files, "--ages", "15:49", "--out", str(out))]) == 0
    rows = _read(out)
    assert list(rows[0]) == ["age", "delta", "ci_lo", "ci_hi"]
    assert [int(r["age"]) for r in rows] == list(range(15, 50))
    assert main(["check", *_args(files, "--ages", "20:22", "--bootstrap", "200", "--out", str(out))]) == 0
    assert all(r["ci_lo"] != "" for r in _read(out))


def test_report(files, tmp_path):
    out = tmp_path / "inv.csv"
    assert main(["report", *_args(files, "--out", str(out))]) == 0
    rows = _read(out)
    assert [r["band"] for r in rows] == [f"{a}-{a + 4}" for a in range(15, 50, 5)]
    assert all(0 <= float(r["fraction"]) <= 1 for r in rows)


def test_sensitivity(tmp_path):
    out = tmp_path / "surface.csv"
    assert main(["sensitivity", "--k", "0.8:1.2:0.05", "--p", "0:0.4:0.05", "--param", "exposure",
                 "--out", str(out)]) == 0
    rows = _read(out)
    assert len(rows) == 81 and list(rows[0]) == ["K", "p", "rel_error"]
    with pytest.raises(SystemExit) as bad:
        main(["sensitivity", "--k", "1.2:0.8:0.05", "--p", "0:1:0.1"])
    assert bad.value.code == 64


def test_simulate(tmp_path):
    cfg = tmp_path / "scenario.toml"
    cfg.write_text("m_sibships = 300\nsampling_fractions = [0.1, 0.2]\nn_surveys = 2\n"
                   "[seed_data]\nsynthetic_respondents = 300\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "sim")]) == 0
    results = _read(tmp_path / "sim" / "scenario_results.csv")
    assert len(results) == 2 * 2 * 4 * 14
    summary = _read(tmp_path / "sim" / "scenario_summary.csv")
    assert list(summary[0])[-3:] == ["rel_mse", "rel_bias_sq", "rel_var"]


def test_help_and_unknown_flags(capsys):
    with pytest.raises(SystemExit) as ok:
        main(["estimate", "--help"])
    assert ok.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--respondents", "--siblings", "--frame", "--window-years", "--window", "--cells",
                 "--estimators", "--include-respondent", "--exposure", "--bootstrap", "--seed",
                 "--format", "--out"):
        assert flag in text
    with pytest.raises(SystemExit) as bad:
        main(["estimate", "--bogus"])
    assert bad.value.code == 64
    with pytest.raises(SystemExit) as bad:
        main([])
    assert bad.value.code == 64


def test_every_subcommand_has_help():
    sub = build_parser()._subparsers._group_actions[0].choices
    assert set(sub) == {"estimate", "check", "report", "sensitivity", "simulate"}
    for p in sub.values():
        assert all(a.help for a in p._actions if a.option_strings and a.dest != "help")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "sibhist", "sensitivity", "--k", "1:1.2:0.1",
                           "--p", "0:0.1:0.1", "--out", str(tmp_path / "s.csv")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(_read(tmp_path / "s.csv")) == 6
