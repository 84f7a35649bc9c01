import json

import pytest

from app.database.dataset_store import parse_dataset_csv, write_dataset_csv
from app.database.report_store import read_report_csv
from app.routes.cli_routes import cli_dispatch
from tests.conftest import planted_dataset


def test_no_arguments_is_a_usage_error(capsys):
    assert cli_dispatch([]) == 1
    assert "usage" in capsys.readouterr().err


def test_help_exits_cleanly(capsys):
    assert cli_dispatch(["--help"]) == 0
    assert "run-stochastic" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["run-stochastic", "--no-such-flag"],
    ["run-stochastic", "--cells", "0"],
    ["run-stochastic", "--seed", "seven"],
])
def test_usage_errors(argv, capsys):
    assert cli_dispatch(argv) == 1


def test_unknown_combo_is_a_usage_error(tiny_config, tmp_path):
    argv = ["run-stochastic", "--config", str(tiny_config), "--cells", "1", "--combos", "c-99",
            "--out", str(tmp_path / "r.csv")]
    assert cli_dispatch(argv) == 1


def test_missing_dataset_is_a_runtime_failure(tmp_path, capsys):
    missing = tmp_path / "missing.csv"
    assert cli_dispatch(["run-external", "--data", str(missing)]) == 2
    assert "missing.csv" in capsys.readouterr().err


def test_invalid_config_is_a_runtime_failure(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("bogus=1\n")
    assert cli_dispatch(["eval-tbba", "--config", str(bad)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_gen_stochastic_single_cell(tiny_config, tmp_path):
    out = tmp_path / "cell.csv"
    assert cli_dispatch(["gen-stochastic", "--config", str(tiny_config), "--seed", "3", "--out", str(out)]) == 0
    ds = parse_dataset_csv(out)
    assert ds.N == 40
    assert ds.features == ("d", "theta", "cm_power")


def test_gen_stochastic_several_cells(tiny_config, tmp_path):
    out = tmp_path / "cells"
    argv = ["gen-stochastic", "--config", str(tiny_config), "--cells", "3", "--out", str(out)]
    assert cli_dispatch(argv) == 0
    assert sorted(p.name for p in out.iterdir()) == ["cell_0000.csv", "cell_0001.csv", "cell_0002.csv"]
    assert (out / "cell_0000.csv").read_bytes() != (out / "cell_0001.csv").read_bytes()


def test_run_stochastic_is_byte_reproducible(tiny_config, tmp_path):
    outputs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        argv = ["run-stochastic", "--acceptance-mode", "--seed", "7", "--cells", "1", "--models", "gr,tbba",
                "--config", str(tiny_config), "--out", str(out)]
        assert cli_dispatch(argv) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    report = read_report_csv(tmp_path / "a.csv")
    assert report.models == ["gr", "tbba"]
    assert report.metadata.master_seed == 7
    assert report.metadata.overrides["n_points"] == "40"


def test_run_stochastic_markdown_to_stdout(tiny_config, capsys):
    argv = ["run-stochastic", "--acceptance-mode", "--cells", "1", "--models", "tbba", "--combos", "c-1,c-2",
            "--config", str(tiny_config)]
    assert cli_dispatch(argv) == 0
    out = capsys.readouterr().out
    assert out.startswith("# stochastic report")
    assert "| model | c-1 | c-2 |" in out


def test_eval_tbba_writes_series(tiny_config, tmp_path):
    series = tmp_path / "series.csv"
    argv = ["eval-tbba", "--config", str(tiny_config), "--cells", "1", "--out", str(tmp_path / "t.csv"),
            "--series", str(series)]
    assert cli_dispatch(argv) == 0
    lines = series.read_text().splitlines()
    assert lines[0] == "gamma_t,mean_error"
    assert len(lines) == 1 + 19
    assert read_report_csv(tmp_path / "t.csv").row("tbba", "all").n == 1


def test_eval_tbba_rejects_threshold_outside_unit_interval(tiny_config):
    assert cli_dispatch(["eval-tbba", "--config", str(tiny_config), "--gamma-t", "1.5"]) == 1


def test_run_external_saves_inspectable_models(tiny_config, tmp_path, capsys):
    data = tmp_path / "rt.csv"
    write_dataset_csv(planted_dataset(n=120, seed=2), data)
    models_dir = tmp_path / "models"
    argv = ["run-external", "--data", str(data), "--config", str(tiny_config), "--acceptance-mode",
            "--models", "gr", "--combos", "c-1,c-5", "--models-dir", str(models_dir),
            "--out", str(tmp_path / "ext.csv")]
    assert cli_dispatch(argv) == 0
    assert sorted(p.name for p in models_dir.iterdir()) == ["gr_c-1.bamodel", "gr_c-5.bamodel"]
    capsys.readouterr()

    assert cli_dispatch(["inspect-model", "--model", str(models_dir / "gr_c-5.bamodel")]) == 0
    header = json.loads(capsys.readouterr().out)
    assert header["kind"] == "logistic"
    assert header["scaler"]["features"] == ["cm_power"]


def test_inspect_model_rejects_garbage(tmp_path, capsys):
    junk = tmp_path / "junk.bamodel"
    junk.write_bytes(b"not a model at all")
    assert cli_dispatch(["inspect-model", "--model", str(junk)]) == 2
    assert "bad magic" in capsys.readouterr().err
