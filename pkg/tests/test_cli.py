import csv
import json
import subprocess
import sys

import jsonschema
import pytest

from holderweyl.cli import lambda_grid, list_experiments, load_config, main, render_svg, run
from holderweyl.errors import InvalidConfiguration

UNIT_SQUARE_WEYL = {
    "schema": 1,
    "experiment": "weyl_scan",
    "domain": {"type": "unit_square"},
    "h": 1 / 64,
    "lambdas": [50.0, 100.0, 200.0],
}


def _write(tmp_path, config, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return path


def _catalog():
    return {entry["experiment"]: entry for entry in list_experiments()}


def test_catalog_lists_every_experiment():
    assert set(_catalog()) == {
        "weyl_scan", "schrodinger_weyl_scan", "splitting_check", "clr_scan", "blowup_scan", "rooms_probe",
    }


def test_blowup_schema_documents_exponents():
    props = _catalog()["blowup_scan"]["schema"]["properties"]
    assert props["gamma"]["description"] and props["alpha"]["description"]


@pytest.mark.parametrize("tag", sorted(_catalog()))
def test_schema_validates_its_own_example(tag):
    entry = _catalog()[tag]
    jsonschema.Draft7Validator.check_schema(entry["schema"])
    jsonschema.validate(entry["example"], entry["schema"])
    assert load_config(entry["example"]) == entry["example"]


def test_lambda_grid_forms():
    grid = lambda_grid({"min": 10, "max": 1000, "points": 3})
    assert grid[0] == 10.0 and grid[-1] == 1000.0 and grid[1] == pytest.approx(100.0)
    assert lambda_grid([1, 2, 5]) == [1.0, 2.0, 5.0]
    with pytest.raises(InvalidConfiguration):
        lambda_grid([1, 1])


def test_config_errors_name_the_field():
    bad = dict(UNIT_SQUARE_WEYL, h=-1.0)
    with pytest.raises(InvalidConfiguration, match="h"):
        load_config(bad)
    with pytest.raises(InvalidConfiguration, match="unknown experiment"):
        load_config({"schema": 1, "experiment": "nope"})
    with pytest.raises(InvalidConfiguration):
        load_config(dict(UNIT_SQUARE_WEYL, extra=1))


def test_run_writes_all_outputs(tmp_path):
    status, report = run(UNIT_SQUARE_WEYL, out=tmp_path / "out")
    out = tmp_path / "out"
    assert sorted(p.name for p in out.iterdir()) == ["plot.svg", "report.json", "rows.csv"]
    with open(out / "rows.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["lambda", "count", "prediction", "ratio"]
    assert len(rows) == 4
    data = json.loads((out / "report.json").read_text())
    assert data["schema"] == 1 and data["params"]["config"] == UNIT_SQUARE_WEYL
    assert status == (0 if report.passed else 1)
    assert (out / "plot.svg").read_text().startswith("<svg")


def test_runs_are_byte_identical(tmp_path):
    config = _catalog()["splitting_check"]["example"]
    outputs = []
    for k in range(2):
        run(config, out=tmp_path / f"run{k}", seed=11)
        outputs.append(((tmp_path / f"run{k}" / "rows.csv").read_bytes(),
                        (tmp_path / f"run{k}" / "report.json").read_bytes()))
    assert outputs[0] == outputs[1]


def test_seed_changes_random_instances(tmp_path):
    config = _catalog()["splitting_check"]["example"]
    _, a = run(config, out=tmp_path / "a", seed=1)
    _, b = run(config, out=tmp_path / "b", seed=2)
    assert a.params["seed"] == 1 and b.params["seed"] == 2
    assert a.passed and b.passed


def test_malformed_grid_exits_two_without_outputs(tmp_path, capsys):
    config = dict(UNIT_SQUARE_WEYL, lambdas=[200.0, 100.0])
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, config)), "--out", str(out)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "invalid-configuration"
    assert not out.exists()


def test_unresolved_grid_exits_two(tmp_path, capsys):
    config = dict(UNIT_SQUARE_WEYL, lambdas=[100.0, 10000.0])
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, config)), "--out", str(out)]) == 2
    assert "not resolved" in json.loads(capsys.readouterr().err)["message"]
    assert not out.exists()


def test_failing_flag_exits_one(tmp_path, capsys):
    config = {"schema": 1, "experiment": "blowup_scan", "gamma": 0.8, "alpha": 0.99,
              "h_sequence": [1 / 32, 1 / 64], "lambdas": [10, 100], "plot": False}
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, config)), "--out", str(out), "--threads", "2"]) == 1
    summary = json.loads(capsys.readouterr().out)
    assert "lp_part_stable" in summary["failed_flags"]
    assert sorted(p.name for p in out.iterdir()) == ["report.json", "rows.csv"]


def test_threads_do_not_change_rows(tmp_path):
    run(UNIT_SQUARE_WEYL, out=tmp_path / "serial")
    run(UNIT_SQUARE_WEYL, out=tmp_path / "threaded", threads=3)
    assert (tmp_path / "serial" / "rows.csv").read_bytes() == (tmp_path / "threaded" / "rows.csv").read_bytes()


def test_bad_thread_count(tmp_path):
    assert main(["run", str(_write(tmp_path, UNIT_SQUARE_WEYL)), "--threads", "0"]) == 2


def test_rooms_and_schrodinger_examples_run(tmp_path):
    for tag in ("rooms_probe", "schrodinger_weyl_scan"):
        status, report = run(_catalog()[tag]["example"], out=tmp_path / tag)
        assert status == 0 and report.rows


def test_svg_without_plot_columns():
    from holderweyl.experiments import ScanReport

    svg = render_svg(ScanReport("empty", ("instance",), [{"instance": 0}]))
    assert svg.startswith("<svg") and "<polyline" not in svg


def test_module_entry_point_lists():
    proc = subprocess.run([sys.executable, "-m", "holderweyl", "list"], capture_output=True, text=True, check=True)
    assert any(e["experiment"] == "weyl_scan" for e in json.loads(proc.stdout))
