import csv
import json
from pathlib import Path

import pytest

from lsvlab import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_appendix_sums(tmp_path):
    cfg = {"experiment": "appendix-sums", "grids": {"tail_sums": [[2, 0, 1000]], "tail_checks": [],
                                                     "log_power_sums": [[1, 1000000]]}}
    assert cli.main(["run", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.DictReader((tmp_path / "o" / "appendix-sums.csv").open()))
    assert float(rows[0]["exact"]) == pytest.approx(9.995e-4, rel=1e-4)


def test_preimages_summary(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", str(CONFIGS / "preimages_constant.json"), "--out", str(out)]) == 0
    summary = json.loads((out / "preimages_summary.json").read_text())
    assert summary["summary"]["ratio_to_2"] == pytest.approx(1.0, abs=1e-3)
    assert summary["pass"] is True


def test_invalid_distribution_exit_1(tmp_path, capsys):
    assert cli.main(["run", str(CONFIGS / "invalid.json"), "--out", str(tmp_path)]) == 1
    assert "alpha0" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["{not json", "[1, 2]", json.dumps({"experiment": "nope"})])
def test_bad_config_exit_1(tmp_path, text):
    p = tmp_path / "c.json"
    p.write_text(text)
    assert cli.main(["run", str(p), "--out", str(tmp_path)]) == 1


def test_missing_file_exit_1(tmp_path):
    assert cli.main(["run", str(tmp_path / "absent.json")]) == 1


def test_violation_exit_2(tmp_path):
    cfg = {"experiment": "preimages", "distribution": {"constant": 0.5}, "grids": {"ells": [100]},
           "tolerances": {"scaled_band": [1.99, 2.01]}}
    out = tmp_path / "o"
    assert cli.main(["run", _write(tmp_path, cfg), "--out", str(out)]) == 2
    failures = json.loads((out / "failures.json").read_text())
    assert "scaled_in_band" in failures


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    cfg = {"experiment": "appendix-sums", "grids": {"tail_sums": [[2, 0, 100]], "log_power_sums": []}}
    assert cli.main(["run", _write(tmp_path, cfg)]) == 0
    assert (tmp_path / "env" / "appendix-sums.csv").exists()


def test_csv_headers_match_schema(tmp_path):
    schema = cli.load_schema()
    out = tmp_path / "o"
    cfg = {"experiment": "tower-tail", "distribution": {"kind": "uniform", "alpha0": 0.3, "alpha1": 0.6},
           "grids": {"height": 60, "markov_height": 20}}
    cli.main(["run", _write(tmp_path, cfg), "--out", str(out)])
    cli.main(["run", str(CONFIGS / "preimages_constant.json"), "--out", str(out)])
    for name in ("tower-tail", "preimages"):
        header = (out / f"{name}.csv").read_text().splitlines()[0].split(",")
        assert header == schema[name]


def test_every_experiment_has_schema_and_calibration():
    schema = cli.load_schema()
    cal = cli.load_calibration()
    for name, (_, section) in cli.EXPERIMENTS.items():
        assert name in schema and section in cal


@pytest.mark.parametrize("cfg", [
    {"experiment": "hoeffding", "distribution": {"kind": "uniform", "alpha0": 0.3, "alpha1": 0.6},
     "grids": {"ells": [100], "n_samples": 2000}},
    {"experiment": "annealed-tail", "distribution": {"kind": "discrete", "alpha0": 0.3, "alpha1": 0.6},
     "grids": {"n_samples": 1500, "ns": [1, 2, 5, 10, 20, 50, 100, 200], "window": [5, 200]}},
])
def test_worker_count_does_not_change_bytes(tmp_path, cfg):
    path = _write(tmp_path, cfg)
    blobs = []
    for w in (1, 4, 8):
        out = tmp_path / f"w{w}"
        cli.main(["run", path, "--out", str(out), "--workers", str(w), "--seed", "11"])
        blobs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    assert blobs[0] and blobs[0] == blobs[1] == blobs[2]
