import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from mimocs.cli import BOUNDS_COLUMNS, csv_text, main
from mimocs.config import ConfigError, ExperimentConfig, parse_config


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


SMALL_ROC = {"n_tx": 2, "n_rx": 2, "n_time": 16, "snr_db_list": [10, 25], "k_list": [1, 2],
             "trials": 3, "thresholds": {"count": 6}}


def test_validate_default(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "PASS block_diagonal" in out and "PASS circulant_blocks" in out


def test_validate_doppler_reports_scale(tmp_path, capsys):
    cfg = write(tmp_path, {"n_tx": 2, "n_rx": 2, "n_time": 16, "n_doppler": 16})
    assert main(["validate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "PASS scaled_identity" in out and "scale constant" in out


def test_validate_failing_identity_exit_1(tmp_path):
    cfg = write(tmp_path, {"n_tx": 2, "n_rx": 2, "n_time": 8, "n_delay": 5, "n_doppler": 8})
    assert main(["validate", "--config", cfg]) == 1


def test_rejects_doppler_mismatch(tmp_path, capsys):
    cfg = write(tmp_path, {"n_tx": 2, "n_rx": 2, "n_time": 16, "n_doppler": 8})
    assert main(["validate", "--config", cfg]) == 2
    assert "must equal n_time" in capsys.readouterr().err


def test_parse_error_reports_position(tmp_path, capsys):
    cfg = write(tmp_path, '{"n_tx": 2,\n  "n_rx": }')
    assert main(["roc", "--config", cfg]) == 2
    assert "line 2, column 11" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["nope"], ["roc", "--threads", "0"], ["bounds", "--plot"],
                                  ["roc", "--seed", "-3"]])
def test_usage_errors(argv):
    assert main(argv) == 2


def test_missing_config_file(tmp_path):
    assert main(["bounds", "--config", str(tmp_path / "absent.json")]) == 2


def test_numerical_failure_exit_3(tmp_path):
    # dense Gram for the structural checks does not fit the memory budget
    cfg = write(tmp_path, {"n_tx": 16, "n_rx": 16, "n_time": 256})
    assert main(["validate", "--config", cfg]) == 3


def test_bounds_csv_format(tmp_path):
    cfg = write(tmp_path, {"n_tx": 8, "n_rx": 8, "n_time": 64, "n_seeds": 2})
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "bounds.csv")
    assert rows[0] == list(BOUNDS_COLUMNS)
    assert len(rows[0]) == 1 + 8
    assert all(len(r) == len(rows[0]) for r in rows)
    assert [r[0] for r in rows[1:3]] == ["0", "1"]
    footer = rows[-1]
    assert footer[:2] == ["k_max", "2"]
    assert footer[2] == "lambda" and float(footer[3]) == pytest.approx(8.15733592)
    assert footer[4] == "amplitude_floor" and footer[6] == "snr_min_db"
    assert rows[1][7] in ("true", "false")


def test_bounds_threads_and_seed_override(tmp_path):
    cfg = write(tmp_path, {"n_tx": 2, "n_rx": 2, "n_time": 16, "n_seeds": 3})
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "5"]) == 0
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "5",
                 "--threads", "2"]) == 0
    a = (tmp_path / "a" / "bounds.csv").read_bytes()
    assert a == (tmp_path / "b" / "bounds.csv").read_bytes()
    assert read_csv(tmp_path / "a" / "bounds.csv")[1][0] == "5"


def test_roc_csv_and_plots(tmp_path):
    cfg = write(tmp_path, SMALL_ROC)
    out = tmp_path / "r"
    assert main(["roc", "--config", cfg, "--out", str(out), "--plot"]) == 0
    rows = read_csv(out / "roc.csv")
    assert rows[0] == ["snr_db", "k", "threshold", "pd", "pfa", "pfa_per_cell"]
    assert len(rows) == 1 + 2 * 2 * 6
    assert all(0.0 <= float(r[3]) <= 1.0 for r in rows[1:])
    assert (out / "roc.csv").read_bytes().count(b"\r\n") == len(rows)
    for snr in ("10", "25"):
        root = ET.parse(out / f"roc_snr{snr}.svg").getroot()
        polylines = [e for e in root.iter() if e.tag.endswith("polyline")]
        assert len(polylines) == 2


def test_roc_byte_identical_rerun(tmp_path):
    cfg = write(tmp_path, SMALL_ROC)
    assert main(["roc", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["roc", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    assert (tmp_path / "a" / "roc.csv").read_bytes() == (tmp_path / "b" / "roc.csv").read_bytes()

    mid = write(tmp_path, dict(SMALL_ROC, snr_db_list=[14], k_list=[2], trials=6), "mid.json")
    assert main(["roc", "--config", mid, "--out", str(tmp_path / "c")]) == 0
    assert main(["roc", "--config", mid, "--out", str(tmp_path / "d"), "--seed", "9"]) == 0
    assert (tmp_path / "c" / "roc.csv").read_bytes() != (tmp_path / "d" / "roc.csv").read_bytes()


def test_default_8x8_roc_has_twelve_curves(tmp_path):
    cfg = write(tmp_path, {"trials": 1, "thresholds": {"count": 4}})
    assert main(["roc", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "roc.csv")[1:]
    curves = {(r[0], r[1]) for r in rows}
    assert len(curves) == 12
    assert {r[1] for r in rows} == {"1", "2", "4"}


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mimocs", "validate"], capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS" in proc.stdout


# configuration


def test_config_defaults_match_default_8x8():
    cfg = ExperimentConfig()
    r = cfg.radar()
    assert (r.n_tx, r.n_rx, r.n_time, r.n_delay) == (8, 8, 64, 64)
    assert cfg.resolve_k() == [1, 2, 4]
    assert cfg.trials == 100 and cfg.snr_db_list == (15, 20, 25, 30)


def test_symbolic_k_floor_at_one():
    cfg = ExperimentConfig(n_tx=4, n_rx=2, n_time=8, k_list=("kmax/2", "kmax", "2kmax", 3))
    assert cfg.resolve_k() == [1, 1, 1, 3]  # K_max floors to 0 here


def test_config_round_trip():
    cfg = ExperimentConfig(n_tx=3, k_list=(1, "kmax"), thresholds=[1.0, 0.5], solver={"rel_tol": 1e-6})
    assert parse_config(cfg.to_json()) == cfg


@pytest.mark.parametrize("data", [
    '{"n_tx": 2, "bogus": 1}', '[1, 2]', '{"k_list": ["kmax/3"]}', '{"k_list": [0]}',
    '{"trials": 0}', '{"thresholds": [0.1, 0.2]}', '{"thresholds": {"max": 0.1, "min": 1}}',
    '{"solver": {"speed": 2}}', '{"solver": {"rel_tol": -1}}', '{"n_tx": 0}', '{"snr_db_list": []}',
])
def test_config_rejections(data):
    with pytest.raises(ConfigError):
        parse_config(data)


def test_solver_settings_pass_through():
    cfg = ExperimentConfig(solver={"max_iters": 77, "normalized": False, "eps": 1e-4})
    assert cfg.lasso_settings().max_iters == 77
    assert cfg.normalized is False and cfg.eps == 1e-4


def test_csv_text_formatting():
    text = csv_text(("a", "b", "c"), [(0.1, True, 'x,"y"')])
    assert text == 'a,b,c\r\n0.1,true,"x,""y"""\r\n'
