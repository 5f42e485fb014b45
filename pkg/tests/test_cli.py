"""Command-line behavior: verbs, exit codes, determinism, output formats."""

import shutil
import subprocess
import sys

import numpy as np
import pytest

from isacsim.cli import main
from isacsim.exceptions import SingularInformationError

FAST = [
    "--override", "n_tx=8", "--override", "n_rx=8",
    "--override", "g_tx=16", "--override", "g_rx=16",
    "--override", "n_subcarriers=6", "--override", "trials=3",
    "--override", "snr_db=0,10",
]


def _read(path):
    return path.read_bytes().decode()


def _data_lines(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


# ---------------------------------------------------------------------------
# sweep


def test_sweep_writes_csv_and_echoes_config(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--out", str(out)] + FAST) == 0
    text = _read(out)
    comments = [line for line in text.splitlines() if line.startswith("# ")]
    assert "# trials = 3" in comments
    assert "# n_tx = 8" in comments
    data = _data_lines(text)
    assert data[0] == "snr_db,n_subcarriers,method,metric,value,trials,seed"
    # default methods, both experiment kinds each: 2 methods x 2 kinds x 2 SNRs
    assert len(data) == 1 + 8


def test_sweep_byte_identical_across_runs_and_threads(tmp_path):
    a, b, c = (tmp_path / name for name in ("a.csv", "b.csv", "c.csv"))
    assert main(["sweep", "--out", str(a)] + FAST) == 0
    assert main(["sweep", "--out", str(b)] + FAST) == 0
    assert main(["sweep", "--out", str(c), "--threads", "3"] + FAST) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--out", str(out), "--seed", "123"] + FAST) == 0
    for row in _data_lines(_read(out))[1:]:
        assert row.endswith(",123")


def test_override_precedence_over_config_file(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("trials = 50\nsnr_db = -8\nn_tx = 8\nn_rx = 8\ng_tx = 16\ng_rx = 16\nn_subcarriers = 6\n")
    before = cfg.read_bytes()
    out = tmp_path / "o.csv"
    rc = main([
        "sweep", "--config", str(cfg), "--out", str(out),
        "--override", "trials=2", "--override", "snr_db=5",
        "--override", "methods=proposed_omp",
    ])
    assert rc == 0
    text = _read(out)
    assert "# trials = 2" in text
    assert "# snr_db = 5" in text
    rows = _data_lines(text)[1:]
    assert all(row.startswith("5,") for row in rows)
    # the config file itself is left untouched
    assert cfg.read_bytes() == before


# ---------------------------------------------------------------------------
# exit codes


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bandwidth = 10\n")
    assert main(["sweep", "--config", str(cfg)]) == 2
    assert "config error" in capsys.readouterr().err


def test_bad_override_exits_2(capsys):
    assert main(["sweep", "--override", "trials"]) == 2
    assert main(["sweep", "--override", "methods=warp_drive"]) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "ghost.cfg")]) == 2


def test_bad_threads_exits_2(capsys):
    assert main(["sweep", "--threads", "0"] + FAST) == 2


def test_numerical_failure_exits_3(monkeypatch, capsys):
    import isacsim.cli as cli_mod

    def boom(cfg):
        raise SingularInformationError("shared")

    monkeypatch.setattr(cli_mod, "crlb_table", boom)
    assert main(["crlb"] + FAST) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_linalg_failure_exits_3(monkeypatch, capsys):
    import isacsim.cli as cli_mod

    def boom(cfg, threads):
        raise np.linalg.LinAlgError("eigendecomposition did not converge")

    monkeypatch.setattr(cli_mod, "run_sweep", boom)
    assert main(["sweep"] + FAST) == 3


# ---------------------------------------------------------------------------
# other verbs


def test_estimate_emits_json_report(tmp_path):
    import json

    out = tmp_path / "est.json"
    assert main(["estimate", "--out", str(out)] + FAST) == 0
    text = _read(out)
    payload = json.loads("\n".join(_data_lines(text)))
    assert set(payload["methods"]) == {"proposed_omp", "conventional_omp", "esprit"}
    assert len(payload["true"]["aoa_rad"]) == 2


def test_refine_emits_cost_trace(tmp_path):
    out = tmp_path / "refine.csv"
    assert main(["refine", "--out", str(out), "--override", "sage_outer_iters=10"] + FAST) == 0
    text = _read(out)
    assert "# sage_mode = joint" in text
    assert any(line.startswith("# final cost = ") for line in text.splitlines())
    data = _data_lines(text)
    assert data[0] == "iteration,mode,cost"
    assert len(data) >= 2
    first = data[1].split(",")
    assert first[1] == "joint"
    costs = [float(row.split(",")[2]) for row in data[1:]]
    assert all(b <= a + 1e-12 for a, b in zip(costs, costs[1:]))


def test_refine_mode_follows_config(tmp_path):
    out = tmp_path / "refine_sens.csv"
    rc = main([
        "refine", "--out", str(out),
        "--override", "sage_mode=sens_only", "--override", "sage_outer_iters=10",
    ] + FAST)
    assert rc == 0
    text = _read(out)
    assert "# sage_mode = sens_only" in text
    assert "refined sens_angle_rad" in text
    assert "refined comm_aoa_rad" not in text


def test_crlb_emits_bound_table(tmp_path):
    out = tmp_path / "crlb.csv"
    assert main(["crlb", "--out", str(out)] + FAST) == 0
    data = _data_lines(_read(out))
    assert data[0] == "snr_db,subsystem,path,crlb_rad2,crlb_nuisance_rad2"
    rows = [row.split(",") for row in data[1:]]
    assert {row[1] for row in rows} == {"shared", "comm", "sens"}
    by_key = {(row[0], row[1], row[2]): float(row[3]) for row in rows}
    for (snr, sub, path), value in by_key.items():
        if sub == "shared":
            assert value <= by_key[(snr, "comm", path)] * (1 + 1e-9)
            assert value <= by_key[(snr, "sens", path)] * (1 + 1e-9)


def test_selftest_passes():
    assert main(["selftest"]) == 0


def test_console_script_installed():
    exe = shutil.which("isacsim")
    assert exe, "console script should be installed"
    proc = subprocess.run([exe, "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("isacsim ")
