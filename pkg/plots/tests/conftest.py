"""Fixtures generating real harness CSVs through the qufur CLI.

The plots package consumes the harness only through its external interfaces,
so test inputs are produced by invoking the CLI rather than importing it.
"""

import json
import shutil
import subprocess
import sys

import pytest


def run_qufur(*args: str) -> subprocess.CompletedProcess:
    exe = shutil.which("qufur")
    cmd = [exe, *args] if exe else [sys.executable, "-m", "qufur.cli", *args]
    result = subprocess.run(cmd, capture_output=True, text=True)
    assert result.returncode == 0, f"qufur {' '.join(args)} failed: {result.stderr}"
    return result


@pytest.fixture(scope="session")
def sweep_csv(tmp_path_factory):
    """Detail CSV of a 2-policy x 5-param x 5-seed sweep."""
    root = tmp_path_factory.mktemp("sweep")
    config = {
        "environment": {"kind": "synthetic", "domains": [[3, 60], [2, 60], [2, 30]],
                        "ambient_dim": 7, "eta": 0.3},
        "policy": [
            {"kind": "qufur", "alpha": [0.1, 0.25, 0.5, 1.0, 2.0]},
            {"kind": "uniform", "mu": [0.05, 0.1, 0.25, 0.5, 1.0]},
        ],
        "seeds": 5,
        "cost_c": 1.0,
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(config))
    out_dir = root / "out"
    run_qufur("sweep", "--config", str(cfg_path), "--out-dir", str(out_dir))
    return out_dir / "sweep_detail.csv"


@pytest.fixture(scope="session")
def sequential_round_log(tmp_path_factory):
    """Per-round log of an uncertainty-driven run over sequential domains."""
    root = tmp_path_factory.mktemp("rounds")
    config = {
        "environment": {"kind": "synthetic",
                        "domains": [[3, 120], [3, 120], [3, 120], [3, 120]],
                        "ambient_dim": 12, "eta": 0.3, "ordering": "sequential"},
        "policy": {"kind": "qufur", "alpha": 1.0},
        "seeds": 1,
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(config))
    out = root / "episode.csv"
    run_qufur("run", "--config", str(cfg_path), "--seed", "0", "--out", str(out))
    return out


@pytest.fixture(scope="session")
def uniform_round_log(tmp_path_factory):
    """Per-round log of a constant-rate baseline run."""
    root = tmp_path_factory.mktemp("uniform")
    config = {
        "environment": {"kind": "synthetic", "domains": [[2, 80], [2, 80]],
                        "ambient_dim": 4, "eta": 0.3},
        "policy": {"kind": "uniform", "mu": 0.3},
        "seeds": 1,
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(config))
    out = root / "episode.csv"
    run_qufur("run", "--config", str(cfg_path), "--seed", "0", "--out", str(out))
    return out
