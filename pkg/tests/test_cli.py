import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from coordsim import cli
from coordsim.scheme import SWEEP_COLUMNS

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, *args):
    return cli.run([*args, "--out", str(tmp_path)])


def read(tmp_path, name):
    return json.loads((tmp_path / name).read_text())


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def small_sweep(tmp_path):
    cfg = json.loads((CONFIGS / "sweep_binary.json").read_text())
    cfg.update(n_list=[2, 3], seeds=2, expect_decrease=False)
    return write_cfg(tmp_path, cfg, "sweep.json")


class TestConfigValidation:
    def test_unknown_command(self, tmp_path):
        assert run(tmp_path, "no-such-command") == cli.EXIT_USAGE

    def test_missing_seed(self, tmp_path):
        cfg = write_cfg(tmp_path, {"schema": "coordsim/1", "command": "verify-lemmas"})
        assert run(tmp_path, "verify-lemmas", "--config", cfg) == cli.EXIT_USAGE

    @pytest.mark.parametrize("patch", [
        {"schema": "coordsim/0"},
        {"command": "sweep"},
        {"seed": -1},
        {"seed": 1.5},
        {"tol": -1e-9},
        {"budget": 0},
    ])
    def test_rejected_fields(self, tmp_path, patch):
        cfg = {"schema": "coordsim/1", "command": "verify-lemmas", "seed": 0, "trials": 5}
        cfg.update(patch)
        assert run(tmp_path, "verify-lemmas", "--config", write_cfg(tmp_path, cfg)) == cli.EXIT_USAGE

    def test_unreadable_config(self, tmp_path):
        assert run(tmp_path, "verify-lemmas", "--config", str(tmp_path / "missing.json")) == cli.EXIT_USAGE
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run(tmp_path, "verify-lemmas", "--config", str(bad)) == cli.EXIT_USAGE

    def test_missing_fields(self, tmp_path):
        cfg = write_cfg(tmp_path, {"schema": "coordsim/1", "command": "sweep", "seed": 0})
        assert run(tmp_path, "sweep", "--config", cfg) == cli.EXIT_USAGE

    def test_budget_exceeded(self, tmp_path):
        status = run(tmp_path, "converse-audit", "--config", str(CONFIGS / "converse_audit.json"), "--budget", "100")
        assert status == cli.EXIT_BUDGET

    def test_invalid_target_reports_residual(self, tmp_path):
        assert run(tmp_path, "region-check", "--config", str(CONFIGS / "region_invalid.json")) == cli.EXIT_FAIL
        doc = read(tmp_path, "region_check.json")
        assert doc["status"] == cli.EXIT_FAIL
        assert doc["residual"] == pytest.approx(0.05, abs=1e-12)


class TestOutputs:
    def test_hash_and_seed_embedded(self, tmp_path):
        path = CONFIGS / "region_identity.json"
        assert run(tmp_path, "region-check", "--config", str(path)) == cli.EXIT_OK
        doc = read(tmp_path, "region_check.json")
        assert doc["config_hash"] == cli.config_hash(json.loads(path.read_text()))
        assert doc["seed"] == 0 and doc["command"] == "region-check" and doc["schema"] == cli.SCHEMA
        assert doc["inner"]["member"] == "NOT_FOUND" and doc["outer"]["member"] == "MEMBER"

    def test_seed_override_changes_hash(self, tmp_path):
        cfg = str(CONFIGS / "verify_lemmas.json")
        run(tmp_path / "a", "verify-lemmas", "--config", cfg)
        run(tmp_path / "b", "verify-lemmas", "--config", cfg, "--seed", "7")
        a, b = read(tmp_path / "a", "verify_lemmas.json"), read(tmp_path / "b", "verify_lemmas.json")
        assert b["seed"] == 7 and a["config_hash"] != b["config_hash"]

    def test_verify_lemmas_passes(self, tmp_path):
        assert run(tmp_path, "verify-lemmas", "--config", str(CONFIGS / "verify_lemmas.json")) == cli.EXIT_OK
        checks = read(tmp_path, "verify_lemmas.json")["checks"]
        assert all(c["violations"] == 0 for c in checks.values())
        assert checks["entropy_continuity"]["trials"] == 500

    def test_sweep_csv_layout(self, tmp_path):
        assert run(tmp_path, "sweep", "--config", small_sweep(tmp_path)) == cli.EXIT_OK
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0].startswith("# coordsim/1 config_hash=") and lines[0].endswith("seed=0")
        assert lines[1] == ",".join(SWEEP_COLUMNS)
        assert len(lines) == 2 + 2 * 2

    def test_simulate_status_matches_verdict(self, tmp_path):
        cfg = json.loads((CONFIGS / "simulate_binary.json").read_text())
        cfg.update(samples=20000, n=2)
        status = run(tmp_path, "simulate", "--config", write_cfg(tmp_path, cfg))
        doc = read(tmp_path, "simulate.json")
        assert status == (cli.EXIT_OK if doc["passed"] else cli.EXIT_FAIL)
        assert doc["cells"] == 4 ** 4 * 2 ** 2 * 2 ** 2 * 2 and doc["support"] > 0

    def test_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "coordsim.cli", "verify-lemmas", "--seed", "3",
                               "--out", str(tmp_path)], capture_output=True)
        assert proc.returncode == 0
        assert read(tmp_path, "verify_lemmas.json")["seed"] == 3


@pytest.mark.parametrize("command,config", [
    ("verify-lemmas", "verify_lemmas.json"),
    ("region-check", "region_padded.json"),
    ("converse-audit", "converse_audit.json"),
])
def test_rerun_is_byte_identical(tmp_path, command, config):
    for d in ("a", "b"):
        run(tmp_path / d, command, "--config", str(CONFIGS / config))
    name = command.replace("-", "_") + ".json"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_z_scores_flag_counts_off_support():
    z = cli.z_scores(np.array([5, 3, 2]), np.array([0.5, 0.5, 0.0]), 10)
    assert z[0] == 0.0 and z[1] == pytest.approx(-2 / np.sqrt(2.5)) and z[2] == np.inf
