"""End-to-end CLI runs: artifacts, determinism, exit codes, aggregation.

Everything drives ``main(argv)`` in-process except one subprocess check of
the installed console script. Configs are written to tmp_path; artifact
determinism is asserted on raw bytes.
"""

import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

import penlsq
from penlsq.cli import config_hash, main


def write_config(path, doc) -> str:
    path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return str(path)


def solve_config(**overrides):
    doc = {
        "problem": {
            "generator": {"n": 16, "p": 6, "sparsity": 2},
            "sigma": 1.0,
        },
        "penalty": {"kind": "l1", "lambda": "auto"},
        "solver": {"gap_tol": 1e-11},
    }
    doc.update(overrides)
    return doc


def simulate_config(**overrides):
    doc = {
        "problem": {
            "generator": {"n": 12, "p": 4, "sparsity": 2},
            "sigma": 1.0,
        },
        "penalty": {"kind": "l1", "lambda": "auto"},
        "mc": {"replications": 100, "t_grid": [0.5, 1.0], "delta_grid": [0.5]},
        "coverage": {"re": 1.0},
        "events": True,
    }
    doc.update(overrides)
    return doc


def test_solve_writes_solution_and_manifest(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", solve_config())
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    solution = json.loads((out / "solution.json").read_text())
    assert sorted(solution) == ["beta_hat", "certificate", "converged",
                                "gap", "iters", "objective"]
    assert solution["converged"] is True
    assert solution["certificate"]["pass"] is True
    assert len(solution["beta_hat"]) == 6
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "solve"
    assert manifest["version"] == penlsq.__version__
    assert manifest["outputs"] == ["solution.json"]
    assert manifest["seeds"] == {"observation_seed": 0}
    assert manifest["seed_override"] is None
    # the recorded hash is reproducible from the config content alone
    doc = json.loads((tmp_path / "cfg.json").read_text())
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    assert manifest["config_sha256"] == hashlib.sha256(
        canonical.encode()).hexdigest()


def test_solve_reruns_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", solve_config())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["solve", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "solution.json").read_bytes() == (out2 / "solution.json").read_bytes()


def test_config_hash_ignores_key_order(tmp_path):
    doc = solve_config()
    shuffled = dict(reversed(list(doc.items())))
    assert config_hash(doc) == config_hash(shuffled)


def test_seed_override_recorded_and_changes_observation(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", solve_config())
    out0, out7 = tmp_path / "s0", tmp_path / "s7"
    assert main(["solve", "--config", cfg, "--out", str(out0)]) == 0
    assert main(["solve", "--config", cfg, "--out", str(out7), "--seed", "7"]) == 0
    manifest = json.loads((out7 / "manifest.json").read_text())
    assert manifest["seeds"] == {"observation_seed": 7}
    assert manifest["seed_override"] == 7
    assert (out0 / "solution.json").read_bytes() != (out7 / "solution.json").read_bytes()


def test_solve_accepts_inline_problem_with_observation(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((8, 2))
    X *= np.sqrt(8) / np.linalg.norm(X, axis=0)
    f = X @ np.array([1.0, 0.0])
    y = f + 0.1 * rng.standard_normal(8)
    doc = {
        "problem": {"n": 8, "p": 2, "X": X.tolist(), "f": f.tolist(),
                    "sigma": 0.1, "seed": 0, "y": y.tolist()},
        "penalty": {"kind": "l1", "lambda": 0.05},
        "solver": {"gap_tol": 1e-14},
    }
    cfg = write_config(tmp_path / "cfg.json", doc)
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == {}  # observation came from the config


def test_simulate_artifacts_and_determinism(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", simulate_config())
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["simulate", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(out2)]) == 0
    for name in ("errors.csv", "tails.csv", "coverage.csv", "events.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    errors = (out1 / "errors.csv").read_text().splitlines()
    assert errors[0] == "rep,seed,error,converged,gap"
    assert len(errors) == 101
    assert errors[1].split(",")[0] == "0"
    tails = (out1 / "tails.csv").read_text().splitlines()
    assert tails[0] == "t,empirical,bound,slack,pass"
    assert len(tails) == 1 + 3 * 2  # three blocks over the two t values
    coverage = (out1 / "coverage.csv").read_text().splitlines()
    assert coverage[0] == "delta,bound,violations,pass"
    assert coverage[1].startswith("0.5,")
    assert coverage[-1].startswith("mean,")
    events = (out1 / "events.csv").read_text().splitlines()
    assert events[1].split(",")[0] == "l1-max-correlation"
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["outputs"] == ["coverage.csv", "errors.csv", "events.csv",
                                   "tails.csv"]
    assert manifest["seeds"] == {"base_seed": 0}


def test_simulate_inherits_planted_support(tmp_path):
    # coverage without an explicit support uses the generator's planted one
    doc = simulate_config()
    assert "support" not in doc["coverage"]
    cfg = write_config(tmp_path / "cfg.json", doc)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "coverage.csv").exists()


def test_simulate_empty_t_grid_writes_header_only(tmp_path):
    doc = simulate_config()
    doc["mc"]["t_grid"] = []
    del doc["coverage"]
    doc["events"] = False
    cfg = write_config(tmp_path / "cfg.json", doc)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "tails.csv").read_text() == "t,empirical,bound,slack,pass\n"


def test_simulate_failing_coverage_exits_one(tmp_path):
    # a huge RE constant shrinks the oracle bound below the actual errors
    doc = simulate_config()
    doc["coverage"] = {"re": 1e9, "support": [0, 1]}
    cfg = write_config(tmp_path / "cfg.json", doc)
    out = tmp_path / "fail"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 1
    coverage = (out / "coverage.csv").read_text().splitlines()
    assert any(line.endswith(",false") for line in coverage[1:])


def test_constants_command_csv(tmp_path):
    doc = {
        "problem": {"generator": {"n": 12, "p": 4, "sparsity": 1}, "sigma": 1.0},
        "penalty": {"kind": "cone", "partition": [[0, 1], [2, 3]], "lambda": 0.5},
        "constants": [
            {"kind": "re", "S": [0, 1]},
            {"kind": "wre", "s": 1, "mu": "auto", "c0": 2.0},
            {"kind": "cone_q", "S": [0, 1]},
        ],
        "budget": 8,
    }
    cfg = write_config(tmp_path / "cfg.json", doc)
    out = tmp_path / "out"
    assert main(["constants", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "constants.csv").read_text().splitlines()
    assert lines[0] == "kind,S,c0,value,status,starts"
    assert len(lines) == 4
    re_row = lines[1].split(",")
    assert re_row[0] == "re" and re_row[1] == "0;1" and re_row[2] == "3"
    assert float(re_row[3]) > 0
    assert re_row[4] == "multistart-estimate" and re_row[5] == "8"
    wre_row = lines[2].split(",")
    assert wre_row[0] == "wre" and wre_row[1] == "1" and wre_row[2] == "2"
    cone_row = lines[3].split(",")
    assert cone_row[0] == "cone_q"  # cone inherited from the penalty


def test_verify_geometry_command(tmp_path):
    doc = {
        "problem": {"generator": {"n": 10, "p": 4, "sparsity": 1}, "sigma": 1.0},
        "penalty": {"kind": "l1", "lambda": "auto"},
        "n_pairs": 3,
        "n_samples": 50,
    }
    cfg = write_config(tmp_path / "cfg.json", doc)
    out = tmp_path / "out"
    assert main(["verify-geometry", "--config", cfg, "--out", str(out)]) == 0
    reports = json.loads((out / "geometry.json").read_text())
    assert [r["check"] for r in reports] == [
        "projection-identity", "contraction", "firm-nonexpansiveness"]
    assert all(r["pass"] for r in reports)
    assert reports[1]["instances"] == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == {"observation_seed": 0, "pair_seed": 1}


def test_report_aggregates_runs(tmp_path):
    solve_cfg = write_config(tmp_path / "solve.json", solve_config())
    sim_cfg = write_config(tmp_path / "sim.json", simulate_config())
    run_a, run_b = tmp_path / "runA", tmp_path / "runB"
    assert main(["solve", "--config", solve_cfg, "--out", str(run_a)]) == 0
    assert main(["simulate", "--config", sim_cfg, "--out", str(run_b)]) == 0
    report_cfg = write_config(
        tmp_path / "report.json", {"runs": [str(run_a), str(run_b)]})
    out = tmp_path / "summary"
    assert main(["report", "--config", report_cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["all_pass"] is True
    assert [r["dir"] for r in summary["runs"]] == [str(run_a), str(run_b)]
    by_name = summary["runs"][1]["artifacts"]
    assert by_name["errors.csv"]["rows"] == 100
    assert by_name["coverage.csv"]["failed"] == 0
    assert summary["runs"][0]["artifacts"]["solution.json"]["checks"] >= 1


def test_report_flags_failed_runs(tmp_path):
    doc = simulate_config()
    doc["coverage"] = {"re": 1e9, "support": [0, 1]}
    sim_cfg = write_config(tmp_path / "sim.json", doc)
    run_dir = tmp_path / "run"
    assert main(["simulate", "--config", sim_cfg, "--out", str(run_dir)]) == 1
    report_cfg = write_config(tmp_path / "report.json", {"runs": [str(run_dir)]})
    out = tmp_path / "summary"
    assert main(["report", "--config", report_cfg, "--out", str(out)]) == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["all_pass"] is False
    assert summary["runs"][0]["artifacts"]["coverage.csv"]["failed"] >= 1


def test_report_requires_manifest(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    report_cfg = write_config(tmp_path / "report.json", {"runs": [str(empty)]})
    assert main(["report", "--config", report_cfg, "--out", str(tmp_path)]) == 2
    assert "manifest.json" in capsys.readouterr().err


def test_missing_sigma_names_the_field(tmp_path, capsys):
    doc = solve_config()
    del doc["problem"]["sigma"]
    cfg = write_config(tmp_path / "cfg.json", doc)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error: problem.sigma")


def test_invalid_json_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["solve", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_missing_config_file_exits_two(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert main(["solve", "--config", missing, "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_command_mismatch_exits_two(tmp_path, capsys):
    doc = solve_config(command="solve")
    cfg = write_config(tmp_path / "cfg.json", doc)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "config says 'solve'" in capsys.readouterr().err


def test_unknown_solver_field_exits_two(tmp_path, capsys):
    doc = solve_config(solver={"step_size": 0.1})
    cfg = write_config(tmp_path / "cfg.json", doc)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "solver.step_size" in capsys.readouterr().err


def test_unknown_mc_field_exits_two(tmp_path, capsys):
    doc = simulate_config(mc={"replications": 100, "burn_in": 5})
    cfg = write_config(tmp_path / "cfg.json", doc)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "mc.burn_in" in capsys.readouterr().err


def test_unknown_command_rejected_by_argparse(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["tabulate", "--config", "x.json"])
    assert exc.value.code == 2


def test_console_script_subprocess(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", solve_config())
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "penlsq.cli", "solve", "--config", cfg,
         "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "solution.json").exists()
