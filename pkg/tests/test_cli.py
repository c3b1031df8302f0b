"""Command-line surface: outputs, exit codes, config files and reproducibility."""

import json
import math
import subprocess
import sys

import jsonschema
import pytest

from spinlab import analyzer, graphs, mc
from spinlab.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out)


# -- greens ---------------------------------------------------------------------


def test_greens_parallel_paths(capsys):
    code, doc = run_json(capsys, "greens", "paths:3x3", 1, 11)
    assert code == 0
    assert doc["u_source"] == pytest.approx(4.0)
    assert doc["renormalized"] == pytest.approx(4 / 3)
    assert doc["schema_version"] == 1


def test_greens_edge_list_file(capsys, tmp_path):
    path = tmp_path / "k2.txt"
    path.write_text("1 2\n")
    code, doc = run_json(capsys, "greens", path, 1, 2)
    assert code == 0 and doc["u_source"] == pytest.approx(1.0)


def test_greens_usage_errors(capsys):
    assert run(capsys, "greens", "path:3", 2, 2)[0] == 2
    assert run(capsys, "greens", "path:3", 1, 3, "--oracle")[0] == 2  # no seed
    assert run(capsys, "greens", "nonsense:1", 1, 2)[0] == 2


def test_greens_oracle(capsys):
    code, doc = run_json(capsys, "greens", "paths:3x3", 1, 11, "--oracle", "--seed", 5, "--trials", 20000)
    assert code == 0
    assert abs(doc["oracle"]["mean"] - 4.0) < 5 * doc["oracle"]["stderr"]


def test_greens_csv(capsys):
    code, out, _ = run(capsys, "greens", "path:3", 1, 3, "--format", "csv")
    lines = out.splitlines()
    assert lines[0] == "vertex,u" and len(lines) == 4


# -- gd-check -----------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv, code",
    [(["star:11", "--beta", 1], 3), (["tree:4", "--beta", 0.05], 0), (["cycle:6", "--beta", 0.01], 0)],
)
def test_gd_check_exit_codes(capsys, argv, code):
    got, doc = run_json(capsys, "gd-check", *argv, "--N", 1, "--method", "exact")
    assert got == code
    jsonschema.validate(doc, analyzer.GD_REPORT_SCHEMA)


def test_gd_check_inconclusive(capsys):
    code, doc = run_json(capsys, "gd-check", "star:10", "--beta", 1, "--method", "mc",
                         "--seed", 1, "--sweeps", 4000, "--burn-in", 500)
    assert code == 4 and doc["verdict"] == "Inconclusive"


def test_gd_check_mc_needs_seed(capsys):
    assert run(capsys, "gd-check", "k2", "--beta", 1, "--method", "mc")[0] == 2


def test_gd_check_exact_limits(capsys):
    assert run(capsys, "gd-check", "k2", "--beta", 1, "--N", 2)[0] == 2
    assert run(capsys, "gd-check", "path:30", "--beta", 1)[0] == 2


def test_gd_check_audit(capsys):
    code, doc = run_json(capsys, "gd-check", "cycle:5", "--beta", 2, "--audit")
    assert code == 0
    assert doc["audit_failures"] == 0 and len(doc["audit"]) == 20


# -- counterexample ---------------------------------------------------------------------


def test_counterexample_star(capsys):
    code, doc = run_json(capsys, "counterexample", "star", "--beta", 1, "--N", 1)
    assert code == 0
    assert doc["minimal_n0"] == 11
    assert doc["hessian_at_n0"] > 0 > doc["hessian_below"]
    assert doc["enumeration_second_derivative"] > 0


def test_counterexample_star_unsupported(capsys):
    assert run(capsys, "counterexample", "star", "--beta", 1, "--N", 4)[0] == 2


def test_counterexample_tree(capsys):
    _, doc6 = run_json(capsys, "counterexample", "tree", "--beta", 1.2, "--k", 6)
    assert doc6["threshold_beta0"] == pytest.approx(0.8814, abs=1e-4)
    assert doc6["diverges_with_depth"] is True
    assert doc6["hessian"] < 0  # depth 6 is not yet deep enough at this beta
    _, doc8 = run_json(capsys, "counterexample", "tree", "--beta", 1.2, "--k", 8)
    assert doc8["hessian"] > 0
    _, doc4 = run_json(capsys, "counterexample", "tree", "--beta", 1.2, "--k", 4)
    assert math.copysign(1, doc4["enumeration_second_derivative"]) == math.copysign(1, doc4["hessian"])


def test_counterexample_paths(capsys):
    _, doc = run_json(capsys, "counterexample", "paths", "--l", 8, "--d", 8, "--beta", 5)
    assert doc["renormalized_green"] == pytest.approx(9 / 8)
    assert doc["renormalized_green"] < doc["green_bound_M"]
    l = doc["depth_below_epsilon"]
    from spinlab.exact import parallel_paths_correlation_closed_form as corr
    assert corr(5.0, l, l) < 0.5 <= corr(5.0, l - 1, l - 1)
    _, doc = run_json(capsys, "counterexample", "paths", "--l", 40, "--d", 40, "--beta", 1)
    assert doc["correlation"] < 0.5 and doc["bound_violated"] is True


# -- gff-compare / mc ------------------------------------------------------------------------


def test_gff_compare_csv(capsys):
    code, out, _ = run(capsys, "gff-compare", "k2", "--N", 2, "--x", 1, "--y", 2,
                       "--betas", "10,40", "--seed", 3)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "beta,moment_estimate,moment_stderr,moment_target,ks_stat"
    assert len(lines) == 3


def test_gff_compare_errors(capsys):
    assert run(capsys, "gff-compare", "k2", "--N", 1, "--x", 1, "--y", 2, "--seed", 3)[0] == 2
    assert run(capsys, "gff-compare", "k2", "--N", 2, "--x", 1, "--y", 2)[0] == 2


def test_mc_report_and_samples(capsys, tmp_path):
    path = tmp_path / "s.bin"
    code, doc = run_json(capsys, "mc", "cycle:4", "--N", 2, "--beta", 1, "--seed", 2,
                         "--sweeps", 3000, "--burn-in", 200, "--save", path)
    assert code == 0 and len(doc["estimates"]) == 6
    assert mc.load_samples(path).shape == (2800, 4, 2)


def test_mc_reproducible_bytes(capsys, monkeypatch):
    argv = ["mc", "path:4", "--N", 3, "--beta", 2, "--seed", 11, "--sweeps", 3000,
            "--burn-in", 200, "--replicas", 2]
    _, a, _ = run(capsys, *argv, "--threads", 1)
    _, b, _ = run(capsys, *argv, "--threads", 1)
    monkeypatch.setenv("SPINLAB_THREADS", "2")
    _, c, _ = run(capsys, *argv)
    assert a == b == c
    _, d, _ = run(capsys, *argv[:-5], 12, *argv[-4:])
    assert d != a


# -- config / graph ---------------------------------------------------------------------------


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nbeta = 1\nmethod = exact\n")
    code, doc = run_json(capsys, "gd-check", "star:11", "--config", cfg)
    assert code == 3 and doc["beta"] == 1.0
    code, doc = run_json(capsys, "gd-check", "star:11", "--config", cfg, "--beta", 0.5)
    assert doc["beta"] == 0.5
    cfg.write_text("bogus = 1\n")
    assert run(capsys, "gd-check", "star:11", "--beta", 1, "--config", cfg)[0] == 2


def test_graph_round_trip(capsys, tmp_path):
    path = tmp_path / "t.txt"
    assert run(capsys, "graph", "tree:4", "--out", path)[0] == 0
    assert graphs.read_edge_list(path).edges == graphs.generate("tree:4").edges


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "spinlab", "greens", "path:3", "1", "3"],
                         capture_output=True, text=True, check=True).stdout
    assert json.loads(out)["u_source"] == pytest.approx(2.0)
