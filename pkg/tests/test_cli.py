"""
Tests for the command-line entry point.
"""

import json

import pandas as pd
import pytest
import yaml

from fairfrontier import __version__
from fairfrontier.main import build_parser, parse_policy_spec, run
from fairfrontier.errors import InputError


QUICK = {
    "learner": {"n_lambdas": 5, "inner_folds": 2, "max_sweeps": 2000},
    "crossfit": {"folds": 2},
    "grid": {"directions": 60, "half_directions": 30, "pareto_directions": 20, "resolution": 30},
    "frontier": {"band_candidates": 5},
    "bootstrap": {"draws": 100},
    "test": {"full_directions": 60, "half_directions": 30, "pareto_directions": 20,
             "candidates": 5, "e_candidates": 3},
    "output": {"hyperplanes": 12},
}


@pytest.fixture
def quick_config(tmp_path):
    path = tmp_path / "quick.yaml"
    path.write_text(yaml.safe_dump(QUICK))
    return path


class TestParser:
    """Argument parsing."""

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["--version"])
        assert exc.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_unknown_test(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["test", "pareto"])

    @pytest.mark.parametrize("spec, value", [("never", 0.0), ("always", 1.0), ("constant:0.25", 0.25)])
    def test_policy_specs(self, spec, value):
        assert parse_policy_spec(spec).value == value

    def test_bad_policy_spec(self):
        with pytest.raises(InputError, match="Invalid policy spec"):
            parse_policy_spec("sometimes")


class TestCommands:
    """Commands run against the bundled toy data."""

    def test_estimate_writes_artifacts(self, toy_path, quick_config, tmp_path):
        out = tmp_path / "out"
        code = run(["estimate", "-i", str(toy_path), "-c", str(quick_config), "-o", str(out)])
        assert code == 0
        for name in ("report.json", "h_grid.csv", "feasible_set.csv", "frontier.csv", "pareto.csv",
                     "frontier_band.csv", "frontier.svg", "run.log"):
            assert (out / name).exists(), name
        report = json.loads((out / "report.json").read_text())
        assert report["command"] == "estimate"
        assert report["inputs"]["n"] == 500
        assert "timings" not in report
        svg = (out / "frontier.svg").read_text()
        assert svg.count('class="hyperplane"') == 12
        assert len(pd.read_csv(out / "h_grid.csv")) == 60

    def test_lda_needs_status_quo(self, toy_path, quick_config, tmp_path):
        code = run(["test", "lda", "-i", str(toy_path), "-c", str(quick_config), "-o", str(tmp_path / "out")])
        assert code == 2

    def test_missing_input(self, quick_config, tmp_path):
        code = run(["test", "skew", "-c", str(quick_config), "-o", str(tmp_path / "out")])
        assert code == 2

    def test_bad_override(self, toy_path, tmp_path):
        code = run(["test", "skew", "-i", str(toy_path), "--alpha", "1.5", "-o", str(tmp_path / "out")])
        assert code == 2

    def test_lda_with_scores(self, toy_path, toy_scores_path, quick_config, tmp_path):
        out = tmp_path / "out"
        code = run(["test", "lda", "-i", str(toy_path), "--policy-scores", str(toy_scores_path),
                    "-c", str(quick_config), "-o", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        result = report["results"]["lda"]
        assert result["n"] == 500
        assert len(result["e_star"]) == 2
        assert (out / "tests_summary.txt").read_text().strip()

    def test_rawlsian_policy(self, toy_path, quick_config, tmp_path):
        out = tmp_path / "out"
        code = run(["policy", "rawlsian", "-i", str(toy_path), "-c", str(quick_config), "-o", str(out)])
        assert code == 0
        decisions = pd.read_csv(out / "policy_decisions.csv")
        assert list(decisions.columns) == ["row_id", "k", "decision"]
        split = pd.read_csv(out / "policy_split.csv")
        assert set(split["split"]) == {"train", "eval"}
        summary = json.loads((out / "report.json").read_text())["results"]["policy"]
        assert summary["rule"] == "rawlsian"
        assert summary["n_train"] + summary["n_eval"] == 500

    @pytest.mark.slow
    def test_mc_smoke(self, tmp_path):
        config = dict(QUICK)
        config["mc"] = {"dgps": ["balanced"], "sizes": [400], "replications": 2, "tests": ["lda"],
                        "learner": "oracle-dgp", "oracle_draws": 100000}
        path = tmp_path / "mc.yaml"
        path.write_text(yaml.safe_dump(config))
        out = tmp_path / "out"
        assert run(["mc", "-c", str(path), "-o", str(out)]) == 0
        table = pd.read_csv(out / "mc_table.csv")
        assert table.loc[0, "n"] == 400
        sidecar = json.loads((out / "mc_table.json").read_text())
        assert "balanced" in sidecar["truths"]
