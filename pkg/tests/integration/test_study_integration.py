"""Integration tests for studies run end to end."""

import numpy as np
import pytest

from CESTRADE.cli import main
from CESTRADE.core import operators, pricing
from CESTRADE.core.metrics import community_benefit
from CESTRADE.managers.config_manager import ConfigManager, RunConfig
from CESTRADE.managers.study_manager import StudyManager
from CESTRADE.utils.format_utils import read_csv


def _study(config_file, out_dir, **run):
    config = ConfigManager.from_file(config_file)
    run_config = RunConfig(config_path=str(config_file), out_dir=str(out_dir), **run)
    return StudyManager(config, run_config.validate())


@pytest.mark.integration
class TestRunArtifacts:
    """Tests for the single-run artifacts."""

    def test_timeseries_matches_report(self, tiny_config_file, tiny_scenario, tmp_path):
        """Test the written prices and charge against a direct solve."""
        _study(tiny_config_file, tmp_path, model="benevolent").run_models()
        frame = read_csv(tmp_path / "timeseries.csv")
        outcome = operators.solve_model(tiny_scenario, operators.BENEVOLENT)
        rep = operators.report(tiny_scenario, outcome)

        assert frame["model"].unique().tolist() == ["benevolent"]
        assert np.allclose(frame["p"], rep.prices, rtol=1e-7)
        assert np.allclose(frame["q"], rep.trajectory.q[1:], rtol=1e-7, atol=1e-8)
        assert np.allclose(frame["baseline_p"], [14.0, 11.0, 19.0, 16.0])
        assert {"x_0", "x_1", "l_0", "l_1", "l_2"} <= set(frame.columns)

    def test_summary_and_savings(self, tiny_config_file, tmp_path):
        """Test headline metrics and per-user rows of every model."""
        written = _study(tiny_config_file, tmp_path, model="all").run_models()
        summary = read_csv(written["summary"]).set_index("model")
        savings = read_csv(written["savings"])

        assert summary.loc["baseline", "community_benefit"] == pytest.approx(0.0)
        assert summary.loc["centralized", "community_benefit"] >= summary.loc[
            "competitive", "community_benefit"
        ] - 1e-6
        assert bool(summary.loc["competitive", "converged"])
        assert len(savings) == 4 * 3
        convergence = read_csv(written["convergence"])
        assert convergence["round"].tolist()[0] == 1

    def test_runs_are_byte_identical(self, tiny_config_file, tmp_path, restore_logging):
        """Test equal inputs write equal files."""
        first, second = tmp_path / "a", tmp_path / "b"
        for out in (first, second):
            args = ["run", "--config", str(tiny_config_file), "--out", str(out), "--model", "all"]
            assert main(args + ["--no-log-file"]) == 0

        for name in ("timeseries.csv", "summary.csv", "user_savings.csv", "convergence.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()


@pytest.mark.integration
class TestStudies:
    """Tests for the comparison, sweep and noise studies."""

    def test_compare(self, tiny_config_file, tmp_path):
        """Test one row per model and fraction."""
        study = _study(tiny_config_file, tmp_path, model="all", participation_list=[0.67])
        table = read_csv(study.compare()["comparison"])

        assert table["model"].tolist() == ["competitive", "benevolent", "centralized"]
        assert table["participation_pct"].tolist() == pytest.approx([67.0] * 3)

    def test_sweep(self, tiny_config_file, tmp_path):
        """Test the benefit grid and best capacity files."""
        study = _study(tiny_config_file, tmp_path, model="centralized", capacities=[0.0, 5.0, 10.0])
        written = study.sweep()
        table = read_csv(written["sweep"])
        best = read_csv(written["sweep_best"])

        assert table["capacity"].tolist() == [0.0, 5.0, 10.0]
        assert table["benefit_centralized"].iloc[0] == pytest.approx(0.0, abs=1e-6)
        assert np.all(np.diff(table["benefit_centralized"]) >= -1e-6)
        assert best["model"].tolist() == ["centralized"]

    def test_noise(self, tiny_config_file, tmp_path):
        """Test one row per variance with no clipping at zero noise."""
        study = _study(
            tiny_config_file, tmp_path, model="benevolent", variances=[0.0, 10.0], trials=2, seed=5
        )
        table = read_csv(study.noise()["noise"])

        assert table["variance_pct"].tolist() == [0.0, 10.0]
        assert table["clip_events"].iloc[0] == 0
        assert table["trials"].tolist() == [2, 2]

    def test_validate(self, tiny_config_file, tmp_path):
        """Test the scenario summary counts slot classes."""
        summary = _study(tiny_config_file, tmp_path).validate()

        assert summary["participants"] == 2
        assert summary["slot_cases"] == {"all-deficit": 2, "all-surplus": 1, "mixed": 1}
        assert not (tmp_path / "timeseries.csv").exists()


@pytest.mark.integration
@pytest.mark.slow
class TestDefaultCommunity:
    """Model properties on the default synthetic community."""

    @pytest.fixture(scope="class")
    def reports(self, default_community):
        """Reports of every model on the default community."""
        models = (operators.COMPETITIVE, operators.BENEVOLENT, operators.CENTRALIZED)
        return {
            m: operators.report(default_community, operators.solve_model(default_community, m))
            for m in models
        }

    def test_benefit_ordering(self, default_community, reports):
        """Test the centralized operator gives the largest community benefit."""
        baseline = pricing.baseline_outcome(default_community)
        benefits = {
            m: community_benefit(r, baseline, default_community) for m, r in reports.items()
        }

        assert benefits[operators.CENTRALIZED] >= benefits[operators.COMPETITIVE] - 1e-6
        assert benefits[operators.CENTRALIZED] >= benefits[operators.BENEVOLENT] - 1e-6
        assert benefits[operators.CENTRALIZED] > 0

    def test_competitive_revenue(self, reports):
        """Test the competitive operator earns at least the benevolent revenue."""
        competitive = reports[operators.COMPETITIVE]
        assert competitive.revenue >= reports[operators.BENEVOLENT].revenue - 1e-6
        assert competitive.converged

    def test_storage_feasible(self, default_community, reports):
        """Test every schedule respects the storage."""
        for rep in reports.values():
            q = rep.trajectory.q
            assert q.min() >= -1e-6
            assert q.max() <= default_community.ces.Q_M + 1e-6
