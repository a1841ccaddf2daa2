"""Tests for ConfigManager, RunConfig and YAML loading."""

import pytest

from CESTRADE import constants as C
from CESTRADE.managers.config_manager import ConfigManager, RunConfig, SolverSettings, read_yaml
from CESTRADE.exceptions import ConfigurationError, ValidationError


class TestReadYaml:
    """Tests for read_yaml."""

    def test_empty_file(self, tmp_path):
        """Test an empty file is an empty document."""
        path = tmp_path / "empty.yaml"
        path.write_text("", encoding="utf-8")
        assert read_yaml(path) == {}

    def test_not_a_mapping(self, tmp_path):
        """Test a list at the top level is rejected."""
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            read_yaml(path)

    def test_missing_file(self, tmp_path):
        """Test a missing file maps to a configuration error."""
        with pytest.raises(ConfigurationError) as info:
            read_yaml(tmp_path / "absent.yaml")
        assert info.value.setting == "path"

    def test_bad_syntax(self, tmp_path):
        """Test a parse error maps to a configuration error."""
        path = tmp_path / "bad.yaml"
        path.write_text("grid: [1, 2\n", encoding="utf-8")
        with pytest.raises(ConfigurationError) as info:
            read_yaml(path)
        assert info.value.setting == "syntax"


class TestSchema:
    """Tests for schema checks."""

    def test_unknown_section(self):
        """Test sections outside the schema."""
        with pytest.raises(ConfigurationError) as info:
            ConfigManager({"battery": {}})
        assert info.value.setting == "battery"

    def test_unknown_key(self):
        """Test keys outside a section's schema."""
        with pytest.raises(ConfigurationError) as info:
            ConfigManager({"ces": {"size": 3}})
        assert info.value.setting == "ces.size"

    def test_unknown_demand_key(self):
        """Test the nested demand mapping."""
        with pytest.raises(ConfigurationError):
            ConfigManager({"users": {"demand": {"peak": 1.0}}})

    def test_section_must_be_mapping(self):
        """Test scalar sections are rejected."""
        with pytest.raises(ConfigurationError):
            ConfigManager({"grid": 48})

    def test_null_section(self):
        """Test an empty section falls back to defaults."""
        grid = ConfigManager({"grid": None}).time_grid()
        assert grid.H == C.DEFAULT_SLOTS
        assert grid.peak_window == C.DEFAULT_PEAK_WINDOW


class TestSettings:
    """Tests for typed settings."""

    def test_window_scales_with_day_length(self):
        """Test the default peak window follows the slot count."""
        assert ConfigManager({"grid": {"slots": 24}}).time_grid().peak_window == (16, 23)

    def test_window_outside_day(self):
        """Test an explicit window must fit the day."""
        with pytest.raises(ValidationError):
            ConfigManager({"grid": {"slots": 4, "peak_window": [2, 6]}}).time_grid()

    def test_explicit_tariff_needs_both(self):
        """Test phi without delta."""
        with pytest.raises(ConfigurationError):
            ConfigManager({"tariff": {"phi": [1.0, 1.0]}}).explicit_tariff(2)

    def test_explicit_tariff_length(self):
        """Test the series must cover the horizon."""
        with pytest.raises(ValidationError):
            ConfigManager({"tariff": {"phi": [1.0], "delta": [1.0]}}).explicit_tariff(2)

    def test_bad_average(self):
        """Test the calibration mean mode."""
        with pytest.raises(ValidationError):
            ConfigManager({"tariff": {"average": "peak"}}).tariff_settings()

    def test_ces_from_fraction(self):
        """Test the initial charge defaults to a fraction of capacity."""
        params = ConfigManager({"ces": {"capacity": 40, "initial_fraction": 0.25}}).ces_params()
        assert params.Q_M == 40.0
        assert params.q0 == 10.0

    def test_solver_settings(self):
        """Test file values, the tau override and the response check."""
        manager = ConfigManager({"solver": {"tau": 0.01, "max_rounds": 5}})

        assert manager.solver_settings().tau == 0.01
        assert manager.solver_settings(tau=0.2).tau == 0.2
        assert manager.solver_settings().options()["max_rounds"] == 5
        with pytest.raises(ValidationError):
            ConfigManager({"solver": {"response": "lazy"}}).solver_settings()

    def test_solver_defaults(self):
        """Test default solver options."""
        assert SolverSettings().options() == {
            "tol": C.QP_TOL,
            "max_iter": C.QP_MAX_ITER,
            "tau": C.DEFAULT_TAU,
            "max_rounds": C.DEFAULT_MAX_ROUNDS,
            "response": "anticipated",
        }

    def test_malformed_profiles(self):
        """Test a profile without demand."""
        with pytest.raises(ConfigurationError):
            ConfigManager({"users": {"profiles": [{"id": 0}]}}).profiles()
        with pytest.raises(ConfigurationError):
            ConfigManager({"users": {"profiles": []}}).profiles()


class TestScenarios:
    """Tests for scenario construction from files."""

    def test_profiles_keep_flags(self, tiny_config_file):
        """Test listed profiles keep their participation flags."""
        scenario = ConfigManager.from_file(tiny_config_file).build_scenario()

        assert scenario.I == 2
        assert scenario.participant_ids == [0, 1]
        assert scenario.L_max == 20.0
        assert scenario.tariff.phi.tolist() == [1.0, 1.0, 1.5, 1.5]
        assert scenario.ces.q0 == 2.5

    def test_participation_override(self, tiny_config_data):
        """Test a fraction re-draws the participating subset."""
        scenario = ConfigManager(tiny_config_data).build_scenario(participation=0.34)
        assert scenario.I == 1

    def test_by_participation(self, tiny_config_data):
        """Test one scenario per fraction over the same households."""
        scenarios = ConfigManager(tiny_config_data).scenarios_by_participation([0.34, 1.0])

        assert list(scenarios) == [0.34, 1.0]
        assert scenarios[0.34].I == 1
        assert scenarios[1.0].I == 3

    def test_synthetic_defaults(self):
        """Test an empty document synthesizes the default community."""
        manager = ConfigManager({"users": {"count": 10}})
        scenario = manager.build_scenario(seed=4, participation=0.4)

        assert len(scenario.users) == 10
        assert scenario.I == 4

    def test_save_round_trip(self, tmp_path, tiny_config_data):
        """Test the resolved document survives a save and reload."""
        manager = ConfigManager(tiny_config_data, source="tiny")
        path = manager.save(tmp_path / "out" / "config.yaml")

        assert ConfigManager.from_file(path).to_dict() == manager.to_dict()
        assert manager.to_dict()["grid"]["peak_window"] == [2, 4]


class TestRunConfig:
    """Tests for RunConfig validation."""

    def test_defaults(self):
        """Test the default run."""
        config = RunConfig().validate()

        assert config.source == "synthesis"
        assert config.models == ["competitive"]
        assert RunConfig(config_path="x.yaml").source == "file"
        assert RunConfig(model="all").models == [
            "competitive",
            "benevolent",
            "centralized",
            "baseline",
        ]

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"participation": 2.0},
            {"participation": 0.0},
            {"seed": -1},
            {"model": "greedy"},
            {"tau": 0.0},
            {"capacities": [20.0, 10.0]},
            {"variances": []},
            {"trials": 0},
            {"participation_list": []},
            {"config_path": "  "},
        ],
    )
    def test_invalid(self, kwargs):
        """Test out-of-range run settings."""
        with pytest.raises(ValidationError):
            RunConfig(**kwargs).validate()
