"""
Configuration manager for CESTRADE.

This module contains the ConfigManager class that reads YAML scenario files
and the RunConfig dataclass that carries the command-line run settings.
"""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import yaml

from .. import constants as C
from ..core.operators import ANTICIPATED, RESPONSE_MODES
from ..core.pricing import TariffSettings
from ..core.scenario import (
    CommunitySettings,
    DemandSpec,
    Household,
    PvSpec,
    assemble_community,
    build_scenario,
    synthesize_households,
)
from ..exceptions import ConfigurationError, ValidationError, handle_exception_with_context
from ..models import CesParams, Scenario, Tariff, TimeGrid, UserProfile
from ..utils.logging_config import get_logger
from ..validators import ConfigValidator, ScenarioValidator, SeriesValidator

logger = get_logger("cestrade.config")

# Keys accepted in each top-level section of a scenario file
SCHEMA: Dict[str, Tuple[str, ...]] = {
    "grid": ("slots", "slot_hours", "peak_window", "max_load"),
    "tariff": (
        "reference_min",
        "reference_max",
        "reference_avg",
        "peak_ratio",
        "average",
        "phi",
        "delta",
    ),
    "ces": ("capacity", "initial_fraction", "initial_charge", "alpha", "beta_plus", "beta_minus"),
    "users": ("count", "participation", "seed", "demand", "total_spread", "profiles"),
    "generation": ("peak_kw", "sunrise", "sunset", "cloud_noise"),
    "solver": ("tol", "max_iter", "tau", "max_rounds", "response"),
}

DEMAND_KEYS = (
    "daily_total",
    "total_spread",
    "morning_peak",
    "evening_peak",
    "morning_width",
    "evening_width",
    "base_share",
    "morning_share",
    "noise",
)


@handle_exception_with_context("reading configuration")
def read_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read one YAML document.

    Returns:
        The document, or an empty dict for an empty file

    Raises:
        ConfigurationError: If the file is missing, unreadable or not a mapping
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(
            f"{path}: top level must be a mapping of sections", setting="document"
        )
    return data


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and limits handed to the model solvers."""

    tol: float = C.QP_TOL
    max_iter: int = C.QP_MAX_ITER
    tau: float = C.DEFAULT_TAU
    max_rounds: int = C.DEFAULT_MAX_ROUNDS
    response: str = ANTICIPATED

    def options(self) -> Dict[str, Any]:
        """Keyword arguments for ``operators.solve_model``."""
        return dataclasses.asdict(self)


@dataclass
class RunConfig:
    """
    Settings of one command-line invocation.

    The scenario comes either from ``config_path`` or, without one, from
    synthesis with the default community settings; ``seed`` and
    ``participation`` override the values of either source.
    """

    command: str = "run"
    config_path: Optional[str] = None
    out_dir: str = C.DEFAULT_OUTPUT_DIR
    seed: Optional[int] = None
    participation: Optional[float] = None
    participation_list: List[float] = field(
        default_factory=lambda: list(C.DEFAULT_PARTICIPATION_LIST)
    )
    model: str = "competitive"
    tau: Optional[float] = None
    capacities: List[float] = field(default_factory=lambda: list(C.DEFAULT_CAPACITY_LIST))
    variances: List[float] = field(default_factory=lambda: list(C.DEFAULT_VARIANCE_LIST))
    trials: int = 1
    verbose: bool = False

    @property
    def source(self) -> str:
        return "file" if self.config_path else "synthesis"

    @property
    def models(self) -> List[str]:
        return ConfigValidator.validate_model(self.model)

    def validate(self) -> "RunConfig":
        """
        Check the run settings.

        Raises:
            ValidationError: For any out-of-range setting
        """
        if self.config_path is not None and not str(self.config_path).strip():
            raise ValidationError("config path cannot be empty", field="config")
        if self.seed is not None:
            self.seed = ConfigValidator.validate_count(self.seed, "seed", minimum=0)
        if self.participation is not None:
            self.participation = ConfigValidator.validate_fraction(self.participation)
        self.participation_list = [
            ConfigValidator.validate_fraction(v) for v in self.participation_list
        ]
        if not self.participation_list:
            raise ValidationError("participation list cannot be empty", field="participation")
        ConfigValidator.validate_model(self.model)
        if self.tau is not None:
            self.tau = ConfigValidator.validate_positive(self.tau, "tau")
        self.capacities = ConfigValidator.validate_float_list(
            self.capacities, "capacities", increasing=True
        )
        self.variances = ConfigValidator.validate_float_list(self.variances, "variances")
        self.trials = ConfigValidator.validate_count(self.trials, "trials")
        return self


class ConfigManager:
    """
    Manager for scenario configuration.

    This class validates a scenario document, exposes each section as typed
    settings and builds Scenario instances from it. Missing keys fall back
    to the defaults in ``constants``.
    """

    def __init__(self, data: Optional[Dict[str, Any]] = None, source: Optional[str] = None):
        """
        Initialize the manager from an already parsed document.

        Args:
            data: Document with the sections of SCHEMA
            source: Where the document came from, for messages
        """
        self.data: Dict[str, Any] = dict(data or {})
        self.source = source or "<defaults>"
        self._check_schema()

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ConfigManager":
        """
        Load a scenario file.

        Raises:
            ConfigurationError: If the file cannot be read or parsed
        """
        logger.debug(f"Loading scenario configuration from {path}")
        return cls(read_yaml(path), source=str(path))

    def _check_schema(self) -> None:
        for name, section in self.data.items():
            if name not in SCHEMA:
                raise ConfigurationError(
                    f"{self.source}: unknown section '{name}'", setting=name
                )
            if section is None:
                continue
            if not isinstance(section, dict):
                raise ConfigurationError(
                    f"{self.source}: section '{name}' must be a mapping", setting=name
                )
            for key in section:
                if key not in SCHEMA[name]:
                    raise ConfigurationError(
                        f"{self.source}: unknown key '{name}.{key}'", setting=f"{name}.{key}"
                    )
        demand = self._section("users").get("demand") or {}
        if not isinstance(demand, dict):
            raise ConfigurationError(
                f"{self.source}: users.demand must be a mapping", setting="users.demand"
            )
        for key in demand:
            if key not in DEMAND_KEYS:
                raise ConfigurationError(
                    f"{self.source}: unknown key 'users.demand.{key}'",
                    setting=f"users.demand.{key}",
                )

    def _section(self, name: str) -> Dict[str, Any]:
        return self.data.get(name) or {}

    def get_setting(self, section: str, key: str, default=None):
        """
        Get a setting value by section and key.

        Args:
            section: Section name
            key: Setting key
            default: Default value if the key is absent or null

        Returns:
            Setting value or default
        """
        value = self._section(section).get(key)
        return default if value is None else value

    # Time grid
    def time_grid(self) -> TimeGrid:
        H = ConfigValidator.validate_count(
            self.get_setting("grid", "slots", C.DEFAULT_SLOTS), "slots"
        )
        dt = ConfigValidator.validate_positive(
            self.get_setting("grid", "slot_hours", C.DEFAULT_SLOT_HOURS), "slot_hours"
        )
        window = self.get_setting("grid", "peak_window", None)
        if window is None:
            start, stop = C.DEFAULT_PEAK_WINDOW
            # scale the default evening window to other day lengths
            window = (round(start * H / C.DEFAULT_SLOTS), round(stop * H / C.DEFAULT_SLOTS))
        return TimeGrid(H=H, dt=dt, peak_window=ConfigValidator.validate_window(window, H))

    def max_load(self) -> Optional[float]:
        value = self.get_setting("grid", "max_load", None)
        return None if value is None else ConfigValidator.validate_positive(value, "max_load")

    # Tariff
    def tariff_settings(self) -> TariffSettings:
        """Reference prices for calibration."""
        average = self.get_setting("tariff", "average", "time")
        if average not in ("time", "load"):
            raise ValidationError(
                "tariff average must be 'time' or 'load'", field="average", value=average
            )
        return TariffSettings(
            reference_min=ConfigValidator.validate_positive(
                self.get_setting("tariff", "reference_min", C.DEFAULT_REFERENCE_MIN),
                "reference_min",
                allow_zero=True,
            ),
            reference_max=ConfigValidator.validate_positive(
                self.get_setting("tariff", "reference_max", C.DEFAULT_REFERENCE_MAX),
                "reference_max",
            ),
            reference_avg=ConfigValidator.validate_positive(
                self.get_setting("tariff", "reference_avg", C.DEFAULT_REFERENCE_AVG),
                "reference_avg",
            ),
            peak_ratio=ConfigValidator.validate_positive(
                self.get_setting("tariff", "peak_ratio", C.PEAK_PHI_RATIO), "peak_ratio"
            ),
            average=average,
        )

    def explicit_tariff(self, H: int) -> Optional[Tariff]:
        """
        Per-slot (phi, delta) given in the file, if any.

        Raises:
            ConfigurationError: If only one of phi and delta is given
        """
        phi = self.get_setting("tariff", "phi", None)
        delta = self.get_setting("tariff", "delta", None)
        if phi is None and delta is None:
            return None
        if phi is None or delta is None:
            raise ConfigurationError(
                "tariff.phi and tariff.delta must be given together", setting="tariff"
            )
        tariff = Tariff(
            phi=SeriesValidator.validate_series(phi, H, "phi"),
            delta=SeriesValidator.validate_series(delta, H, "delta"),
        )
        return ScenarioValidator.validate_tariff(tariff, H)

    # Storage
    def ces_params(self) -> CesParams:
        capacity = ConfigValidator.validate_positive(
            self.get_setting("ces", "capacity", C.DEFAULT_CAPACITY), "capacity", allow_zero=True
        )
        initial = self.get_setting("ces", "initial_charge", None)
        if initial is None:
            fraction = ConfigValidator.validate_positive(
                self.get_setting("ces", "initial_fraction", C.DEFAULT_INITIAL_FRACTION),
                "initial_fraction",
                allow_zero=True,
            )
            initial = fraction * capacity
        params = CesParams(
            Q_M=capacity,
            q0=ConfigValidator.validate_positive(initial, "initial_charge", allow_zero=True),
            alpha=float(self.get_setting("ces", "alpha", C.DEFAULT_ALPHA)),
            beta_plus=float(self.get_setting("ces", "beta_plus", C.DEFAULT_BETA_PLUS)),
            beta_minus=float(self.get_setting("ces", "beta_minus", C.DEFAULT_BETA_MINUS)),
        )
        return ScenarioValidator.validate_ces_params(params)

    # Users
    def user_seed(self) -> int:
        return ConfigValidator.validate_count(
            self.get_setting("users", "seed", C.DEFAULT_SEED), "seed", minimum=0
        )

    def participation(self) -> float:
        return ConfigValidator.validate_fraction(
            self.get_setting("users", "participation", C.DEFAULT_PARTICIPATION)
        )

    def demand_spec(self, H: int) -> DemandSpec:
        demand = self._section("users").get("demand") or {}
        values = {k: float(v) for k, v in demand.items() if k != "total_spread"}
        return DemandSpec(H=H, **values)

    def demand_spread(self) -> float:
        demand = self._section("users").get("demand") or {}
        spread = demand.get("total_spread", self.get_setting("users", "total_spread", None))
        if spread is None:
            spread = C.DEFAULT_DEMAND_SPREAD
        return ConfigValidator.validate_positive(spread, "total_spread", allow_zero=True)

    def pv_spec(self, grid: TimeGrid) -> PvSpec:
        gen = self._section("generation")
        return PvSpec(
            H=grid.H,
            dt=grid.dt,
            peak_kw=float(gen.get("peak_kw", C.DEFAULT_PV_PEAK_KW)),
            sunrise=int(gen.get("sunrise", C.DEFAULT_SUNRISE)),
            sunset=int(gen.get("sunset", C.DEFAULT_SUNSET)),
            cloud_noise=float(gen.get("cloud_noise", C.DEFAULT_CLOUD_NOISE)),
        )

    def profiles(self) -> Optional[List[UserProfile]]:
        """Explicit household profiles, if the file lists them."""
        raw = self.get_setting("users", "profiles", None)
        if raw is None:
            return None
        if not isinstance(raw, list) or not raw:
            raise ConfigurationError(
                "users.profiles must be a non-empty list", setting="users.profiles"
            )
        try:
            return [UserProfile.from_dict(item) for item in raw]
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(
                f"malformed entry in users.profiles: {e}", setting="users.profiles"
            ) from e

    def community_settings(self) -> CommunitySettings:
        """Everything needed to synthesize or assemble the community."""
        grid = self.time_grid()
        profiles = self.profiles()
        if profiles:
            count = len(profiles)
        else:
            count = self.get_setting("users", "count", C.DEFAULT_USER_COUNT)
        return CommunitySettings(
            user_count=ConfigValidator.validate_count(count, "users.count"),
            demand=self.demand_spec(grid.H),
            demand_spread=self.demand_spread(),
            pv=self.pv_spec(grid),
            grid=grid,
            tariff=self.tariff_settings(),
            ces=self.ces_params(),
            max_load=self.max_load(),
        )

    # Solver
    def solver_settings(self, tau: Optional[float] = None) -> SolverSettings:
        """
        Solver settings, with an optional tau override from the command line.
        """
        response = self.get_setting("solver", "response", ANTICIPATED)
        if response not in RESPONSE_MODES:
            raise ValidationError(
                f"solver.response must be one of {', '.join(RESPONSE_MODES)}",
                field="response",
                value=response,
            )
        return SolverSettings(
            tol=ConfigValidator.validate_positive(
                self.get_setting("solver", "tol", C.QP_TOL), "tol"
            ),
            max_iter=ConfigValidator.validate_count(
                self.get_setting("solver", "max_iter", C.QP_MAX_ITER), "max_iter"
            ),
            tau=ConfigValidator.validate_positive(
                tau if tau is not None else self.get_setting("solver", "tau", C.DEFAULT_TAU), "tau"
            ),
            max_rounds=ConfigValidator.validate_count(
                self.get_setting("solver", "max_rounds", C.DEFAULT_MAX_ROUNDS), "max_rounds"
            ),
            response=response,
        )

    # Scenarios
    def households(self, seed: int) -> List[Household]:
        """Listed households, or a synthetic community from the seed."""
        profiles = self.profiles()
        if profiles is None:
            return synthesize_households(seed, self.community_settings())
        return [Household(id=p.id, demand=p.demand, pv=p.generation) for p in profiles]

    def build_scenario(
        self, seed: Optional[int] = None, participation: Optional[float] = None
    ) -> Scenario:
        """
        Build the configured scenario.

        Listed profiles keep their own participation flags unless a
        participation fraction is given; synthetic communities always draw the
        participating subset from the seed.

        Raises:
            ConfigurationError, ValidationError, ScenarioError, CalibrationError
        """
        seed = self.user_seed() if seed is None else seed
        settings = self.community_settings()
        tariff = self.explicit_tariff(settings.grid.H)
        profiles = self.profiles()

        if profiles is not None and participation is None:
            return build_scenario(
                settings.grid,
                profiles,
                settings.ces,
                tariff=tariff,
                tariff_settings=settings.tariff,
                L_max=settings.max_load,
            )

        if participation is None:
            participation = self.participation()
        return assemble_community(self.households(seed), participation, seed, settings, tariff)

    def scenarios_by_participation(
        self, fractions: Sequence[float], seed: Optional[int] = None
    ) -> Dict[float, Scenario]:
        """One scenario per participation fraction over the same households."""
        seed = self.user_seed() if seed is None else seed
        settings = self.community_settings()
        tariff = self.explicit_tariff(settings.grid.H)
        households = self.households(seed)
        return {
            float(f): assemble_community(households, f, seed, settings, tariff)
            for f in fractions
        }

    def to_dict(self) -> Dict[str, Any]:
        """The resolved configuration, every default filled in."""
        settings = self.community_settings()
        solver = self.solver_settings()
        grid = settings.grid
        demand = {k: getattr(settings.demand, k) for k in DEMAND_KEYS if k != "total_spread"}
        demand["total_spread"] = settings.demand_spread
        tariff = dataclasses.asdict(settings.tariff)
        explicit = self.explicit_tariff(grid.H)
        if explicit is not None:
            tariff.update(explicit.to_dict())
        users = {
            "count": settings.user_count,
            "participation": self.participation(),
            "seed": self.user_seed(),
            "demand": demand,
        }
        profiles = self.profiles()
        if profiles is not None:
            users["profiles"] = [p.to_dict() for p in profiles]
        return {
            "grid": {**grid.to_dict(), "max_load": settings.max_load},
            "tariff": tariff,
            "ces": settings.ces.to_dict(),
            "users": users,
            "generation": {
                "peak_kw": settings.pv.peak_kw,
                "sunrise": settings.pv.sunrise,
                "sunset": settings.pv.sunset,
                "cloud_noise": settings.pv.cloud_noise,
            },
            "solver": solver.options(),
        }

    def save(self, path: Union[str, Path]) -> Path:
        """Write the resolved configuration as YAML."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)
        return path
