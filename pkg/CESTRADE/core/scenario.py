"""
Problem instances: time grid, households, tariff and storage parameters.

Also hosts the synthetic demand and PV generators that stand in for measured
household data, the per-slot surplus/deficit partition and the forecast
noise model.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .. import constants as C
from ..exceptions import ValidationError
from ..models import CesParams, Scenario, SlotPartition, SurplusView, Tariff, TimeGrid, UserProfile
from ..utils.logging_config import get_logger
from ..validators import ConfigValidator, ScenarioValidator
from .pricing import TariffSettings, calibrate_tariff

logger = get_logger("cestrade.scenario")

# Relative noise scale giving E|noise| / |value| = variance_pct / 200.
_HALF_NORMAL_SCALE = math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class DemandSpec:
    """Shape of a synthetic double-peak household demand day."""

    H: int = C.DEFAULT_SLOTS
    daily_total: float = C.DEFAULT_DAILY_DEMAND
    morning_peak: float = C.DEFAULT_MORNING_PEAK
    evening_peak: float = C.DEFAULT_EVENING_PEAK
    morning_width: float = C.DEFAULT_MORNING_WIDTH
    evening_width: float = C.DEFAULT_EVENING_WIDTH
    base_share: float = C.DEFAULT_BASE_SHARE
    morning_share: float = C.DEFAULT_MORNING_SHARE
    noise: float = C.DEFAULT_DEMAND_NOISE


@dataclass(frozen=True)
class PvSpec:
    """Shape of a synthetic daylight PV generation day."""

    H: int = C.DEFAULT_SLOTS
    dt: float = C.DEFAULT_SLOT_HOURS
    peak_kw: float = C.DEFAULT_PV_PEAK_KW
    sunrise: int = C.DEFAULT_SUNRISE
    sunset: int = C.DEFAULT_SUNSET
    cloud_noise: float = C.DEFAULT_CLOUD_NOISE


@dataclass(frozen=True)
class CommunitySettings:
    """Everything needed to synthesize a community scenario from a seed."""

    user_count: int = C.DEFAULT_USER_COUNT
    demand: DemandSpec = field(default_factory=DemandSpec)
    demand_spread: float = C.DEFAULT_DEMAND_SPREAD
    pv: PvSpec = field(default_factory=PvSpec)
    grid: TimeGrid = field(
        default_factory=lambda: TimeGrid(
            C.DEFAULT_SLOTS, C.DEFAULT_SLOT_HOURS, C.DEFAULT_PEAK_WINDOW
        )
    )
    tariff: TariffSettings = field(
        default_factory=lambda: TariffSettings(
            C.DEFAULT_REFERENCE_MIN, C.DEFAULT_REFERENCE_MAX, C.DEFAULT_REFERENCE_AVG
        )
    )
    ces: CesParams = field(
        default_factory=lambda: CesParams(
            Q_M=C.DEFAULT_CAPACITY,
            q0=C.DEFAULT_INITIAL_FRACTION * C.DEFAULT_CAPACITY,
            alpha=C.DEFAULT_ALPHA,
            beta_plus=C.DEFAULT_BETA_PLUS,
            beta_minus=C.DEFAULT_BETA_MINUS,
        )
    )
    max_load: Optional[float] = None


@dataclass(eq=False)
class Household:
    """A household's demand and the PV it would generate as a participant."""

    id: int
    demand: np.ndarray
    pv: np.ndarray


def surplus_view(profile: UserProfile) -> SurplusView:
    """s_n(t) = g_n(t) - e_n(t) for every slot."""
    return SurplusView(surplus=profile.generation - profile.demand)


def partition_users(scenario: Scenario, t: int) -> SlotPartition:
    """
    Split the participating users into surplus and deficit users at slot t.

    Users with zero surplus are deficit users, so their trade interval
    collapses to [0, 0].
    """
    if not 0 <= t < scenario.H:
        raise ValidationError(f"slot {t} outside [0, {scenario.H})", field="t", value=t)
    surplus, deficit = [], []
    for user in scenario.participants:
        s = user.generation[t] - user.demand[t]
        (surplus if s > 0 else deficit).append(user.id)
    return SlotPartition(surplus_users=tuple(surplus), deficit_users=tuple(deficit))


def _circular_bump(H: int, centre: float, width: float) -> np.ndarray:
    t = np.arange(H, dtype=float)
    d = np.abs(t - centre)
    d = np.minimum(d, H - d)
    bump = np.exp(-0.5 * (d / max(width, 1e-9)) ** 2)
    return bump / bump.sum()


def synth_demand(seed: int, spec: DemandSpec) -> np.ndarray:
    """
    Double-peak (morning + evening) household demand for one day.

    The series is non-negative and sums to ``spec.daily_total``.

    Raises:
        ValidationError: If the daily total or the shares are invalid
    """
    if spec.daily_total < 0:
        raise ValidationError(
            "daily demand total must be >= 0", field="daily_total", value=spec.daily_total
        )
    if spec.base_share < 0 or spec.morning_share < 0 or spec.base_share + spec.morning_share > 1:
        raise ValidationError(
            "base and morning shares must be non-negative and sum to at most 1",
            field="base_share",
            value=(spec.base_share, spec.morning_share),
        )
    H = spec.H
    if spec.daily_total == 0:
        return np.zeros(H)

    evening_share = 1.0 - spec.base_share - spec.morning_share
    shape = (
        spec.base_share * np.full(H, 1.0 / H)
        + spec.morning_share * _circular_bump(H, spec.morning_peak, spec.morning_width)
        + evening_share * _circular_bump(H, spec.evening_peak, spec.evening_width)
    )

    rng = np.random.default_rng(seed)
    factors = np.maximum(1.0 + spec.noise * rng.standard_normal(H), 0.0)
    noisy = shape * factors
    if noisy.sum() <= 0:
        noisy = shape
    return noisy * (spec.daily_total / noisy.sum())


def synth_pv(seed: int, spec: PvSpec) -> np.ndarray:
    """
    Daylight bell of PV energy per slot, zero outside [sunrise, sunset).

    Raises:
        ValidationError: If sunrise >= sunset or the window leaves the day
    """
    if spec.sunrise >= spec.sunset:
        raise ValidationError(
            f"sunrise {spec.sunrise} must precede sunset {spec.sunset}",
            field="sunrise",
            value=spec.sunrise,
        )
    if spec.sunrise < 0 or spec.sunset > spec.H:
        raise ValidationError(
            f"daylight window [{spec.sunrise}, {spec.sunset}) outside the day",
            field="sunset",
            value=spec.sunset,
        )
    if spec.peak_kw < 0:
        raise ValidationError("PV peak power must be >= 0", field="peak_kw", value=spec.peak_kw)

    series = np.zeros(spec.H)
    if spec.peak_kw == 0:
        return series

    daylight = np.arange(spec.sunrise, spec.sunset)
    phase = (daylight + 0.5 - spec.sunrise) / (spec.sunset - spec.sunrise)
    bell = np.sin(np.pi * phase)

    rng = np.random.default_rng(seed)
    clouds = np.clip(1.0 - spec.cloud_noise * np.abs(rng.standard_normal(daylight.size)), 0.0, 1.0)
    series[daylight] = spec.peak_kw * spec.dt * bell * clouds
    return series


def apply_forecast_noise(series, noise_variance_pct: float, seed: int) -> np.ndarray:
    """
    Perturb a series with zero-mean proportional Gaussian forecast errors.

    The relative noise scale is chosen so the mean absolute percentage error
    equals half the stated variance percentage; results are clamped at zero.

    Raises:
        ValidationError: If the variance is negative
    """
    if noise_variance_pct < 0:
        raise ValidationError(
            "noise variance must be >= 0", field="noise_variance_pct", value=noise_variance_pct
        )
    values = np.asarray(series, dtype=float)
    if noise_variance_pct == 0:
        return values.copy()
    sigma = _HALF_NORMAL_SCALE * noise_variance_pct / 200.0
    rng = np.random.default_rng(seed)
    return np.maximum(values * (1.0 + sigma * rng.standard_normal(values.shape)), 0.0)


def household_seeds(seed: int, count: int) -> np.ndarray:
    """Independent per-household generator seeds derived from one seed."""
    return np.random.SeedSequence(seed).generate_state(2 * count, dtype=np.uint32).reshape(count, 2)


def synthesize_households(seed: int, settings: CommunitySettings) -> List[Household]:
    """Demand and potential PV of every household in the community."""
    count = ConfigValidator.validate_count(settings.user_count, "user_count")
    seeds = household_seeds(seed, count)
    rng = np.random.default_rng(seed)
    totals = settings.demand.daily_total * np.maximum(
        1.0 + settings.demand_spread * rng.standard_normal(count), 0.1
    )
    households = []
    for i in range(count):
        demand_spec = dataclasses.replace(
            settings.demand, H=settings.grid.H, daily_total=float(totals[i])
        )
        pv_spec = dataclasses.replace(settings.pv, H=settings.grid.H, dt=settings.grid.dt)
        households.append(
            Household(
                id=i,
                demand=synth_demand(int(seeds[i, 0]), demand_spec),
                pv=synth_pv(int(seeds[i, 1]), pv_spec),
            )
        )
    return households


def participant_order(seed: int, count: int) -> np.ndarray:
    """Seeded order in which households join as participation grows."""
    return np.random.default_rng(seed).permutation(count)


def participant_ids(seed: int, count: int, participation: float) -> List[int]:
    """Positions of the participating households for a participation fraction."""
    participation = ConfigValidator.validate_fraction(participation)
    k = max(1, int(round(participation * count)))
    return sorted(int(i) for i in participant_order(seed, count)[:k])


def build_scenario(
    grid: TimeGrid,
    users: Sequence[UserProfile],
    ces: CesParams,
    tariff: Optional[Tariff] = None,
    tariff_settings: Optional[TariffSettings] = None,
    L_max: Optional[float] = None,
    l_P: Optional[Sequence[float]] = None,
) -> Scenario:
    """
    Assemble and validate a scenario.

    l_P defaults to the summed demand of the non-participating users; the
    tariff, when not given, is calibrated on the baseline load; L_max
    defaults to a multiple of the baseline peak.
    """
    users = list(users)
    H = grid.H
    if l_P is None:
        l_P = np.zeros(H)
        for user in users:
            if not user.participating:
                l_P = l_P + user.demand
    l_P = np.asarray(l_P, dtype=float)

    baseline = l_P.copy()
    for user in users:
        if user.participating:
            baseline = baseline + user.demand - user.generation

    if tariff is None:
        if tariff_settings is None:
            tariff_settings = CommunitySettings().tariff
        tariff = calibrate_tariff(
            (tariff_settings.reference_min, tariff_settings.reference_max),
            tariff_settings.reference_avg,
            baseline,
            grid.peak_window,
            peak_ratio=tariff_settings.peak_ratio,
            average=tariff_settings.average,
        )

    if L_max is None:
        L_max = C.DEFAULT_MAX_LOAD_FACTOR * max(float(np.max(baseline)), 1e-9)

    scenario = Scenario(grid=grid, users=users, l_P=l_P, tariff=tariff, ces=ces, L_max=float(L_max))
    return ScenarioValidator.validate_scenario(scenario)


def assemble_community(
    households: Sequence[Household],
    participation: float,
    seed: int,
    settings: CommunitySettings,
    tariff: Optional[Tariff] = None,
) -> Scenario:
    """
    Turn households into a scenario with a seeded participating subset.

    An explicit ``tariff`` skips calibration.
    """
    chosen = {households[k].id for k in participant_ids(seed, len(households), participation)}
    users = [
        UserProfile(
            id=h.id,
            demand=h.demand,
            generation=h.pv if h.id in chosen else np.zeros_like(h.pv),
            participating=h.id in chosen,
        )
        for h in households
    ]
    logger.debug(f"Community with {len(chosen)} of {len(users)} participating users")
    return build_scenario(
        settings.grid,
        users,
        settings.ces,
        tariff=tariff,
        tariff_settings=settings.tariff,
        L_max=settings.max_load,
    )


def synthesize_scenario(
    seed: int,
    participation: float,
    settings: Optional[CommunitySettings] = None,
) -> Scenario:
    """A fully synthetic community scenario from a seed and a participation fraction."""
    settings = settings or CommunitySettings()
    households = synthesize_households(seed, settings)
    return assemble_community(households, participation, seed, settings)


def with_capacity(scenario: Scenario, capacity: float) -> Scenario:
    """Same scenario with a different storage capacity and the same initial fill share."""
    capacity = ConfigValidator.validate_positive(capacity, "capacity", allow_zero=True)
    old = scenario.ces
    fraction = old.q0 / old.Q_M if old.Q_M > 0 else C.DEFAULT_INITIAL_FRACTION
    ces = dataclasses.replace(old, Q_M=capacity, q0=fraction * capacity)
    return dataclasses.replace(scenario, ces=ces)


def perturb_forecasts(scenario: Scenario, noise_variance_pct: float, seed: int) -> Scenario:
    """
    Day-ahead forecast of a scenario: participant demand and PV and the
    aggregate non-participating load carry proportional noise.

    The result is not re-validated; noisy forecasts may exceed L_max.
    """
    if noise_variance_pct == 0:
        return scenario
    seeds = household_seeds(seed, len(scenario.users) + 1)
    users = []
    for k, user in enumerate(scenario.users):
        if user.participating:
            users.append(
                UserProfile(
                    id=user.id,
                    demand=apply_forecast_noise(
                        user.demand, noise_variance_pct, int(seeds[k, 0])
                    ),
                    generation=apply_forecast_noise(
                        user.generation, noise_variance_pct, int(seeds[k, 1])
                    ),
                    participating=True,
                )
            )
        else:
            users.append(user)
    l_P = apply_forecast_noise(scenario.l_P, noise_variance_pct, int(seeds[-1, 0]))
    return dataclasses.replace(scenario, users=users, l_P=l_P)


def baseline_load(scenario: Scenario) -> np.ndarray:
    """No-CES grid load sum_n (e_n - g_n) + l_P."""
    load = scenario.l_P.copy()
    for user in scenario.participants:
        load = load + user.demand - user.generation
    return load


def describe(scenario: Scenario) -> Tuple[int, int, float]:
    """(participants, households, peak baseline load) for log lines."""
    return scenario.I, len(scenario.users), float(np.max(baseline_load(scenario)))
