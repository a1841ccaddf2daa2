"""
Grid price model, tariff calibration, user costs and CES revenue.

The grid price at slot t is p(t) = phi_t * L(t) + delta_t where
L(t) = sum_n l_n(t) + l_Q(t) + l_P(t) and l_n(t) = x_n(t) + e_n(t) - g_n(t).
A user's cost is C_n(t) = p(t) l_n(t) - a(t) x_n(t); the CES revenue is
R = sum_t (-a(t) sum_n x_n(t) - p(t) l_Q(t)).
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..constants import PEAK_PHI_RATIO
from ..exceptions import CalibrationError
from ..models import (
    ChargeTrajectory,
    CostBreakdown,
    OperatorSignal,
    OutcomeReport,
    RoundRecord,
    Scenario,
    StageCostCoefficients,
    Tariff,
    TradeProfile,
)
from ..utils.logging_config import get_logger

logger = get_logger("cestrade.pricing")


@dataclass(frozen=True)
class TariffSettings:
    """Reference time-of-use prices the quadratic tariff is calibrated to."""

    reference_min: float
    reference_max: float
    reference_avg: float
    peak_ratio: float = PEAK_PHI_RATIO
    average: str = "time"  # "time" or "load" weighted mean


def _trade_matrix(scenario: Scenario, trades: Optional[TradeProfile]) -> np.ndarray:
    if trades is None:
        return np.zeros((scenario.I, scenario.H))
    return trades.x


def participant_grid_loads(
    scenario: Scenario, trades: Optional[TradeProfile]
) -> np.ndarray:
    """I x H matrix of participant grid loads l_n(t) = x_n(t) - s_n(t)."""
    return _trade_matrix(scenario, trades) - scenario.surplus_matrix()


def grid_load_series(
    scenario: Scenario, trades: Optional[TradeProfile], l_Q
) -> np.ndarray:
    """L(t) for every slot, without range diagnostics."""
    l_Q = np.zeros(scenario.H) if l_Q is None else np.asarray(l_Q, dtype=float)
    return participant_grid_loads(scenario, trades).sum(axis=0) + l_Q + scenario.l_P


def check_grid_load(scenario: Scenario, load: np.ndarray, context: str = "") -> List[int]:
    """Log a warning for slots with L(t) <= 0 or L(t) >= L_max; return those slots."""
    load = np.atleast_1d(load)
    bad = np.flatnonzero((load <= 0) | (load >= scenario.L_max))
    if bad.size:
        prefix = f"{context}: " if context else ""
        logger.warning(
            f"{prefix}grid load outside (0, L_max={scenario.L_max:.4g}) at "
            f"{bad.size} slot(s), first slot {int(bad[0])} with L={load[bad[0]]:.6g}"
        )
    return [int(t) for t in bad]


def total_grid_load(
    scenario: Scenario,
    trades: Optional[TradeProfile],
    l_Q,
    t: Optional[int] = None,
):
    """
    Total grid load L(t) = sum_n l_n(t) + l_Q(t) + l_P(t).

    Args:
        scenario: Problem instance
        trades: Participant trades (None means no trades)
        l_Q: CES grid exchange per slot (None means zero)
        t: Slot index; None returns the whole series

    Returns:
        L(t) as a float, or the length-H series
    """
    load = grid_load_series(scenario, trades, l_Q)
    if t is None:
        check_grid_load(scenario, load)
        return load
    check_grid_load(scenario, load[t : t + 1], context=f"slot {t}")
    return float(load[t])


def grid_price(L, tariff: Tariff, t: Optional[int] = None):
    """p(t) = phi_t * L + delta_t for one slot, or element-wise over a series."""
    if t is None:
        return tariff.phi * np.asarray(L, dtype=float) + tariff.delta
    return float(tariff.phi[t] * L + tariff.delta[t])


def calibrate_tariff(
    reference_price_range: Tuple[float, float],
    reference_avg: float,
    baseline_load: Sequence[float],
    peak_window: Tuple[int, int],
    peak_ratio: float = PEAK_PHI_RATIO,
    average: str = "time",
) -> Tariff:
    """
    Calibrate (phi, delta) to a reference price range and average.

    phi is phi_off outside the peak window and peak_ratio * phi_off inside it;
    delta is constant. phi_off is fixed by matching the spread of p(t) over the
    baseline load to the reference spread, delta by matching the mean price.

    Args:
        reference_price_range: (min, max) reference price, cents/kWh
        reference_avg: reference average price, cents/kWh
        baseline_load: predicted no-CES grid load per slot, kWh
        peak_window: half-open peak slot range
        peak_ratio: phi_peak / phi_off
        average: "time" for the plain time average, "load" for load-weighted

    Returns:
        Calibrated tariff

    Raises:
        CalibrationError: naming the constraint that cannot be met
    """
    low, high = (float(v) for v in reference_price_range)
    load = np.asarray(baseline_load, dtype=float)

    if not high > low:
        raise CalibrationError(
            f"reference range ({low}, {high}) must have max > min", constraint="range"
        )
    if load.size == 0 or np.any(load <= 0):
        raise CalibrationError(
            "baseline load must be strictly positive on every slot",
            constraint="baseline_load",
        )
    if np.ptp(load) == 0:
        raise CalibrationError(
            "constant baseline load gives no price spread to match",
            constraint="range",
        )
    if average not in ("time", "load"):
        raise CalibrationError(f"unknown average mode '{average}'", constraint="average")

    weight = np.ones_like(load)
    start, stop = peak_window
    weight[start:stop] = peak_ratio
    scaled = weight * load

    spread = float(np.ptp(scaled))
    if spread <= 0:
        raise CalibrationError(
            "baseline load and peak window give no price spread to match",
            constraint="range",
        )
    phi_off = (high - low) / spread

    if average == "time":
        mean_scaled = float(np.mean(scaled))
    else:
        mean_scaled = float(np.sum(scaled * load) / np.sum(load))
    delta = reference_avg - phi_off * mean_scaled

    if delta < 0:
        raise CalibrationError(
            f"matching the average {reference_avg} needs delta = {delta:.6g} < 0",
            constraint="average",
        )

    logger.debug(f"Calibrated tariff: phi_off={phi_off:.6g}, delta={delta:.6g}")
    return Tariff(phi=phi_off * weight, delta=np.full_like(load, delta))


def stage_cost_coefficients(
    user_id: int, others_load: float, a: float, scenario: Scenario, t: int
) -> StageCostCoefficients:
    """
    Coefficients of C_n(t) as a quadratic in the user's own grid load l_n(t).

    Args:
        user_id: Participating user id
        others_load: L_{-n}(t), the grid load of everyone except user n
        a: CES unit price at slot t
        scenario: Problem instance
        t: Slot index
    """
    user = scenario.user(user_id)
    s = float(user.generation[t] - user.demand[t])
    phi = float(scenario.tariff.phi[t])
    delta = float(scenario.tariff.delta[t])
    return StageCostCoefficients(K2=phi, K1=phi * others_load + delta - a, K0=-a * s)


def user_cost(
    user_id: int,
    trades: Optional[TradeProfile],
    signal: Optional[OperatorSignal],
    scenario: Scenario,
    t: int,
    centralized: bool = False,
) -> float:
    """
    C_n(t) = p(t) l_n(t) - a(t) x_n(t) for one user at one slot.

    Non-participating users have x_n = 0. In centralized mode the CES term
    is dropped.
    """
    l_Q = None if signal is None else signal.l_Q
    load = grid_load_series(scenario, trades, l_Q)
    price = grid_price(load[t], scenario.tariff, t)

    user = scenario.user(user_id)
    x = 0.0
    if user.participating and trades is not None:
        x = float(trades.x[scenario.participant_ids.index(user_id), t])
    l_n = x + float(user.demand[t] - user.generation[t])

    ces = 0.0
    if not centralized and signal is not None:
        ces = -float(signal.a[t]) * x
    return price * l_n + ces


def cost_breakdowns(
    scenario: Scenario,
    trades: Optional[TradeProfile],
    signal: Optional[OperatorSignal],
    prices: np.ndarray,
    centralized: bool = False,
) -> List[CostBreakdown]:
    """Per-slot cost breakdown of every user in the community."""
    x = _trade_matrix(scenario, trades)
    index = {uid: k for k, uid in enumerate(scenario.participant_ids)}
    a = np.zeros(scenario.H) if signal is None or centralized else signal.a

    costs = []
    for user in scenario.users:
        if user.participating:
            x_n = x[index[user.id]]
        else:
            x_n = np.zeros(scenario.H)
        l_n = x_n + user.demand - user.generation
        costs.append(
            CostBreakdown(
                user_id=user.id,
                grid_component=prices * l_n,
                ces_component=-a * x_n,
            )
        )
    return costs


def ces_revenue(
    trades: Optional[TradeProfile], signal: OperatorSignal, prices
) -> float:
    """R = sum_t (-a(t) sum_n x_n(t) - p(t) l_Q(t))."""
    prices = np.asarray(prices, dtype=float)
    aggregate = np.zeros_like(prices) if trades is None else trades.aggregate
    return float(np.sum(-signal.a * aggregate - prices * signal.l_Q))


def background_load(scenario: Scenario) -> np.ndarray:
    """Part of l_P not carried by listed non-participating users."""
    listed = np.zeros(scenario.H)
    for user in scenario.non_participants:
        listed = listed + user.demand
    return scenario.l_P - listed


def evaluate_outcome(
    scenario: Scenario,
    model: str,
    signal: OperatorSignal,
    trades: TradeProfile,
    trajectory: ChargeTrajectory,
    centralized: bool = False,
    iterations: Optional[List[RoundRecord]] = None,
    converged: bool = True,
    diagnostics: Optional[List[str]] = None,
) -> OutcomeReport:
    """
    Evaluate loads, prices, user costs and revenue of a model outcome.

    In centralized mode the CES price is taken as zero: user costs carry no
    CES term and the reported revenue is -sum_t p(t) l_Q(t).
    """
    load = grid_load_series(scenario, trades, signal.l_Q)
    diagnostics = list(diagnostics or [])
    bad = check_grid_load(scenario, load, context=model)
    if bad:
        diagnostics.append(f"grid load outside (0, L_max) at slots {bad}")

    prices = grid_price(load, scenario.tariff)
    if centralized:
        revenue_signal = OperatorSignal(
            a=np.zeros(scenario.H), l_Q_plus=signal.l_Q_plus, l_Q_minus=signal.l_Q_minus
        )
    else:
        revenue_signal = signal

    return OutcomeReport(
        model=model,
        signal=signal,
        trades=trades,
        trajectory=trajectory,
        grid_load=load,
        prices=prices,
        user_costs=cost_breakdowns(scenario, trades, signal, prices, centralized),
        revenue=ces_revenue(trades, revenue_signal, prices),
        iterations=list(iterations or []),
        converged=converged,
        diagnostics=diagnostics,
    )


def baseline_outcome(scenario: Scenario) -> OutcomeReport:
    """
    The no-CES system: every user trades only with the grid.

    Surplus PV is sold to the grid automatically because l_n = e_n - g_n may
    be negative.
    """
    H = scenario.H
    zeros = np.zeros(H)
    signal = OperatorSignal(a=zeros, l_Q_plus=zeros, l_Q_minus=zeros)
    trades = TradeProfile(np.zeros((scenario.I, H)), tuple(scenario.participant_ids))
    trajectory = ChargeTrajectory(q=np.zeros(H + 1), capacity_ok=True, continuity_residual=0.0)
    return evaluate_outcome(scenario, "baseline", signal, trades, trajectory, centralized=True)
