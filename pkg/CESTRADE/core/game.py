"""
Per-slot non-cooperative stage game among participating users.

Given the operator's price a(t) and grid exchange l_Q(t), every participating
user picks a CES trade x_n(t) that minimizes their stage cost. The unique
interior equilibrium is x_n(t) = s_n(t) - eps(t) with a deviation eps(t)
common to all users; the operator keeps eps(t) inside the EpsilonBox so that
every user's trade stays on the side of their class.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from .. import constants as C
from ..exceptions import ConvergenceError, EquilibriumError, ValidationError
from ..models import EpsilonBox, NashSlotResult, OperatorSignal, Scenario, TradeProfile
from ..utils.logging_config import get_logger
from .scenario import partition_users

logger = get_logger("cestrade.game")

ALL_DEFICIT = "all-deficit"
ALL_SURPLUS = "all-surplus"
MIXED = "mixed"

# Absolute slack when testing eps(t) against its box; QP outputs carry solver noise.
BOX_TOL = 1e-7


def trade_interval(s: float) -> Tuple[float, float]:
    """Admissible trade range of a user with surplus s: [0, s] or [s, 0]."""
    return (0.0, s) if s > 0 else (s, 0.0)


def _slot_surplus(scenario: Scenario, t: int) -> np.ndarray:
    if not 0 <= t < scenario.H:
        raise ValidationError(f"slot {t} outside [0, {scenario.H})", field="t", value=t)
    return scenario.surplus_matrix()[:, t]


def best_response(
    n: int,
    x_others: Sequence[float],
    a: float,
    l_Q: float,
    scenario: Scenario,
    t: int,
) -> float:
    """
    Cost-minimizing trade of user ``n`` against the other users' trades.

    The stationary point s_n - [phi L_{-n} + delta - a] / (2 phi) is clipped
    to the user's class interval.

    Args:
        n: Participating user id
        x_others: Trades of the other participants, in participant order
        a: CES price at slot t
        l_Q: CES grid exchange at slot t
        scenario: Problem instance
        t: Slot index
    """
    ids = scenario.participant_ids
    k = ids.index(n)
    s = _slot_surplus(scenario, t)
    others = np.delete(s, k)
    x_others = np.asarray(x_others, dtype=float)
    if x_others.shape != others.shape:
        raise ValidationError(
            f"expected {others.size} trades of other users, got {x_others.size}",
            field="x_others",
            value=x_others.size,
        )

    phi = float(scenario.tariff.phi[t])
    delta = float(scenario.tariff.delta[t])
    L_others = float(np.sum(x_others - others)) + l_Q + float(scenario.l_P[t])

    x = s[k] - (phi * L_others + delta - a) / (2.0 * phi)
    low, high = trade_interval(float(s[k]))
    return float(min(max(x, low), high))


def epsilon_coefficients(scenario: Scenario, t: int) -> Tuple[float, float, float]:
    """
    (c_a, c_l, c_0) with eps(t) = c_a a(t) + c_l l_Q(t) + c_0.

    From eps = -[(a - delta)/phi - l_P - l_Q] / (I + 1).
    """
    I = scenario.I
    phi = float(scenario.tariff.phi[t])
    delta = float(scenario.tariff.delta[t])
    return (
        -1.0 / ((I + 1) * phi),
        1.0 / (I + 1),
        (delta / phi + float(scenario.l_P[t])) / (I + 1),
    )


def equilibrium_deviation(scenario: Scenario, a, l_Q) -> np.ndarray:
    """eps(t) for every slot, without box checks."""
    phi, delta = scenario.tariff.phi, scenario.tariff.delta
    a = np.asarray(a, dtype=float)
    l_Q = np.asarray(l_Q, dtype=float)
    return -((a - delta) / phi - scenario.l_P - l_Q) / (scenario.I + 1)


def epsilon_box(scenario: Scenario, t: int) -> EpsilonBox:
    """
    Range of eps(t) that keeps every user on their class side.

    All-deficit slots allow [max s, 0], all-surplus slots [0, min s] and mixed
    slots only eps = 0.
    """
    partition = partition_users(scenario, t)
    s = _slot_surplus(scenario, t)
    if not partition.surplus_users:
        return EpsilonBox(lower=float(np.max(s)), upper=0.0, case=ALL_DEFICIT)
    if not partition.deficit_users:
        return EpsilonBox(lower=0.0, upper=float(np.min(s)), case=ALL_SURPLUS)
    return EpsilonBox(lower=0.0, upper=0.0, case=MIXED)


def epsilon_boxes(scenario: Scenario) -> list:
    """EpsilonBox of every slot."""
    return [epsilon_box(scenario, t) for t in range(scenario.H)]


def nash_closed_form(
    scenario: Scenario,
    a_t: float,
    l_Q_t: float,
    t: int,
    tol: float = BOX_TOL,
) -> NashSlotResult:
    """
    Closed-form stage-game equilibrium at slot t.

    Raises:
        EquilibriumError: If eps(t) falls outside the slot's EpsilonBox
    """
    c_a, c_l, c_0 = epsilon_coefficients(scenario, t)
    epsilon = c_a * a_t + c_l * l_Q_t + c_0
    box = epsilon_box(scenario, t)
    if not box.contains(epsilon, tol):
        raise EquilibriumError(
            f"slot {t}: eps={epsilon:.6g} outside [{box.lower:.6g}, {box.upper:.6g}] "
            f"({box.case})",
            slot=t,
            case=box.case,
            epsilon=epsilon,
            box=(box.lower, box.upper),
        )
    s = _slot_surplus(scenario, t)
    return NashSlotResult(x_star=s - epsilon, epsilon=float(epsilon))


def nash_oracle_ibr(
    scenario: Scenario,
    a_t: float,
    l_Q_t: float,
    t: int,
    tol: float = C.IBR_TOL,
    max_iter: Optional[int] = None,
) -> NashSlotResult:
    """
    Stage-game equilibrium by round-robin clipped best responses.

    Users update in participant order starting from x = 0. One iteration is a
    full sweep; the loop stops once no user moved by more than ``tol``.

    Raises:
        ConvergenceError: After ``max_iter`` sweeps (default 10 * I)
    """
    s = _slot_surplus(scenario, t)
    I = s.size
    if max_iter is None:
        max_iter = C.IBR_ITER_FACTOR * I

    phi = float(scenario.tariff.phi[t])
    delta = float(scenario.tariff.delta[t])
    base = l_Q_t + float(scenario.l_P[t])
    lows = np.minimum(s, 0.0)
    highs = np.where(s > 0, s, 0.0)

    x = np.zeros(I)
    total = float(np.sum(x - s))
    for sweep in range(1, max_iter + 1):
        change = 0.0
        for k in range(I):
            L_others = total - (x[k] - s[k]) + base
            new = s[k] - (phi * L_others + delta - a_t) / (2.0 * phi)
            new = min(max(new, lows[k]), highs[k])
            change = max(change, abs(new - x[k]))
            total += new - x[k]
            x[k] = new
        if change <= tol:
            logger.debug(f"IBR converged at slot {t} after {sweep} sweep(s)")
            return NashSlotResult(x_star=x.copy(), epsilon=float(np.mean(s - x)))

    raise ConvergenceError(
        f"best-response iteration at slot {t} did not settle within {max_iter} sweeps",
        iterations=max_iter,
        last_iterate=x.copy(),
    )


def repeated_game(scenario: Scenario, signal: OperatorSignal, tol: float = BOX_TOL) -> TradeProfile:
    """
    Equilibrium trades of every user over the whole horizon.

    Slots decouple given the signal, so this stacks the per-slot equilibria.

    Raises:
        EquilibriumError: For the first slot whose eps(t) leaves its box
    """
    if signal.a.size != scenario.H:
        raise ValidationError(
            f"signal has {signal.a.size} slots, scenario has {scenario.H}",
            field="signal",
            value=signal.a.size,
        )
    l_Q = signal.l_Q
    x = np.empty((scenario.I, scenario.H))
    for t in range(scenario.H):
        x[:, t] = nash_closed_form(scenario, float(signal.a[t]), float(l_Q[t]), t, tol).x_star
    return TradeProfile(x=x, user_ids=tuple(scenario.participant_ids))


def price_for_deviation(scenario: Scenario, epsilon, l_Q) -> np.ndarray:
    """The a(t) that produces a given eps(t) at a given l_Q(t)."""
    phi, delta = scenario.tariff.phi, scenario.tariff.delta
    epsilon = np.asarray(epsilon, dtype=float)
    l_Q = np.asarray(l_Q, dtype=float)
    return delta + phi * (scenario.l_P + l_Q - (scenario.I + 1) * epsilon)
