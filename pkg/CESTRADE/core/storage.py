"""
CES charge dynamics with leakage and conversion losses.

q(t) = alpha q(t-1) + beta_plus chi_plus(t) - beta_minus chi_minus(t), with the
vector form q = q0 eta + Psi (beta_plus chi_plus - beta_minus chi_minus) used
to build the capacity envelope rows of the operator QPs.
"""

from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

from .. import constants as C
from ..models import CapacityOperators, ChargeTrajectory, CesParams, FeasibilityVerdict, FlowSplit
from ..utils.logging_config import get_logger

logger = get_logger("cestrade.storage")


def step_charge(q_prev: float, chi_plus: float, chi_minus: float, params: CesParams) -> float:
    """One step of the charge recurrence."""
    return params.alpha * q_prev + params.beta_plus * chi_plus - params.beta_minus * chi_minus


def _capacity_ok(q: np.ndarray, params: CesParams) -> bool:
    tol = C.CAPACITY_TOL_FACTOR * max(params.Q_M, 1.0)
    return bool(np.all(q >= -tol) and np.all(q <= params.Q_M + tol))


def charge_trajectory(q0: float, flows: FlowSplit, params: CesParams) -> ChargeTrajectory:
    """
    Iterate the charge recurrence from q0.

    Args:
        q0: Initial charge, kWh
        flows: Charging and discharging flows per slot
        params: Storage parameters

    Returns:
        Trajectory q(0..H) with its capacity verdict and continuity residual
    """
    chi_plus = np.asarray(flows.chi_plus, dtype=float)
    chi_minus = np.asarray(flows.chi_minus, dtype=float)
    q = np.empty(chi_plus.size + 1)
    q[0] = q0
    for t in range(chi_plus.size):
        q[t + 1] = step_charge(q[t], chi_plus[t], chi_minus[t], params)
    return ChargeTrajectory(
        q=q,
        capacity_ok=_capacity_ok(q[1:], params),
        continuity_residual=float(abs(q[-1] - q[0])),
    )


@lru_cache(maxsize=32)
def _operators(alpha: float, H: int) -> Tuple[np.ndarray, np.ndarray]:
    v = np.arange(1, H + 1, dtype=float)
    eta = alpha ** v
    diff = np.subtract.outer(np.arange(H), np.arange(H)).astype(float)
    psi = np.where(diff >= 0, alpha ** np.maximum(diff, 0.0), 0.0)
    eta.setflags(write=False)
    psi.setflags(write=False)
    return eta, psi


def capacity_operators(params: CesParams, H: int) -> CapacityOperators:
    """
    eta and Psi of the vector form:
    q(v) = q0 eta_v + (Psi (beta_plus chi_plus - beta_minus chi_minus))_v.

    The matrices are cached per (alpha, H) and shared read-only.
    """
    if H < 1:
        raise ValueError(f"H must be >= 1, got {H}")
    eta, psi = _operators(float(params.alpha), int(H))
    return CapacityOperators(eta=eta, psi=psi, beta_vec=(params.beta_plus, params.beta_minus))


def charge_closed_form(q0: float, flows: FlowSplit, params: CesParams) -> np.ndarray:
    """q(1..H) from the vector form."""
    ops = capacity_operators(params, len(flows.chi_plus))
    net = params.beta_plus * np.asarray(flows.chi_plus)
    net = net - params.beta_minus * np.asarray(flows.chi_minus)
    return q0 * ops.eta + ops.psi @ net


def check_feasible(
    traj: ChargeTrajectory,
    params: CesParams,
    tol: float = C.CONTINUITY_TOL,
) -> FeasibilityVerdict:
    """
    Check a trajectory against 0 <= q(t) <= Q_M and q(H) = q(0).

    Capacity uses a relative tolerance of CAPACITY_TOL_FACTOR * Q_M;
    continuity uses ``tol`` in kWh. Violations are listed as (slot, magnitude).
    """
    q = np.asarray(traj.q, dtype=float)
    cap_tol = C.CAPACITY_TOL_FACTOR * max(params.Q_M, 1.0)
    violations: List[Tuple[int, float]] = []
    for t, value in enumerate(q):
        if value > params.Q_M + cap_tol:
            violations.append((t, float(value - params.Q_M)))
        elif value < -cap_tol:
            violations.append((t, float(-value)))

    residual = float(abs(q[-1] - q[0]))
    verdict = FeasibilityVerdict(
        capacity_ok=not violations,
        continuity_ok=residual <= tol,
        continuity_residual=residual,
        capacity_violations=violations,
    )
    if not verdict.feasible:
        logger.warning(
            f"Charge trajectory infeasible: {len(violations)} capacity violation(s), "
            f"continuity residual {residual:.3g} kWh"
        )
    return verdict


def split_signed(series) -> FlowSplit:
    """Split a signed series into non-negative plus and minus parts."""
    values = np.asarray(series, dtype=float)
    return FlowSplit(chi_plus=np.maximum(values, 0.0), chi_minus=np.maximum(-values, 0.0))


def complementarity_violation(plus, minus) -> float:
    """Largest min(plus, minus) over slots; zero when no slot has both sides active."""
    plus = np.asarray(plus, dtype=float)
    minus = np.asarray(minus, dtype=float)
    if plus.size == 0:
        return 0.0
    return float(np.max(np.minimum(plus, minus)))


def check_complementarity(
    plus, minus, label: str, tol: float = C.COMPLEMENTARITY_TOL
) -> Optional[str]:
    """Log and describe a charge/discharge complementarity violation, if any."""
    worst = complementarity_violation(plus, minus)
    if worst <= tol:
        return None
    message = f"{label}: simultaneous charge and discharge of {worst:.3g} kWh"
    logger.warning(message)
    return message


def ces_flows(user_x: np.ndarray, l_Q_plus, l_Q_minus) -> FlowSplit:
    """
    chi_plus and chi_minus from signed user trades and the CES grid exchange.

    Users selling (x > 0) charge the store, users buying (x < 0) discharge it.
    """
    x = np.atleast_2d(np.asarray(user_x, dtype=float))
    return FlowSplit(
        chi_plus=np.maximum(x, 0.0).sum(axis=0) + np.asarray(l_Q_plus, dtype=float),
        chi_minus=np.maximum(-x, 0.0).sum(axis=0) + np.asarray(l_Q_minus, dtype=float),
    )
