"""
CES operator models.

* centralized: the operator schedules every trade to minimize the community's
  grid payment; no CES price.
* benevolent: the operator prices energy at the grid price so users trade
  their whole surplus, and picks the grid exchange l_Q to maximize revenue.
* competitive: a Stackelberg game where the operator picks (a, l_Q) to
  maximize revenue anticipating the users' Nash response, solved by the
  leader/follower iteration or directly.

All models are concave maximizations (or convex minimizations) posed as QPs
over per-slot variables and the storage envelope of the charge recurrence.
"""

import dataclasses
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .. import constants as C
from ..exceptions import ConvergenceError, SolverError, ValidationError
from ..models import (
    BenevolentObjectiveCoefficients,
    CesParams,
    CompetitiveObjectiveCoefficients,
    OperatorSignal,
    OutcomeReport,
    ParetoVerdict,
    RoundRecord,
    Scenario,
    StackelbergOutcome,
    TradeProfile,
)
from ..utils.logging_config import get_logger
from . import pricing, storage
from .game import (
    ALL_DEFICIT,
    ALL_SURPLUS,
    epsilon_box,
    epsilon_coefficients,
    equilibrium_deviation,
    price_for_deviation,
    repeated_game,
)
from .qpsolve import QpProblem, solve_qp

logger = get_logger("cestrade.operators")

COMPETITIVE = "competitive"
BENEVOLENT = "benevolent"
CENTRALIZED = "centralized"
BASELINE = "baseline"

ANTICIPATED = "anticipated"
FIXED = "fixed"
RESPONSE_MODES = (ANTICIPATED, FIXED)


@dataclass(eq=False)
class UserFlows:
    """
    Users' storage flows per slot as affine functions of eps(t):
    U_plus = plus_const + plus_eps * eps and likewise for U_minus.
    """

    plus_const: np.ndarray
    plus_eps: np.ndarray
    minus_const: np.ndarray
    minus_eps: np.ndarray

    @classmethod
    def constant(cls, plus, minus) -> "UserFlows":
        plus = np.asarray(plus, dtype=float)
        minus = np.asarray(minus, dtype=float)
        return cls(plus, np.zeros_like(plus), minus, np.zeros_like(minus))


def class_totals(scenario: Scenario) -> Tuple[np.ndarray, np.ndarray]:
    """Per-slot total surplus of surplus users and total deficit of deficit users, both >= 0."""
    s = scenario.surplus_matrix()
    return np.where(s > 0, s, 0.0).sum(axis=0), np.where(s > 0, 0.0, -s).sum(axis=0)


def equilibrium_flows(scenario: Scenario) -> UserFlows:
    """
    Exact user flows at the Nash response, valid while eps(t) is in its box.

    All-deficit slots: U_minus = I eps - S. All-surplus slots: U_plus = S - I eps.
    Mixed slots have eps = 0 and constant flows.
    """
    H, I = scenario.H, scenario.I
    total = scenario.surplus_matrix().sum(axis=0)
    surplus, deficit = class_totals(scenario)
    flows = UserFlows.constant(surplus, deficit)
    for t in range(H):
        case = epsilon_box(scenario, t).case
        if case == ALL_DEFICIT:
            flows.minus_const[t], flows.minus_eps[t] = -total[t], float(I)
        elif case == ALL_SURPLUS:
            flows.plus_const[t], flows.plus_eps[t] = total[t], -float(I)
    return flows


def anchored_flows(scenario: Scenario, trades: TradeProfile, response: str) -> UserFlows:
    """
    User flows anchored on given trades.

    ``fixed`` freezes them; ``anticipated`` adds the equilibrium sensitivity to
    eps(t) around the trades' own deviation.
    """
    plus = trades.plus.sum(axis=0)
    minus = trades.minus.sum(axis=0)
    if response == FIXED:
        return UserFlows.constant(plus, minus)
    if response != ANTICIPATED:
        raise ValidationError(
            f"unknown response mode '{response}'", field="response", value=response
        )
    exact = equilibrium_flows(scenario)
    eps_prev = np.mean(scenario.surplus_matrix() - trades.x, axis=0)
    return UserFlows(
        plus_const=plus - exact.plus_eps * eps_prev,
        plus_eps=exact.plus_eps,
        minus_const=minus - exact.minus_eps * eps_prev,
        minus_eps=exact.minus_eps,
    )


def competitive_coefficients(scenario: Scenario, t: int) -> CompetitiveObjectiveCoefficients:
    """Revenue at slot t as lambda a^2 + mu a + nu l_Q^2 + xi l_Q at the Nash response."""
    I = scenario.I
    phi = float(scenario.tariff.phi[t])
    delta = float(scenario.tariff.delta[t])
    l_P = float(scenario.l_P[t])
    S = float(scenario.surplus_matrix()[:, t].sum())
    return CompetitiveObjectiveCoefficients(
        lambda_t=-I / ((I + 1) * phi),
        mu_t=I / (I + 1) * (l_P + delta / phi) - S,
        nu_t=-phi / (I + 1),
        xi_t=-(phi * l_P + delta) / (I + 1),
    )


def benevolent_coefficients(scenario: Scenario, t: int) -> BenevolentObjectiveCoefficients:
    """Revenue at slot t as gamma1 l_Q^2 + gamma2 l_Q + gamma3 when a(t) equals the grid price."""
    phi = float(scenario.tariff.phi[t])
    delta = float(scenario.tariff.delta[t])
    l_P = float(scenario.l_P[t])
    S = float(scenario.surplus_matrix()[:, t].sum())
    return BenevolentObjectiveCoefficients(
        gamma1=-phi,
        gamma2=-delta - phi * (l_P + S),
        gamma3=-S * (delta + phi * l_P),
    )


def leader_objective(scenario: Scenario, signal: OperatorSignal) -> float:
    """Total revenue of a signal in coefficient form."""
    l_Q = signal.l_Q
    return float(
        sum(
            competitive_coefficients(scenario, t).evaluate(float(signal.a[t]), float(l_Q[t]))
            for t in range(scenario.H)
        )
    )


def _storage_rows(scenario: Scenario, N: np.ndarray, n0: np.ndarray):
    """
    Capacity and continuity rows for a net storage input n = N u + n0.

    Returns (A_in, b_in, in_labels, A_eq, b_eq, eq_labels). The capacity rows
    sit CAPACITY_MARGIN * Q_M inside [0, Q_M]. With zero capacity the charge
    is pinned to zero on every slot.
    """
    params = scenario.ces
    H = scenario.H
    ops = storage.capacity_operators(params, H)
    M = ops.psi @ N
    base = params.q0 * ops.eta + ops.psi @ n0

    if params.Q_M <= 0:
        labels = [f"q({t + 1}) = 0" for t in range(H)]
        return np.zeros((0, N.shape[1])), np.zeros(0), [], M, -base, labels

    inner = slice(0, H - 1)
    margin = C.CAPACITY_MARGIN * params.Q_M
    A_in = np.vstack([M[inner], -M[inner]])
    b_in = np.concatenate([params.Q_M - margin - base[inner], base[inner] - margin])
    in_labels = [f"q({t + 1}) <= Q_M" for t in range(H - 1)] + [
        f"q({t + 1}) >= 0" for t in range(H - 1)
    ]
    A_eq = M[H - 1 : H]
    b_eq = np.array([params.q0 - base[H - 1]])
    return A_in, b_in, in_labels, A_eq, b_eq, ["q(H) = q(0)"]


def _leader_problem(
    scenario: Scenario,
    flows: UserFlows,
    pin_grid_price: bool = False,
    start: bool = False,
) -> QpProblem:
    """
    QP over u = [a; l_Q_plus; l_Q_minus] for the competitive leader.

    With ``start`` the objective instead keeps a(t) close to the grid price
    with l_Q fixed at zero.
    """
    H = scenario.H
    n = 3 * H
    ia, ip, im = np.arange(H), np.arange(H, 2 * H), np.arange(2 * H, 3 * H)
    beta_plus, beta_minus = scenario.ces.beta_plus, scenario.ces.beta_minus

    # eps(t) = c_a a + c_l (l+ - l-) + c_0
    eps_row = np.zeros((H, n))
    eps_const = np.zeros(H)
    for t in range(H):
        c_a, c_l, c_0 = epsilon_coefficients(scenario, t)
        eps_row[t, ia[t]], eps_row[t, ip[t]], eps_row[t, im[t]] = c_a, c_l, -c_l
        eps_const[t] = c_0

    k = beta_plus * flows.plus_eps - beta_minus * flows.minus_eps
    N = k[:, None] * eps_row
    N[np.arange(H), ip] += beta_plus
    N[np.arange(H), im] -= beta_minus
    n0 = beta_plus * flows.plus_const - beta_minus * flows.minus_const + k * eps_const

    A_in, b_in, in_labels, A_eq, b_eq, eq_labels = _storage_rows(scenario, N, n0)
    A_in, b_in, A_eq, b_eq = list(A_in), list(b_in), list(A_eq), list(b_eq)

    for t in range(H):
        box = epsilon_box(scenario, t)
        if pin_grid_price or box.lower == box.upper:
            value = 0.0 if pin_grid_price else box.lower
            A_eq.append(eps_row[t])
            b_eq.append(value - eps_const[t])
            eq_labels.append(f"eps({t}) = {value:.6g} ({box.case})")
        else:
            A_in.append(eps_row[t])
            b_in.append(box.upper - eps_const[t])
            in_labels.append(f"eps({t}) <= {box.upper:.6g} ({box.case})")
            A_in.append(-eps_row[t])
            b_in.append(eps_const[t] - box.lower)
            in_labels.append(f"eps({t}) >= {box.lower:.6g} ({box.case})")

    lo = np.concatenate([np.full(H, -np.inf), np.zeros(2 * H)])
    hi = np.concatenate([np.full(H, np.inf), np.full(2 * H, 0.0 if start else np.inf)])
    labels = [f"a({t})" for t in range(H)] + [f"l_Q+({t})" for t in range(H)] + [
        f"l_Q-({t})" for t in range(H)
    ]
    system = dict(
        A_eq=np.array(A_eq).reshape(-1, n),
        b_eq=np.array(b_eq),
        A_in=np.array(A_in).reshape(-1, n),
        b_in=np.array(b_in),
        lo=lo,
        hi=hi,
        var_labels=labels,
        eq_labels=eq_labels,
        in_labels=in_labels,
    )

    if start:
        reference = price_for_deviation(scenario, np.zeros(H), np.zeros(H))
        Q = np.zeros((n, n))
        Q[ia, ia] = 2.0
        c = np.zeros(n)
        c[ia] = -2.0 * reference
        return QpProblem(Q=Q, c=c, offset=float(reference @ reference), **system)

    P = np.zeros((n, n))
    q = np.zeros(n)
    for t in range(H):
        coef = competitive_coefficients(scenario, t)
        P[ia[t], ia[t]] = 2.0 * coef.lambda_t
        P[ip[t], ip[t]] = P[im[t], im[t]] = 2.0 * coef.nu_t
        P[ip[t], im[t]] = P[im[t], ip[t]] = -2.0 * coef.nu_t
        q[ia[t]] = coef.mu_t
        q[ip[t]], q[im[t]] = coef.xi_t, -coef.xi_t
    return QpProblem.maximize(P, q, **system)


def _signal_from(u: np.ndarray, H: int) -> OperatorSignal:
    return OperatorSignal(
        a=u[:H],
        l_Q_plus=np.maximum(u[H : 2 * H], 0.0),
        l_Q_minus=np.maximum(u[2 * H :], 0.0),
    )


def competitive_leader_qp(
    scenario: Scenario,
    trades_for_constraints: TradeProfile,
    response: str = ANTICIPATED,
    tol: float = C.QP_TOL,
    max_iter: int = C.QP_MAX_ITER,
) -> OperatorSignal:
    """
    The leader's revenue-maximizing signal given the users' previous trades.

    The EpsilonBox of every slot is imposed as linear rows on (a, l_Q). The
    user-flow terms of the storage envelope are anchored on
    ``trades_for_constraints``: frozen (``fixed``) or with their exact
    response to the new signal (``anticipated``).

    Raises:
        InfeasibleProblemError: With the binding rows when no signal fits the storage
        SolverError: If the QP does not reach optimality
    """
    flows = anchored_flows(scenario, trades_for_constraints, response)
    problem = _leader_problem(scenario, flows)
    solution = solve_qp(problem, tol=tol, max_iter=max_iter)
    solution.require_optimal("competitive leader QP")
    return _signal_from(solution.x, scenario.H)


def competitive_direct_solve(
    scenario: Scenario,
    tol: float = C.QP_TOL,
    max_iter: int = C.QP_MAX_ITER,
    pin_grid_price: bool = False,
) -> StackelbergOutcome:
    """
    Backward-induction optimum of the competitive leader in one QP.

    With ``pin_grid_price`` every slot is forced to eps(t) = 0, which is the
    benevolent operator's price rule.
    """
    problem = _leader_problem(scenario, equilibrium_flows(scenario), pin_grid_price=pin_grid_price)
    solution = solve_qp(problem, tol=tol, max_iter=max_iter)
    solution.require_optimal("competitive direct QP")
    signal = _signal_from(solution.x, scenario.H)
    return build_outcome(scenario, COMPETITIVE, signal, repeated_game(scenario, signal))


def feasible_start(
    scenario: Scenario, tol: float = C.QP_TOL, max_iter: int = C.QP_MAX_ITER
) -> OperatorSignal:
    """
    First-round signal with l_Q = 0 and a(t) as close to the grid price as the
    storage allows for the users' responses. Falls back to the benevolent
    signal when no such price exists.
    """
    problem = _leader_problem(scenario, equilibrium_flows(scenario), start=True)
    solution = solve_qp(problem, tol=tol, max_iter=max_iter)
    if solution.optimal:
        return _signal_from(solution.x, scenario.H)
    logger.warning(
        "No zero-exchange price keeps the storage feasible; starting from the benevolent signal"
    )
    return benevolent_solve(scenario, tol=tol, max_iter=max_iter).signal


def _relative_change(new: OperatorSignal, old: OperatorSignal) -> float:
    v_new, v_old = new.vector(), old.vector()
    return float(np.linalg.norm(v_new - v_old) / max(np.linalg.norm(v_new), 1e-12))


def stackelberg_iteration(
    scenario: Scenario,
    tau: float = C.DEFAULT_TAU,
    max_rounds: int = C.DEFAULT_MAX_ROUNDS,
    response: str = ANTICIPATED,
    tol: float = C.QP_TOL,
    max_iter: int = C.QP_MAX_ITER,
    check_direct: bool = True,
) -> StackelbergOutcome:
    """
    Leader/follower iteration for the competitive Stackelberg equilibrium.

    Round 1 plays the feasible start; every later round the leader re-solves
    its QP against the users' previous trades and the users respond with the
    stage-game equilibrium. Stops once ||rho_r - rho_{r-1}|| / ||rho_r|| <= tau.

    Args:
        scenario: Problem instance
        tau: Relative-change threshold
        max_rounds: Round limit
        response: ``anticipated`` or ``fixed`` user-flow handling in the leader QP
        tol: QP tolerance
        check_direct: Whether to report the gap to the direct solve

    Raises:
        ValidationError: If tau <= 0
        ConvergenceError: If the round limit is reached, with the per-round trace
    """
    if not tau > 0:
        raise ValidationError("tau must be > 0", field="tau", value=tau)

    signal = feasible_start(scenario, tol, max_iter)
    trades = repeated_game(scenario, signal)
    trace = [RoundRecord(1, _revenue(scenario, signal, trades), float("nan"))]
    logger.info(f"Round 1: revenue {trace[0].revenue:.6g}")

    converged = False
    for r in range(2, max_rounds + 1):
        new_signal = competitive_leader_qp(scenario, trades, response, tol, max_iter)
        trades = repeated_game(scenario, new_signal)
        change = _relative_change(new_signal, signal)
        signal = new_signal
        trace.append(RoundRecord(r, _revenue(scenario, signal, trades), change))
        logger.info(f"Round {r}: revenue {trace[-1].revenue:.6g}, relative change {change:.3g}")
        if change <= tau:
            converged = True
            break

    if not converged:
        raise ConvergenceError(
            f"leader/follower iteration did not settle within {max_rounds} rounds",
            iterations=max_rounds,
            last_iterate=signal,
            trace=trace,
        )

    outcome = build_outcome(scenario, COMPETITIVE, signal, trades, iterations=trace)
    if check_direct:
        try:
            direct = competitive_direct_solve(scenario, tol, max_iter=max_iter)
        except SolverError as e:
            logger.warning(f"Direct competitive solve failed: {e.message}")
        else:
            scale = max(abs(direct.revenue), 1.0)
            outcome.optimality_gap = (direct.revenue - outcome.revenue) / scale
            logger.debug(f"Gap to the direct optimum: {outcome.optimality_gap:.3g}")
    return outcome


def benevolent_solve(
    scenario: Scenario, tol: float = C.QP_TOL, max_iter: int = C.QP_MAX_ITER
) -> StackelbergOutcome:
    """
    Benevolent operator: users trade their whole surplus and the operator
    picks l_Q to maximize revenue; a(t) is then the resulting grid price.

    Raises:
        InfeasibleProblemError: If the storage cannot absorb the users' flows
    """
    H = scenario.H
    n = 2 * H
    ip, im = np.arange(H), np.arange(H, 2 * H)
    beta_plus, beta_minus = scenario.ces.beta_plus, scenario.ces.beta_minus
    surplus, deficit = class_totals(scenario)

    N = np.zeros((H, n))
    N[np.arange(H), ip] = beta_plus
    N[np.arange(H), im] = -beta_minus
    n0 = beta_plus * surplus - beta_minus * deficit
    A_in, b_in, in_labels, A_eq, b_eq, eq_labels = _storage_rows(scenario, N, n0)

    P = np.zeros((n, n))
    q = np.zeros(n)
    offset = 0.0
    for t in range(H):
        coef = benevolent_coefficients(scenario, t)
        P[ip[t], ip[t]] = P[im[t], im[t]] = 2.0 * coef.gamma1
        P[ip[t], im[t]] = P[im[t], ip[t]] = -2.0 * coef.gamma1
        q[ip[t]], q[im[t]] = coef.gamma2, -coef.gamma2
        offset += coef.gamma3

    problem = QpProblem.maximize(
        P,
        q,
        offset=offset,
        A_eq=A_eq,
        b_eq=b_eq,
        A_in=A_in,
        b_in=b_in,
        lo=np.zeros(n),
        var_labels=[f"l_Q+({t})" for t in range(H)] + [f"l_Q-({t})" for t in range(H)],
        eq_labels=eq_labels,
        in_labels=in_labels,
    )
    solution = solve_qp(problem, tol=tol, max_iter=max_iter)
    solution.require_optimal("benevolent QP")
    l_plus = np.maximum(solution.x[:H], 0.0)
    l_minus = np.maximum(solution.x[H:], 0.0)
    a = price_for_deviation(scenario, np.zeros(H), l_plus - l_minus)
    signal = OperatorSignal(a=a, l_Q_plus=l_plus, l_Q_minus=l_minus)
    return build_outcome(scenario, BENEVOLENT, signal, repeated_game(scenario, signal))


def _split_exchange(
    d: np.ndarray, n: np.ndarray, params: CesParams
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Charging and discharging flows (y+, y-) with y+ - y- = d and
    beta_plus y+ - beta_minus y- = n.
    """
    gap = params.beta_minus - params.beta_plus
    if gap <= C.LOSSLESS_TOL:
        return np.maximum(d, 0.0), np.maximum(-d, 0.0)
    y_minus = np.maximum((params.beta_plus * d - n) / gap, 0.0)
    return np.maximum(d + y_minus, 0.0), y_minus


def centralized_solve(
    scenario: Scenario, tol: float = C.QP_TOL, max_iter: int = C.QP_MAX_ITER
) -> StackelbergOutcome:
    """
    Centralized operator: minimize the community's grid payment sum_t p(t) L(t).

    The QP runs over the CES's net grid-side exchange d(t) = X(t) + l_Q(t)
    and its net storage input n(t), with n <= beta_plus d and
    n <= beta_minus d (equality when the store is lossless). The charging
    and discharging flows follow from (d, n); users' surplus and deficit
    are served first and l_Q covers the rest. Aggregates are shared among
    users in proportion to their surplus or deficit.

    Raises:
        InfeasibleProblemError: With the binding storage rows
    """
    H = scenario.H
    params = scenario.ces
    idx_d, idx_n = np.arange(H), np.arange(H, 2 * H)
    surplus, deficit = class_totals(scenario)
    phi, delta = scenario.tariff.phi, scenario.tariff.delta
    base_load = scenario.l_P - scenario.surplus_matrix().sum(axis=0)

    # L(t) = d(t) + base_load(t)
    Q = np.zeros((2 * H, 2 * H))
    Q[idx_d, idx_d] = 2.0 * phi
    c = np.zeros(2 * H)
    c[idx_d] = 2.0 * phi * base_load + delta
    offset = float(np.sum(phi * base_load ** 2 + delta * base_load))

    N = np.zeros((H, 2 * H))
    N[np.arange(H), idx_n] = 1.0
    A_in, b_in, in_labels, A_eq, b_eq, eq_labels = _storage_rows(scenario, N, np.zeros(H))
    A_in, b_in, A_eq, b_eq = list(A_in), list(b_in), list(A_eq), list(b_eq)

    lossless = params.beta_minus - params.beta_plus <= C.LOSSLESS_TOL
    for t in range(H):
        charge, discharge = np.zeros(2 * H), np.zeros(2 * H)
        charge[idx_n[t]] = discharge[idx_n[t]] = 1.0
        charge[idx_d[t]], discharge[idx_d[t]] = -params.beta_plus, -params.beta_minus
        if lossless:
            A_eq.append(charge)
            b_eq.append(0.0)
            eq_labels.append(f"n({t}) = beta d({t})")
        else:
            A_in += [charge, discharge]
            b_in += [0.0, 0.0]
            in_labels += [f"n({t}) <= beta_plus d({t})", f"n({t}) <= beta_minus d({t})"]

    problem = QpProblem(
        Q=Q,
        c=c,
        offset=offset,
        A_eq=np.array(A_eq).reshape(-1, 2 * H),
        b_eq=np.array(b_eq),
        A_in=np.array(A_in).reshape(-1, 2 * H),
        b_in=np.array(b_in),
        var_labels=[f"d({t})" for t in range(H)] + [f"n({t})" for t in range(H)],
        eq_labels=eq_labels,
        in_labels=in_labels,
    )
    solution = solve_qp(problem, tol=tol, max_iter=max_iter)
    solution.require_optimal("centralized QP")
    y_plus, y_minus = _split_exchange(solution.x[idx_d], solution.x[idx_n], params)

    sold = np.minimum(y_plus, surplus)
    bought = np.minimum(y_minus, deficit)
    s = scenario.surplus_matrix()
    share_sold = np.divide(sold, surplus, out=np.zeros(H), where=surplus > 0)
    share_bought = np.divide(bought, deficit, out=np.zeros(H), where=deficit > 0)
    x = np.where(s > 0, s * share_sold, s * share_bought)
    trades = TradeProfile(x=x, user_ids=tuple(scenario.participant_ids))

    signal = OperatorSignal(a=np.zeros(H), l_Q_plus=y_plus - sold, l_Q_minus=y_minus - bought)
    return build_outcome(scenario, CENTRALIZED, signal, trades)


def _revenue(scenario: Scenario, signal: OperatorSignal, trades: TradeProfile) -> float:
    load = pricing.grid_load_series(scenario, trades, signal.l_Q)
    return pricing.ces_revenue(trades, signal, pricing.grid_price(load, scenario.tariff))


def build_outcome(
    scenario: Scenario,
    model: str,
    signal: OperatorSignal,
    trades: TradeProfile,
    iterations: Optional[List[RoundRecord]] = None,
    converged: bool = True,
) -> StackelbergOutcome:
    """Charge trajectory, loads, prices, revenue and post-hoc checks of a model solution."""
    flows = storage.ces_flows(trades.x, signal.l_Q_plus, signal.l_Q_minus)
    trajectory = storage.charge_trajectory(scenario.ces.q0, flows, scenario.ces)

    diagnostics = []
    verdict = storage.check_feasible(trajectory, scenario.ces)
    if not verdict.feasible:
        diagnostics.append(
            f"{model}: storage infeasible (capacity violations {verdict.capacity_violations}, "
            f"continuity residual {verdict.continuity_residual:.3g})"
        )
    issue = storage.check_complementarity(signal.l_Q_plus, signal.l_Q_minus, f"{model} l_Q")
    if issue:
        diagnostics.append(issue)

    load = pricing.grid_load_series(scenario, trades, signal.l_Q)
    prices = pricing.grid_price(load, scenario.tariff)
    revenue_signal = signal
    if model == CENTRALIZED:
        revenue_signal = dataclasses.replace(signal, a=np.zeros(scenario.H))
    return StackelbergOutcome(
        model=model,
        signal=signal,
        trades=trades,
        trajectory=trajectory,
        prices=prices,
        grid_load=load,
        revenue=pricing.ces_revenue(trades, revenue_signal, prices),
        iterations=list(iterations or []),
        converged=converged,
        diagnostics=diagnostics,
    )


def pareto_perturbation_check(
    outcome: StackelbergOutcome,
    scenario: Scenario,
    theta_samples: Sequence[float] = C.PARETO_THETAS,
    tol: float = 1e-9,
) -> ParetoVerdict:
    """
    Check that load-preserving perturbations only move money between the
    users and the operator.

    For every theta and slot the users' aggregate trade becomes (1 + theta) X
    and l_Q shifts by -theta X so the grid load and price stay put; the
    changes of the users' and the operator's costs must cancel.
    """
    X = outcome.trades.aggregate
    S = scenario.surplus_matrix().sum(axis=0)
    a, p, l_Q = outcome.signal.a, outcome.prices, outcome.signal.l_Q

    def costs(x_agg, l_q):
        ces = a * x_agg + p * l_q
        users = p * (x_agg - S) - a * x_agg
        return users, ces

    users0, ces0 = costs(X, l_Q)
    worst, worst_slot, worst_theta, samples = 0.0, -1, 0.0, 0
    for theta in theta_samples:
        users1, ces1 = costs((1.0 + theta) * X, l_Q - theta * X)
        residual = np.abs((users1 - users0) + (ces1 - ces0))
        samples += residual.size
        t = int(np.argmax(residual))
        if residual[t] > worst:
            worst, worst_slot, worst_theta = float(residual[t]), t, float(theta)

    return ParetoVerdict(
        samples=samples,
        max_residual=worst,
        zero_sum=worst <= tol,
        worst_slot=worst_slot,
        worst_theta=worst_theta,
    )


def baseline_solution(scenario: Scenario) -> StackelbergOutcome:
    """The no-CES system as a model solution."""
    evaluated = pricing.baseline_outcome(scenario)
    return StackelbergOutcome(
        model=BASELINE,
        signal=evaluated.signal,
        trades=evaluated.trades,
        trajectory=evaluated.trajectory,
        prices=evaluated.prices,
        grid_load=evaluated.grid_load,
        revenue=evaluated.revenue,
    )


def solve_model(
    scenario: Scenario,
    model: str,
    tau: float = C.DEFAULT_TAU,
    max_rounds: int = C.DEFAULT_MAX_ROUNDS,
    response: str = ANTICIPATED,
    tol: float = C.QP_TOL,
    max_iter: int = C.QP_MAX_ITER,
) -> StackelbergOutcome:
    """Solve one model by name."""
    if model == COMPETITIVE:
        return stackelberg_iteration(
            scenario, tau=tau, max_rounds=max_rounds, response=response, tol=tol, max_iter=max_iter
        )
    if model == BENEVOLENT:
        return benevolent_solve(scenario, tol=tol, max_iter=max_iter)
    if model == CENTRALIZED:
        return centralized_solve(scenario, tol=tol, max_iter=max_iter)
    if model == BASELINE:
        return baseline_solution(scenario)
    raise ValidationError(f"unknown model '{model}'", field="model", value=model)


def report(scenario: Scenario, outcome: StackelbergOutcome) -> OutcomeReport:
    """Evaluate user costs of a model solution; the baseline uses the no-CES evaluation."""
    if outcome.model == BASELINE:
        return pricing.baseline_outcome(scenario)
    return pricing.evaluate_outcome(
        scenario,
        outcome.model,
        outcome.signal,
        outcome.trades,
        outcome.trajectory,
        centralized=outcome.model == CENTRALIZED,
        iterations=outcome.iterations,
        converged=outcome.converged,
        diagnostics=outcome.diagnostics,
    )


def deviation_of(scenario: Scenario, signal: OperatorSignal) -> np.ndarray:
    """eps(t) implied by a signal."""
    return equilibrium_deviation(scenario, signal.a, signal.l_Q)
