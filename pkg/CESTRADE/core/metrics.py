"""
Evaluation of model outcomes against the no-CES baseline.

Peak-to-average ratio, per-user cost savings, community benefit, the
storage-capacity sweep, the three-model comparison table and the forecast
noise study.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import CESTradeError, ErrorCollector, ValidationError
from ..models import (
    ComparisonRow,
    OperatorSignal,
    OutcomeReport,
    Scenario,
    SweepPoint,
    TradeProfile,
)
from ..utils.logging_config import get_logger
from ..validators import ConfigValidator
from . import operators, pricing, storage
from .scenario import perturb_forecasts, with_capacity

logger = get_logger("cestrade.metrics")

BENEFIT_RTOL = 1e-9


@dataclass(eq=False)
class SavingsSummary:
    """Per-user percentage savings against the baseline and their averages."""

    per_user: Dict[int, float]
    participant_avg: float
    non_participant_avg: float
    combined_avg: float
    excluded: List[int] = field(default_factory=list)


@dataclass(frozen=True)
class NoiseRow:
    """Average outcome of the forecast noise trials at one variance."""

    variance_pct: float
    trials: int
    avg_pu_saving_pct: float
    std_pu_saving_pct: float
    avg_npu_saving_pct: float
    avg_benefit: float
    clip_events: int
    failures: int

    def to_dict(self) -> Dict[str, float]:
        return {
            "variance_pct": self.variance_pct,
            "trials": self.trials,
            "avg_pu_saving_pct": self.avg_pu_saving_pct,
            "std_pu_saving_pct": self.std_pu_saving_pct,
            "avg_npu_saving_pct": self.avg_npu_saving_pct,
            "avg_benefit": self.avg_benefit,
            "clip_events": self.clip_events,
            "failures": self.failures,
        }


def par(load) -> float:
    """
    Peak-to-average ratio max L / mean L.

    Raises:
        ValidationError: If the mean load is not positive
    """
    load = np.asarray(load, dtype=float)
    mean = float(np.mean(load)) if load.size else 0.0
    if not mean > 0:
        raise ValidationError("PAR needs a positive mean load", field="load", value=mean)
    return float(np.max(load)) / mean


def par_reduction_pct(model_load, baseline_load) -> float:
    """(PAR_baseline - PAR_model) / PAR_baseline * 100."""
    base = par(baseline_load)
    return (base - par(model_load)) / base * 100.0


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if len(values) else float("nan")


def cost_savings(
    model_outcome: OutcomeReport,
    baseline_outcome: OutcomeReport,
    scenario: Scenario,
) -> SavingsSummary:
    """
    Percentage saving (C_baseline - C_model) / C_baseline * 100 of every user.

    Users with a non-positive baseline cost have no defined percentage; they
    are listed in ``excluded`` and left out of every average.
    """
    per_user: Dict[int, float] = {}
    excluded: List[int] = []
    for user in scenario.users:
        base = baseline_outcome.cost_of(user.id).total
        if base <= 0:
            excluded.append(user.id)
            continue
        per_user[user.id] = (base - model_outcome.cost_of(user.id).total) / base * 100.0

    if excluded:
        logger.debug(f"Savings undefined for users {excluded} (non-positive baseline cost)")

    participants = set(scenario.participant_ids)
    pu = [v for uid, v in per_user.items() if uid in participants]
    npu = [v for uid, v in per_user.items() if uid not in participants]
    return SavingsSummary(
        per_user=per_user,
        participant_avg=_mean(pu),
        non_participant_avg=_mean(npu),
        combined_avg=_mean(list(per_user.values())),
        excluded=excluded,
    )


def community_benefit_by_payment(
    model_outcome: OutcomeReport, baseline_outcome: OutcomeReport
) -> float:
    """Baseline grid payment minus the model's community-to-grid payment."""
    return baseline_outcome.community_payment - model_outcome.community_payment


def community_benefit(
    model_outcome: OutcomeReport,
    baseline_outcome: OutcomeReport,
    scenario: Scenario,
) -> float:
    """
    Reduction of what the whole community pays the grid.

    Summed as the users' cost reductions plus the change in the cost of any
    background load plus the CES revenue, and cross-checked against the
    difference of total grid payments.
    """
    user_part = sum(
        baseline_outcome.cost_of(u.id).total - model_outcome.cost_of(u.id).total
        for u in scenario.users
    )
    background = pricing.background_load(scenario)
    background_part = float(np.sum((baseline_outcome.prices - model_outcome.prices) * background))
    benefit = user_part + background_part + model_outcome.revenue - baseline_outcome.revenue

    by_payment = community_benefit_by_payment(model_outcome, baseline_outcome)
    scale = max(1.0, abs(baseline_outcome.community_payment))
    if abs(benefit - by_payment) > BENEFIT_RTOL * scale:
        logger.warning(
            f"{model_outcome.model}: community benefit {benefit:.9g} disagrees with the "
            f"grid payment difference {by_payment:.9g}"
        )
    return benefit


def benefit_share_pct(benefit: float, centralized_benefit: Optional[float]) -> float:
    """A model's community benefit as a percentage of the centralized benefit."""
    if centralized_benefit is None or not np.isfinite(centralized_benefit):
        return float("nan")
    if centralized_benefit <= 0:
        return float("nan")
    return benefit / centralized_benefit * 100.0


def _solve_report(scenario: Scenario, model: str, **options) -> OutcomeReport:
    outcome = operators.solve_model(scenario, model, **options)
    return operators.report(scenario, outcome)


def comparison_table(
    scenarios: Dict[float, Scenario],
    models: Sequence[str],
    **options,
) -> Tuple[List[ComparisonRow], ErrorCollector]:
    """
    One comparison row per (model, participation fraction).

    Failed cells are collected and left out; the rest of the table is built.
    """
    errors = ErrorCollector()
    rows: List[ComparisonRow] = []
    models = [m for m in models if m != operators.BASELINE]

    for fraction, scenario in scenarios.items():
        baseline = pricing.baseline_outcome(scenario)
        reports: Dict[str, OutcomeReport] = {}
        for model in models:
            try:
                reports[model] = _solve_report(scenario, model, **options)
            except CESTradeError as e:
                logger.warning(f"{model} at {fraction:.0%} participation failed: {e.message}")
                errors.add_error(e, f"{model} @ {fraction:g}")

        benefits = {m: community_benefit(r, baseline, scenario) for m, r in reports.items()}
        central = benefits.get(operators.CENTRALIZED)
        for model in models:
            if model not in reports:
                continue
            rep = reports[model]
            savings = cost_savings(rep, baseline, scenario)
            rows.append(
                ComparisonRow(
                    model=model,
                    participation_pct=fraction * 100.0,
                    avg_pu_saving_pct=savings.participant_avg,
                    ces_revenue=rep.revenue,
                    community_benefit=benefits[model],
                    par_reduction_pct=par_reduction_pct(rep.grid_load, baseline.grid_load),
                    avg_npu_saving_pct=savings.non_participant_avg,
                    avg_community_saving_pct=savings.combined_avg,
                    benefit_share_pct=benefit_share_pct(benefits[model], central),
                )
            )
    return rows, errors


def participation_trend(rows: Sequence[ComparisonRow]) -> Dict[str, bool]:
    """
    Whether each model's participant saving grows with participation.

    A model that does not improve monotonically is flagged with a warning.
    """
    trend: Dict[str, bool] = {}
    for model in sorted({r.model for r in rows}):
        series = sorted(
            (r.participation_pct, r.avg_pu_saving_pct) for r in rows if r.model == model
        )
        values = [v for _, v in series]
        ok = all(b >= a for a, b in zip(values, values[1:]))
        if not ok:
            logger.warning(f"{model}: participant saving does not grow with participation {values}")
        trend[model] = ok
    return trend


def capacity_sweep(
    scenario: Scenario,
    capacities: Sequence[float],
    models: Sequence[str],
    **options,
) -> Tuple[List[SweepPoint], ErrorCollector]:
    """
    Community benefit of each model at each storage capacity.

    Every point is solved from scratch. A failed point gets a NaN benefit and
    its error is collected; the sweep continues.
    """
    capacities = ConfigValidator.validate_float_list(capacities, "capacities", increasing=True)
    models = [m for m in models if m != operators.BASELINE]
    errors = ErrorCollector()
    points: List[SweepPoint] = []

    for capacity in capacities:
        instance = with_capacity(scenario, capacity)
        baseline = pricing.baseline_outcome(instance)
        point = SweepPoint(capacity=capacity)
        for model in models:
            try:
                rep = _solve_report(instance, model, **options)
                point.community_benefit[model] = community_benefit(rep, baseline, instance)
            except CESTradeError as e:
                logger.warning(f"{model} at capacity {capacity:g} failed: {e.message}")
                errors.add_error(e, f"{model} @ Q_M={capacity:g}")
                point.community_benefit[model] = float("nan")
        points.append(point)
    return points, errors


def best_capacity(points: Sequence[SweepPoint], model: str) -> Optional[float]:
    """Capacity with the largest community benefit for a model, ignoring failed points."""
    candidates = [
        (p.community_benefit[model], p.capacity)
        for p in points
        if np.isfinite(p.community_benefit.get(model, float("nan")))
    ]
    if not candidates:
        return None
    return max(candidates, key=lambda item: (item[0], -item[1]))[1]


def clip_to_intervals(scenario: Scenario, trades: TradeProfile) -> Tuple[TradeProfile, int]:
    """
    Clip committed trades to each user's true trade interval.

    Returns the clipped trades and how many (user, slot) trades changed.
    """
    s = scenario.surplus_matrix()
    lows = np.minimum(s, 0.0)
    highs = np.where(s > 0, s, 0.0)
    clipped = np.clip(trades.x, lows, highs)
    events = int(np.count_nonzero(np.abs(clipped - trades.x) > 1e-12))
    return TradeProfile(x=clipped, user_ids=trades.user_ids), events


def realized_outcome(
    scenario: Scenario,
    model: str,
    signal: OperatorSignal,
    committed: TradeProfile,
) -> Tuple[OutcomeReport, int]:
    """
    Outcome of a day-ahead commitment evaluated on the true profiles.

    Returns the report and the number of clip events.
    """
    trades, events = clip_to_intervals(scenario, committed)
    flows = storage.ces_flows(trades.x, signal.l_Q_plus, signal.l_Q_minus)
    trajectory = storage.charge_trajectory(scenario.ces.q0, flows, scenario.ces)
    diagnostics = []
    if events:
        diagnostics.append(f"{events} committed trade(s) clipped to the realized intervals")
    report = pricing.evaluate_outcome(
        scenario,
        model,
        signal,
        trades,
        trajectory,
        centralized=model == operators.CENTRALIZED,
        diagnostics=diagnostics,
    )
    return report, events


def trial_seed(seed: int, variance_index: int, trial: int) -> int:
    """Independent noise seed of one trial."""
    return int(np.random.SeedSequence([seed, variance_index, trial]).generate_state(1)[0])


def noise_study(
    scenario: Scenario,
    variance_pcts: Sequence[float],
    trials: int,
    seed: int,
    model: str = operators.COMPETITIVE,
    **options,
) -> List[NoiseRow]:
    """
    Robustness of the model's savings to day-ahead forecast errors.

    Each trial solves the model on noisy forecasts of demand, PV and the
    non-participating load, then evaluates the committed signal and trades
    on the true profiles.
    """
    variance_pcts = ConfigValidator.validate_float_list(variance_pcts, "variance_pcts")
    trials = ConfigValidator.validate_count(trials, "trials")
    baseline = pricing.baseline_outcome(scenario)
    rows: List[NoiseRow] = []

    for k, variance in enumerate(variance_pcts):
        pu, npu, benefits = [], [], []
        clips = failures = 0
        for trial in range(trials):
            forecast = perturb_forecasts(scenario, variance, trial_seed(seed, k, trial))
            try:
                outcome = operators.solve_model(forecast, model, **options)
            except CESTradeError as e:
                failures += 1
                logger.warning(f"Noise trial {trial} at {variance:g}% failed: {e.message}")
                continue
            report, events = realized_outcome(scenario, model, outcome.signal, outcome.trades)
            clips += events
            savings = cost_savings(report, baseline, scenario)
            pu.append(savings.participant_avg)
            npu.append(savings.non_participant_avg)
            benefits.append(community_benefit(report, baseline, scenario))

        rows.append(
            NoiseRow(
                variance_pct=variance,
                trials=trials,
                avg_pu_saving_pct=_mean(pu),
                std_pu_saving_pct=float(np.std(pu)) if pu else float("nan"),
                avg_npu_saving_pct=_mean(npu),
                avg_benefit=_mean(benefits),
                clip_events=clips,
                failures=failures,
            )
        )
        logger.info(
            f"Noise {variance:g}%: participant saving {rows[-1].avg_pu_saving_pct:.4g}% "
            f"over {len(pu)} trial(s), {clips} clip event(s)"
        )
    return rows


def saving_slope(rows: Sequence[NoiseRow]) -> float:
    """Least-squares slope of the participant saving (points) per variance percent."""
    pts = [(r.variance_pct, r.avg_pu_saving_pct) for r in rows if np.isfinite(r.avg_pu_saving_pct)]
    if len(pts) < 2 or len({v for v, _ in pts}) < 2:
        return float("nan")
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])
