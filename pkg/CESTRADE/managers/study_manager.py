"""
Study manager for CESTRADE.

This module contains the StudyManager class that runs the single-model,
comparison, capacity-sweep and forecast-noise studies and writes their
CSV artifacts.
"""

import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from ..core import metrics, operators, pricing, storage
from ..core.game import epsilon_boxes
from ..core.scenario import baseline_load, describe
from ..models import OutcomeReport, Scenario, StackelbergOutcome
from ..utils.format_utils import format_percent, write_csv
from ..utils.logging_config import get_logger
from .config_manager import ConfigManager, RunConfig

logger = get_logger("cestrade.study")

# Artifact names
TIMESERIES_CSV = "timeseries.csv"
SUMMARY_CSV = "summary.csv"
CONVERGENCE_CSV = "convergence.csv"
SAVINGS_CSV = "user_savings.csv"
SURPLUS_CSV = "surplus.csv"
COMPARISON_CSV = "comparison.csv"
SWEEP_CSV = "sweep.csv"
SWEEP_BEST_CSV = "sweep_best.csv"
NOISE_CSV = "noise.csv"
DIAGNOSTICS_TXT = "diagnostics.txt"
CONFIG_YAML = "config.yaml"

SUMMARY_COLUMNS = [
    "model",
    "revenue",
    "community_benefit",
    "community_payment",
    "baseline_payment",
    "par",
    "baseline_par",
    "par_reduction_pct",
    "avg_pu_saving_pct",
    "avg_npu_saving_pct",
    "avg_community_saving_pct",
    "rounds",
    "converged",
    "optimality_gap",
    "storage_feasible",
    "continuity_residual",
    "l_Q_complementarity",
]
CONVERGENCE_COLUMNS = ["round", "revenue", "relative_change"]
SAVINGS_COLUMNS = [
    "model",
    "user_id",
    "participating",
    "baseline_cost",
    "model_cost",
    "saving_pct",
]
COMPARISON_COLUMNS = [
    "model",
    "participation_pct",
    "avg_pu_saving_pct",
    "avg_npu_saving_pct",
    "avg_community_saving_pct",
    "ces_revenue",
    "community_benefit",
    "benefit_share_pct",
    "par_reduction_pct",
    "saving_trend_ok",
]
NOISE_COLUMNS = [
    "variance_pct",
    "trials",
    "avg_pu_saving_pct",
    "std_pu_saving_pct",
    "avg_npu_saving_pct",
    "avg_benefit",
    "clip_events",
    "failures",
]


class StudyManager:
    """
    Manager for batch studies.

    Each public method builds its scenario(s) from the ConfigManager, runs
    the models and writes its artifacts into the run's output directory.
    Every file is written once, by this class, in a fixed order.
    """

    def __init__(self, config: ConfigManager, run: RunConfig):
        """
        Initialize the study manager.

        Args:
            config: Scenario configuration
            run: Command-line run settings
        """
        self.config = config
        self.run = run
        self.out_dir = Path(run.out_dir)
        self.solver = config.solver_settings(tau=run.tau)

    @property
    def seed(self) -> int:
        return self.config.user_seed() if self.run.seed is None else self.run.seed

    def _path(self, name: str) -> Path:
        return self.out_dir / name

    def _save_config(self) -> None:
        self.config.save(self._path(CONFIG_YAML))

    def _write_diagnostics(self, lines: List[str]) -> Optional[Path]:
        if not lines:
            return None
        path = self._path(DIAGNOSTICS_TXT)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def scenario(self) -> Scenario:
        """The configured scenario, with the run's seed and participation overrides."""
        scenario = self.config.build_scenario(
            seed=self.run.seed, participation=self.run.participation
        )
        participants, households, peak = describe(scenario)
        logger.info(
            f"Scenario: {participants} of {households} households participating, "
            f"baseline peak {peak:.4g} kWh/slot, Q_M={scenario.ces.Q_M:g} kWh"
        )
        return scenario

    def _solve(self, scenario: Scenario, model: str) -> StackelbergOutcome:
        logger.info(f"Solving the {model} model")
        return operators.solve_model(scenario, model, **self.solver.options())

    # Single runs
    def run_models(self) -> Dict[str, Path]:
        """
        Solve the selected models on one scenario and write the run artifacts.

        Writes timeseries.csv, summary.csv, user_savings.csv, surplus.csv,
        convergence.csv when the competitive model is among them, and
        diagnostics.txt when any check reported a problem.

        Raises:
            SolverError, EquilibriumError, ConvergenceError: On numerical failure
        """
        scenario = self.scenario()
        baseline = pricing.baseline_outcome(scenario)

        frames, summaries, savings_rows, diagnostics = [], [], [], []
        written: Dict[str, Path] = {}
        for model in self.run.models:
            outcome = self._solve(scenario, model)
            rep = operators.report(scenario, outcome)
            frames.append(self.timeseries_frame(scenario, rep, baseline))
            summaries.append(self.summary_row(scenario, outcome, rep, baseline))
            savings_rows.extend(self.savings_rows(scenario, rep, baseline))
            diagnostics.extend(rep.diagnostics)
            if model == operators.COMPETITIVE:
                written["convergence"] = write_csv(
                    self._path(CONVERGENCE_CSV),
                    [
                        {
                            "round": r.round,
                            "revenue": r.revenue,
                            "relative_change": r.relative_change,
                        }
                        for r in outcome.iterations
                    ],
                    CONVERGENCE_COLUMNS,
                )

        written["timeseries"] = write_csv(
            self._path(TIMESERIES_CSV), pd.concat(frames, ignore_index=True)
        )
        written["summary"] = write_csv(self._path(SUMMARY_CSV), summaries, SUMMARY_COLUMNS)
        written["savings"] = write_csv(self._path(SAVINGS_CSV), savings_rows, SAVINGS_COLUMNS)
        written["surplus"] = write_csv(self._path(SURPLUS_CSV), self.surplus_frame(scenario))
        self._save_config()
        path = self._write_diagnostics(diagnostics)
        if path:
            written["diagnostics"] = path

        for row in summaries:
            logger.info(
                f"{row['model']}: revenue {row['revenue']:.6g}, "
                f"benefit {row['community_benefit']:.6g}, "
                f"participant saving {format_percent(row['avg_pu_saving_pct'])}"
            )
        return written

    @staticmethod
    def timeseries_frame(
        scenario: Scenario, rep: OutcomeReport, baseline: OutcomeReport
    ) -> pd.DataFrame:
        """Per-slot prices, loads, charge and per-user trades of one model."""
        H = scenario.H
        columns: Dict[str, Any] = {
            "model": [rep.model] * H,
            "t": np.arange(H),
            "p": rep.prices,
            "baseline_p": baseline.prices,
            "a": rep.signal.a,
            "l_Q": rep.signal.l_Q,
            "q": rep.trajectory.q[1:],
            "L": rep.grid_load,
        }
        for k, user_id in enumerate(scenario.participant_ids):
            columns[f"x_{user_id}"] = rep.trades.x[k]
        grid_loads = pricing.participant_grid_loads(scenario, rep.trades)
        participant_rows = {uid: k for k, uid in enumerate(scenario.participant_ids)}
        for user in scenario.users:
            if user.id in participant_rows:
                columns[f"l_{user.id}"] = grid_loads[participant_rows[user.id]]
            else:
                columns[f"l_{user.id}"] = user.demand
        return pd.DataFrame(columns)

    @staticmethod
    def summary_row(
        scenario: Scenario,
        outcome: StackelbergOutcome,
        rep: OutcomeReport,
        baseline: OutcomeReport,
    ) -> Dict[str, Any]:
        """Headline metrics of one model."""
        savings = metrics.cost_savings(rep, baseline, scenario)
        verdict = storage.check_feasible(rep.trajectory, scenario.ces)
        gap = outcome.optimality_gap
        return {
            "model": rep.model,
            "revenue": rep.revenue,
            "community_benefit": metrics.community_benefit(rep, baseline, scenario),
            "community_payment": rep.community_payment,
            "baseline_payment": baseline.community_payment,
            "par": metrics.par(rep.grid_load),
            "baseline_par": metrics.par(baseline.grid_load),
            "par_reduction_pct": metrics.par_reduction_pct(rep.grid_load, baseline.grid_load),
            "avg_pu_saving_pct": savings.participant_avg,
            "avg_npu_saving_pct": savings.non_participant_avg,
            "avg_community_saving_pct": savings.combined_avg,
            "rounds": len(outcome.iterations),
            "converged": outcome.converged,
            "optimality_gap": float("nan") if gap is None else gap,
            "storage_feasible": verdict.feasible,
            "continuity_residual": verdict.continuity_residual,
            "l_Q_complementarity": storage.complementarity_violation(
                rep.signal.l_Q_plus, rep.signal.l_Q_minus
            ),
        }

    @staticmethod
    def savings_rows(
        scenario: Scenario, rep: OutcomeReport, baseline: OutcomeReport
    ) -> List[Dict[str, Any]]:
        """Per-user cost and saving distribution of one model."""
        savings = metrics.cost_savings(rep, baseline, scenario)
        participants = set(scenario.participant_ids)
        return [
            {
                "model": rep.model,
                "user_id": user.id,
                "participating": user.id in participants,
                "baseline_cost": baseline.cost_of(user.id).total,
                "model_cost": rep.cost_of(user.id).total,
                "saving_pct": savings.per_user.get(user.id, float("nan")),
            }
            for user in scenario.users
        ]

    @staticmethod
    def surplus_frame(scenario: Scenario) -> pd.DataFrame:
        """Participant surpluses with the class totals and the baseline load."""
        s = scenario.surplus_matrix()
        surplus, deficit = operators.class_totals(scenario)
        columns: Dict[str, Any] = {
            "t": np.arange(scenario.H),
            "S_plus": surplus,
            "S_minus": deficit,
            "l_P": scenario.l_P,
            "baseline_L": baseline_load(scenario),
        }
        for k, user_id in enumerate(scenario.participant_ids):
            columns[f"s_{user_id}"] = s[k]
        return pd.DataFrame(columns)

    # Comparison
    def compare(self) -> Dict[str, Path]:
        """
        Three-model comparison over the participation fractions.

        Failed cells appear as rows with empty metric cells, and their
        errors go to diagnostics.txt.
        """
        fractions = self.run.participation_list
        scenarios = self.config.scenarios_by_participation(fractions, seed=self.seed)
        models = [m for m in self.run.models if m != operators.BASELINE]
        rows, errors = metrics.comparison_table(scenarios, models, **self.solver.options())
        trend = metrics.participation_trend(rows)

        by_cell = {(r.model, round(r.participation_pct, 9)): r for r in rows}
        table = []
        for fraction in fractions:
            for model in models:
                row = by_cell.get((model, round(fraction * 100.0, 9)))
                if row is None:
                    table.append({"model": model, "participation_pct": fraction * 100.0})
                    continue
                table.append({**row.to_dict(), "saving_trend_ok": trend.get(model)})

        written = {"comparison": write_csv(self._path(COMPARISON_CSV), table, COMPARISON_COLUMNS)}
        self._save_config()
        path = self._write_diagnostics(errors.get_user_messages())
        if path:
            written["diagnostics"] = path
        return written

    # Capacity sweep
    def sweep(self) -> Dict[str, Path]:
        """Community benefit of each model over the storage capacities."""
        scenario = self.scenario()
        models = [m for m in self.run.models if m != operators.BASELINE]
        points, errors = metrics.capacity_sweep(
            scenario, self.run.capacities, models, **self.solver.options()
        )
        table = [
            {"capacity": p.capacity, **{f"benefit_{m}": p.community_benefit.get(m) for m in models}}
            for p in points
        ]
        best = [{"model": m, "best_capacity": metrics.best_capacity(points, m)} for m in models]
        for item in best:
            logger.info(
                f"{item['model']}: largest community benefit at Q_M={item['best_capacity']}"
            )

        written = {
            "sweep": write_csv(
                self._path(SWEEP_CSV), table, ["capacity"] + [f"benefit_{m}" for m in models]
            ),
            "sweep_best": write_csv(self._path(SWEEP_BEST_CSV), best, ["model", "best_capacity"]),
        }
        self._save_config()
        path = self._write_diagnostics(errors.get_user_messages())
        if path:
            written["diagnostics"] = path
        return written

    # Forecast noise
    def noise(self) -> Dict[str, Path]:
        """Savings of one model under day-ahead forecast errors."""
        scenario = self.scenario()
        models = [m for m in self.run.models if m != operators.BASELINE]
        model = models[0] if len(models) == 1 else operators.COMPETITIVE
        rows = metrics.noise_study(
            scenario,
            self.run.variances,
            self.run.trials,
            self.seed,
            model=model,
            **self.solver.options(),
        )
        slope = metrics.saving_slope(rows)
        if not math.isnan(slope):
            logger.info(f"{model}: participant saving changes by {slope:.4g} points per variance %")

        written = {
            "noise": write_csv(self._path(NOISE_CSV), [r.to_dict() for r in rows], NOISE_COLUMNS)
        }
        self._save_config()
        lines = [
            f"{r.failures} of {r.trials} trial(s) failed at {r.variance_pct:g}% variance"
            for r in rows
            if r.failures
        ]
        path = self._write_diagnostics(lines)
        if path:
            written["diagnostics"] = path
        return written

    # Validation
    def validate(self) -> Dict[str, Any]:
        """Build the scenario and summarize it without solving anything."""
        scenario = self.scenario()
        participants, households, peak = describe(scenario)
        boxes = [box.case for box in epsilon_boxes(scenario)]
        return {
            "source": self.config.source,
            "slots": scenario.H,
            "households": households,
            "participants": participants,
            "baseline_peak": peak,
            "baseline_par": metrics.par(baseline_load(scenario)),
            "L_max": scenario.L_max,
            "capacity": scenario.ces.Q_M,
            "slot_cases": {case: boxes.count(case) for case in sorted(set(boxes))},
        }
