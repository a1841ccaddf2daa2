"""Tests for savings, benefit and study metrics."""

import math

import numpy as np
import pytest

from CESTRADE.core import pricing
from CESTRADE.core.metrics import (
    NoiseRow,
    benefit_share_pct,
    best_capacity,
    capacity_sweep,
    clip_to_intervals,
    community_benefit,
    community_benefit_by_payment,
    comparison_table,
    cost_savings,
    noise_study,
    par,
    par_reduction_pct,
    participation_trend,
    saving_slope,
    trial_seed,
)
from CESTRADE.core.operators import BENEVOLENT, CENTRALIZED, COMPETITIVE, report, solve_model
from CESTRADE.exceptions import ValidationError
from CESTRADE.models import ComparisonRow, SweepPoint, TradeProfile


def _noise_row(variance, saving):
    return NoiseRow(variance, 1, saving, 0.0, 0.0, 0.0, 0, 0)


class TestPar:
    """Tests for the peak-to-average ratio."""

    def test_par(self):
        """Test max over mean."""
        assert par([1.0, 2.0, 3.0]) == pytest.approx(1.5)

    def test_reduction(self):
        """Test a flattened load halves the excess ratio."""
        assert par_reduction_pct([2.0, 2.0, 2.0], [1.0, 1.0, 4.0]) == pytest.approx(50.0)

    def test_non_positive_mean(self):
        """Test PAR needs a positive mean."""
        with pytest.raises(ValidationError):
            par([1.0, -1.0])
        with pytest.raises(ValidationError):
            par([])


class TestSavingsAndBenefit:
    """Tests for user savings and the community benefit."""

    def test_baseline_saves_nothing(self, tiny_scenario):
        """Test the baseline against itself."""
        base = pricing.baseline_outcome(tiny_scenario)
        savings = cost_savings(base, base, tiny_scenario)

        assert savings.per_user == {0: 0.0, 1: 0.0, 2: 0.0}
        assert savings.participant_avg == 0.0
        assert community_benefit(base, base, tiny_scenario) == 0.0

    def test_benefit_agrees_with_payments(self, tiny_scenario):
        """Test the cost-based and payment-based benefits match."""
        base = pricing.baseline_outcome(tiny_scenario)
        for model in (COMPETITIVE, BENEVOLENT, CENTRALIZED):
            rep = report(tiny_scenario, solve_model(tiny_scenario, model))
            assert community_benefit(rep, base, tiny_scenario) == pytest.approx(
                community_benefit_by_payment(rep, base), rel=1e-7, abs=1e-7
            )

    def test_centralized_benefit_is_largest(self, tiny_scenario):
        """Test the centralized operator gives the largest community benefit."""
        base = pricing.baseline_outcome(tiny_scenario)
        benefits = {
            model: community_benefit(
                report(tiny_scenario, solve_model(tiny_scenario, model)), base, tiny_scenario
            )
            for model in (COMPETITIVE, BENEVOLENT, CENTRALIZED)
        }

        assert benefits[CENTRALIZED] >= benefits[COMPETITIVE] - 1e-6
        assert benefits[CENTRALIZED] >= benefits[BENEVOLENT] - 1e-6
        assert benefits[CENTRALIZED] >= -1e-6

    def test_benefit_share(self):
        """Test the share needs a positive centralized benefit."""
        assert benefit_share_pct(5.0, 20.0) == 25.0
        assert math.isnan(benefit_share_pct(5.0, 0.0))
        assert math.isnan(benefit_share_pct(5.0, None))


class TestStudies:
    """Tests for comparison and sweep helpers."""

    def test_comparison_table(self, tiny_scenario):
        """Test one row per model with its benefit share."""
        models = [COMPETITIVE, BENEVOLENT, CENTRALIZED]
        rows, errors = comparison_table({0.4: tiny_scenario}, models)

        assert not errors.has_errors()
        assert [r.model for r in rows] == [COMPETITIVE, BENEVOLENT, CENTRALIZED]
        assert all(r.participation_pct == pytest.approx(40.0) for r in rows)
        central = rows[2]
        expected = report(tiny_scenario, solve_model(tiny_scenario, CENTRALIZED)).revenue
        assert central.ces_revenue == pytest.approx(expected, rel=1e-6, abs=1e-6)
        if central.community_benefit > 0:
            assert central.benefit_share_pct == pytest.approx(100.0)

    def test_participation_trend(self, caplog):
        """Test a falling saving is flagged."""
        rows = [
            ComparisonRow(COMPETITIVE, 10.0, 1.0, 0.0, 0.0, 0.0),
            ComparisonRow(COMPETITIVE, 20.0, 2.0, 0.0, 0.0, 0.0),
            ComparisonRow(BENEVOLENT, 10.0, 3.0, 0.0, 0.0, 0.0),
            ComparisonRow(BENEVOLENT, 20.0, 1.0, 0.0, 0.0, 0.0),
        ]
        trend = participation_trend(rows)

        assert trend == {BENEVOLENT: False, COMPETITIVE: True}
        assert "does not grow" in caplog.text

    def test_capacity_sweep_empty_store(self, tiny_scenario):
        """Test a store without capacity gives no centralized benefit."""
        points, errors = capacity_sweep(tiny_scenario, [0.0, 10.0], [CENTRALIZED])

        assert not errors.has_errors()
        assert [p.capacity for p in points] == [0.0, 10.0]
        assert points[0].community_benefit[CENTRALIZED] == pytest.approx(0.0, abs=1e-6)
        assert points[1].community_benefit[CENTRALIZED] >= -1e-6

    def test_capacity_sweep_needs_increasing(self, tiny_scenario):
        """Test capacities must increase."""
        with pytest.raises(ValidationError):
            capacity_sweep(tiny_scenario, [10.0, 5.0], [CENTRALIZED])

    def test_best_capacity(self):
        """Test the argmax ignores failed points and prefers the smaller capacity on ties."""
        points = [
            SweepPoint(10.0, {COMPETITIVE: 3.0}),
            SweepPoint(20.0, {COMPETITIVE: float("nan")}),
            SweepPoint(30.0, {COMPETITIVE: 5.0}),
            SweepPoint(40.0, {COMPETITIVE: 5.0}),
        ]
        assert best_capacity(points, COMPETITIVE) == 30.0
        assert best_capacity(points, BENEVOLENT) is None


class TestNoise:
    """Tests for the forecast noise study."""

    def test_clip_to_intervals(self, tiny_scenario):
        """Test trades outside the true intervals are clipped and counted."""
        committed = TradeProfile(
            x=[[-1.5, 2.0, -2.0, 1.5], [-1.0, 1.0, 0.5, -2.0]], user_ids=(0, 1)
        )
        clipped, events = clip_to_intervals(tiny_scenario, committed)

        assert events == 3
        assert clipped.x.tolist() == [[-1.0, 2.0, -2.0, 1.0], [-1.0, 1.0, 0.0, -2.0]]
        assert clipped.user_ids == (0, 1)

    def test_trial_seed(self):
        """Test seeds are reproducible and distinct."""
        assert trial_seed(7, 0, 0) == trial_seed(7, 0, 0)
        assert len({trial_seed(7, k, j) for k in range(3) for j in range(3)}) == 9

    def test_zero_variance(self, tiny_scenario):
        """Test exact forecasts commit feasible trades."""
        rows = noise_study(tiny_scenario, [0.0], trials=2, seed=1, model=BENEVOLENT)

        assert len(rows) == 1
        assert rows[0].clip_events == 0
        assert rows[0].failures == 0
        assert rows[0].std_pu_saving_pct == pytest.approx(0.0, abs=1e-9)
        assert set(rows[0].to_dict()) >= {"variance_pct", "clip_events", "avg_pu_saving_pct"}

    def test_saving_slope(self):
        """Test the least-squares slope and its undefined cases."""
        rows = [_noise_row(0.0, 10.0), _noise_row(10.0, 8.0), _noise_row(20.0, 6.0)]

        assert saving_slope(rows) == pytest.approx(-0.2)
        assert math.isnan(saving_slope(rows[:1]))
        assert math.isnan(saving_slope([_noise_row(5.0, 1.0), _noise_row(5.0, 2.0)]))
        assert math.isnan(saving_slope([_noise_row(0.0, 1.0), _noise_row(5.0, np.nan)]))
