"""Tests for the grid price model, tariff calibration and cost accounting."""

import numpy as np
import pytest

from CESTRADE.core.pricing import (
    background_load,
    baseline_outcome,
    calibrate_tariff,
    ces_revenue,
    check_grid_load,
    cost_breakdowns,
    grid_load_series,
    grid_price,
    participant_grid_loads,
    stage_cost_coefficients,
    total_grid_load,
    user_cost,
)
from CESTRADE.exceptions import CalibrationError
from CESTRADE.models import OperatorSignal, Tariff, TradeProfile

TRADES = [[-0.5, 1.0, -1.0, 0.5], [-0.5, 0.5, -0.5, -1.0]]
PRICES_A = [12.0, 11.0, 13.0, 14.0]
L_Q = [0.5, -0.5, 0.0, 0.0]


@pytest.fixture
def trades(tiny_scenario):
    """Trades of both participants inside their intervals."""
    return TradeProfile(x=TRADES, user_ids=tuple(tiny_scenario.participant_ids))


@pytest.fixture
def signal():
    """A CES price and grid exchange."""
    return OperatorSignal.from_signed(PRICES_A, L_Q)


def _prices(scenario, trades, signal):
    return grid_price(grid_load_series(scenario, trades, signal.l_Q), scenario.tariff)


class TestGridLoad:
    """Tests for grid loads and prices."""

    def test_no_trades_is_baseline(self, tiny_scenario):
        """Test the load without trades or exchange."""
        assert grid_load_series(tiny_scenario, None, None).tolist() == [4.0, 1.0, 6.0, 4.0]

    def test_with_trades(self, tiny_scenario, trades):
        """Test L = sum(x - s) + l_Q + l_P."""
        load = grid_load_series(tiny_scenario, trades, L_Q)
        expected = np.array([4.0, 1.0, 6.0, 4.0]) + np.sum(TRADES, axis=0) + np.array(L_Q)

        assert np.allclose(load, expected)

    def test_participant_loads(self, tiny_scenario, trades):
        """Test l_n = x_n - s_n."""
        loads = participant_grid_loads(tiny_scenario, trades)
        assert loads[0].tolist() == [0.5, -1.0, 1.0, -0.5]

    def test_total_grid_load_slot(self, tiny_scenario):
        """Test the single-slot form."""
        assert total_grid_load(tiny_scenario, None, None, t=2) == 6.0
        assert total_grid_load(tiny_scenario, None, None).tolist() == [4.0, 1.0, 6.0, 4.0]

    def test_check_grid_load(self, tiny_scenario, caplog):
        """Test loads outside (0, L_max) are reported."""
        bad = check_grid_load(tiny_scenario, np.array([1.0, 0.0, 25.0, 3.0]), "test")

        assert bad == [1, 2]
        assert "grid load outside" in caplog.text

    def test_grid_price(self, tiny_scenario):
        """Test p = phi L + delta."""
        prices = grid_price(np.array([4.0, 1.0, 6.0, 4.0]), tiny_scenario.tariff)

        assert prices.tolist() == [14.0, 11.0, 19.0, 16.0]
        assert grid_price(2.0, tiny_scenario.tariff, t=3) == 13.0


class TestCalibration:
    """Tests for calibrate_tariff."""

    def test_matches_reference(self):
        """Test spread, mean and peak ratio."""
        load = np.array([4.0, 1.0, 6.0, 4.0])
        tariff = calibrate_tariff((20.0, 52.0), 30.0, load, (2, 4), peak_ratio=1.5)
        prices = tariff.phi * load + tariff.delta

        assert tariff.phi.tolist() == pytest.approx([4.0, 4.0, 6.0, 6.0])
        assert tariff.delta.tolist() == pytest.approx([10.0] * 4)
        assert np.ptp(prices) == pytest.approx(32.0)
        assert prices.mean() == pytest.approx(30.0)

    def test_load_weighted_mean(self):
        """Test the load-weighted average mode."""
        load = np.array([2.0, 1.0, 6.0, 3.0])
        tariff = calibrate_tariff((20.0, 52.0), 40.0, load, (0, 0), average="load")
        prices = tariff.phi * load + tariff.delta

        assert np.sum(prices * load) / np.sum(load) == pytest.approx(40.0)

    def test_bad_range(self):
        """Test max must exceed min."""
        with pytest.raises(CalibrationError) as info:
            calibrate_tariff((30.0, 30.0), 30.0, [1.0, 2.0], (0, 0))
        assert info.value.constraint == "range"

    def test_constant_baseline(self):
        """Test a flat load has no spread to match."""
        with pytest.raises(CalibrationError):
            calibrate_tariff((20.0, 52.0), 30.0, [3.0, 3.0, 3.0], (0, 0))

    def test_non_positive_baseline(self):
        """Test the load must be positive."""
        with pytest.raises(CalibrationError) as info:
            calibrate_tariff((20.0, 52.0), 30.0, [3.0, -1.0], (0, 0))
        assert info.value.constraint == "baseline_load"

    def test_negative_delta(self):
        """Test an average that needs delta < 0."""
        with pytest.raises(CalibrationError) as info:
            calibrate_tariff((20.0, 52.0), 21.0, [1.0, 10.0, 10.0, 10.0], (0, 0))
        assert info.value.constraint == "average"

    def test_unknown_average(self):
        """Test the average mode is checked."""
        with pytest.raises(CalibrationError):
            calibrate_tariff((20.0, 52.0), 30.0, [1.0, 2.0], (0, 0), average="median")


class TestCosts:
    """Tests for user costs and the CES revenue."""

    def test_baseline_costs(self, tiny_scenario):
        """Test baseline costs and the community payment."""
        base = baseline_outcome(tiny_scenario)

        assert base.cost_of(0).total == pytest.approx(14.0)
        assert base.cost_of(1).total == pytest.approx(54.0)
        assert base.cost_of(2).total == pytest.approx(177.0)
        assert base.community_payment == pytest.approx(245.0)
        assert base.revenue == 0.0

    def test_user_cost_matches_breakdown(self, tiny_scenario, trades, signal):
        """Test the slot and the horizon forms agree."""
        prices = _prices(tiny_scenario, trades, signal)
        costs = cost_breakdowns(tiny_scenario, trades, signal, prices)

        for cost in costs:
            for t in range(tiny_scenario.H):
                assert user_cost(cost.user_id, trades, signal, tiny_scenario, t) == pytest.approx(
                    cost.per_slot[t]
                )

    def test_non_participant_has_no_ces_term(self, tiny_scenario, trades, signal):
        """Test non-participants only pay the grid."""
        prices = _prices(tiny_scenario, trades, signal)
        cost = cost_breakdowns(tiny_scenario, trades, signal, prices)[2]

        assert not cost.ces_component.any()
        assert np.allclose(cost.grid_component, prices * [2.0, 4.0, 3.0, 3.0])

    def test_centralized_drops_ces_term(self, tiny_scenario, trades, signal):
        """Test centralized accounting has no CES price."""
        cost = user_cost(0, trades, signal, tiny_scenario, 1, centralized=True)
        load = grid_load_series(tiny_scenario, trades, signal.l_Q)

        assert cost == pytest.approx(grid_price(load[1], tiny_scenario.tariff, 1) * (1.0 - 2.0))

    def test_stage_cost_coefficients(self, tiny_scenario, trades, signal):
        """Test the quadratic in the own load reproduces the cost."""
        t = 1
        load = grid_load_series(tiny_scenario, trades, signal.l_Q)
        l_0 = participant_grid_loads(tiny_scenario, trades)[0, t]
        coef = stage_cost_coefficients(0, load[t] - l_0, PRICES_A[t], tiny_scenario, t)

        assert coef.K2 == tiny_scenario.tariff.phi[t]
        assert coef.evaluate(l_0) == pytest.approx(user_cost(0, trades, signal, tiny_scenario, t))

    def test_ces_revenue(self, signal):
        """Test R = sum(-a X - p l_Q)."""
        trades = TradeProfile(x=TRADES)
        prices = np.array([14.0, 11.0, 19.0, 16.0])
        expected = -np.sum(np.array(PRICES_A) * np.sum(TRADES, axis=0))
        expected -= np.sum(prices * np.array(L_Q))

        assert ces_revenue(trades, signal, prices) == pytest.approx(expected)

    def test_costs_and_revenue_add_up(self, tiny_scenario, trades, signal):
        """Test users, background and CES together pay the grid payment."""
        prices = _prices(tiny_scenario, trades, signal)
        load = grid_load_series(tiny_scenario, trades, signal.l_Q)
        users = sum(c.total for c in cost_breakdowns(tiny_scenario, trades, signal, prices))
        background = float(np.sum(prices * background_load(tiny_scenario)))

        assert users + background - ces_revenue(trades, signal, prices) == pytest.approx(
            float(np.sum(prices * load))
        )
        assert not background_load(tiny_scenario).any()

    def test_explicit_tariff_round_trip(self):
        """Test the tariff's dict form."""
        assert Tariff([1.0], [2.0]).to_dict() == {"phi": [1.0], "delta": [2.0]}
