"""Tests for domain data classes."""

import math

import numpy as np
import pytest

from CESTRADE.models import (
    CompetitiveObjectiveCoefficients,
    ComparisonRow,
    CostBreakdown,
    EpsilonBox,
    FeasibilityVerdict,
    OperatorSignal,
    StageCostCoefficients,
    TimeGrid,
    TradeProfile,
    UserProfile,
    as_series,
)


class TestTimeGrid:
    """Tests for TimeGrid."""

    def test_peak_mask(self):
        """Test the half-open peak window."""
        mask = TimeGrid(H=6, peak_window=(2, 4)).peak_mask()
        assert mask.tolist() == [False, False, True, True, False, False]

    def test_dict_form(self):
        """Test conversion to and from the configuration form."""
        grid = TimeGrid(H=48, dt=0.5, peak_window=(32, 46))
        data = grid.to_dict()

        assert data == {"slots": 48, "slot_hours": 0.5, "peak_window": [32, 46]}
        assert TimeGrid.from_dict(data) == grid


class TestUserProfile:
    """Tests for UserProfile."""

    def test_series_are_arrays(self):
        """Test demand and generation become float arrays."""
        user = UserProfile(id=1, demand=[1, 2], generation=[0, 1])
        assert user.demand.dtype == float
        assert user.participating

    def test_from_dict_without_generation(self):
        """Test missing generation defaults to zeros."""
        user = UserProfile.from_dict({"id": 3, "demand": [1.0, 2.0], "participating": False})
        assert user.generation.tolist() == [0.0, 0.0]
        assert not user.participating

    def test_rejects_matrix(self):
        """Test two-dimensional series are rejected."""
        with pytest.raises(ValueError):
            as_series([[1.0]], "demand")


class TestScenario:
    """Tests for Scenario accessors."""

    def test_participants(self, tiny_scenario):
        """Test participant bookkeeping."""
        assert tiny_scenario.I == 2
        assert tiny_scenario.participant_ids == [0, 1]
        assert [u.id for u in tiny_scenario.non_participants] == [2]

    def test_surplus_matrix(self, tiny_scenario):
        """Test s_n(t) = g_n(t) - e_n(t)."""
        s = tiny_scenario.surplus_matrix()
        assert s.shape == (2, 4)
        assert s[0].tolist() == [-1.0, 2.0, -2.0, 1.0]
        assert s[1].tolist() == [-1.0, 1.0, -1.0, -2.0]

    def test_user_lookup(self, tiny_scenario):
        """Test lookup by id."""
        assert tiny_scenario.user(2).id == 2
        with pytest.raises(KeyError):
            tiny_scenario.user(9)


class TestOperatorSignal:
    """Tests for OperatorSignal."""

    def test_from_signed(self):
        """Test a signed l_Q is split by sign."""
        signal = OperatorSignal.from_signed([1.0, 2.0], [0.5, -1.5])

        assert signal.l_Q_plus.tolist() == [0.5, 0.0]
        assert signal.l_Q_minus.tolist() == [0.0, 1.5]
        assert signal.l_Q.tolist() == [0.5, -1.5]

    def test_vector(self):
        """Test rho is a stacked with l_Q."""
        signal = OperatorSignal.from_signed([1.0, 2.0], [0.5, -1.5])
        assert signal.vector().tolist() == [1.0, 2.0, 0.5, -1.5]


class TestTradeProfile:
    """Tests for TradeProfile."""

    def test_parts(self):
        """Test sign split and aggregate."""
        trades = TradeProfile(x=[[1.0, -2.0], [0.5, -0.5]], user_ids=(0, 1))

        assert trades.plus.tolist() == [[1.0, 0.0], [0.5, 0.0]]
        assert trades.minus.tolist() == [[0.0, 2.0], [0.0, 0.5]]
        assert trades.aggregate.tolist() == [1.5, -2.5]

    def test_single_user_is_matrix(self):
        """Test one user's trades become a 1 x H matrix."""
        assert TradeProfile(x=[1.0, 2.0]).x.shape == (1, 2)


class TestCoefficients:
    """Tests for the objective coefficient records."""

    def test_stage_cost(self):
        """Test the user's quadratic stage cost."""
        coef = StageCostCoefficients(K2=2.0, K1=-1.0, K0=3.0)
        assert coef.evaluate(2.0) == 9.0

    def test_competitive(self):
        """Test the leader's per-slot revenue form."""
        coef = CompetitiveObjectiveCoefficients(lambda_t=-1.0, mu_t=2.0, nu_t=-0.5, xi_t=1.0)
        assert coef.evaluate(1.0, 2.0) == pytest.approx(-1.0 + 2.0 - 2.0 + 2.0)

    def test_epsilon_box(self):
        """Test box membership with slack."""
        box = EpsilonBox(lower=-1.0, upper=0.0, case="all-deficit")

        assert box.contains(-0.5)
        assert not box.contains(0.1)
        assert box.contains(1e-9, tol=1e-8)


class TestResults:
    """Tests for result records."""

    def test_cost_breakdown(self):
        """Test per-slot and total cost."""
        cost = CostBreakdown(
            user_id=0, grid_component=np.array([1.0, 2.0]), ces_component=np.array([-0.5, 0.0])
        )

        assert cost.per_slot.tolist() == [0.5, 2.0]
        assert cost.total == 2.5

    def test_feasibility_verdict(self):
        """Test feasibility needs both capacity and continuity."""
        assert FeasibilityVerdict(True, True, 0.0).feasible
        assert not FeasibilityVerdict(True, False, 1.0).feasible

    def test_comparison_row_defaults(self):
        """Test optional comparison metrics default to NaN."""
        row = ComparisonRow("benevolent", 40.0, 5.0, 10.0, 20.0, 3.0)
        data = row.to_dict()

        assert list(data)[:2] == ["model", "participation_pct"]
        assert math.isnan(data["benefit_share_pct"])
