"""Tests for the CES charge dynamics."""

import numpy as np
import pytest

from CESTRADE.core.storage import (
    capacity_operators,
    ces_flows,
    charge_closed_form,
    charge_trajectory,
    check_complementarity,
    check_feasible,
    complementarity_violation,
    split_signed,
    step_charge,
)
from CESTRADE.models import CesParams, ChargeTrajectory, FlowSplit


class TestRecurrence:
    """Tests for the charge recurrence."""

    def test_step(self):
        """Test one lossy step."""
        params = CesParams(Q_M=20.0, q0=10.0, alpha=0.9, beta_plus=0.9, beta_minus=1.1)
        assert step_charge(10.0, 2.0, 0.0, params) == pytest.approx(10.8)
        assert step_charge(10.0, 0.0, 2.0, params) == pytest.approx(6.8)

    def test_ideal_store_is_cumulative_sum(self):
        """Test a lossless store integrates the net flow."""
        params = CesParams(Q_M=10.0, q0=2.0)
        flows = FlowSplit(np.array([1.0, 0.0, 2.0]), np.array([0.0, 1.5, 0.5]))
        traj = charge_trajectory(2.0, flows, params)

        assert traj.q.tolist() == pytest.approx([2.0, 3.0, 1.5, 3.0])
        assert traj.capacity_ok
        assert traj.continuity_residual == pytest.approx(1.0)

    def test_closed_form_matches_recurrence(self, rng):
        """Test the vector form against the loop."""
        params = CesParams(Q_M=100.0, q0=30.0, alpha=0.98, beta_plus=0.9, beta_minus=1.1)
        flows = FlowSplit(rng.uniform(0, 3, 24), rng.uniform(0, 3, 24))

        loop = charge_trajectory(params.q0, flows, params).q[1:]
        assert np.allclose(charge_closed_form(params.q0, flows, params), loop)

    def test_operators(self):
        """Test eta and Psi."""
        ops = capacity_operators(CesParams(Q_M=1.0, q0=0.0, alpha=0.5), 3)

        assert ops.eta.tolist() == [0.5, 0.25, 0.125]
        assert ops.psi.tolist() == [[1.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.25, 0.5, 1.0]]
        assert not ops.psi.flags.writeable

    def test_operators_need_a_slot(self):
        """Test H must be positive."""
        with pytest.raises(ValueError):
            capacity_operators(CesParams(Q_M=1.0, q0=0.0), 0)


class TestFeasibility:
    """Tests for check_feasible."""

    def test_feasible(self):
        """Test a closed cycle inside the capacity."""
        params = CesParams(Q_M=5.0, q0=1.0)
        traj = ChargeTrajectory(np.array([1.0, 5.0, 0.0, 1.0]), True, 0.0)
        verdict = check_feasible(traj, params)

        assert verdict.feasible
        assert verdict.capacity_violations == []

    def test_capacity_violations(self):
        """Test over- and under-charge are listed by slot."""
        params = CesParams(Q_M=5.0, q0=1.0)
        traj = ChargeTrajectory(np.array([1.0, 6.0, -0.5, 1.0]), False, 0.0)
        verdict = check_feasible(traj, params)

        assert not verdict.capacity_ok
        assert verdict.capacity_violations == [(1, pytest.approx(1.0)), (2, pytest.approx(0.5))]

    def test_continuity(self, caplog):
        """Test the end charge must return to the start."""
        params = CesParams(Q_M=5.0, q0=1.0)
        verdict = check_feasible(ChargeTrajectory(np.array([1.0, 2.0, 1.1]), True, 0.1), params)

        assert verdict.capacity_ok
        assert not verdict.continuity_ok
        assert verdict.continuity_residual == pytest.approx(0.1)
        assert "infeasible" in caplog.text


class TestFlows:
    """Tests for flow helpers."""

    def test_split_signed(self):
        """Test sign split."""
        split = split_signed([1.0, -2.0, 0.0])

        assert split.chi_plus.tolist() == [1.0, 0.0, 0.0]
        assert split.chi_minus.tolist() == [0.0, 2.0, 0.0]
        assert split.net.tolist() == [1.0, -2.0, 0.0]

    def test_ces_flows(self):
        """Test sellers charge and buyers discharge the store."""
        flows = ces_flows(np.array([[1.0, -1.0], [0.5, -2.0]]), [0.0, 1.0], [0.25, 0.0])

        assert flows.chi_plus.tolist() == [1.5, 1.0]
        assert flows.chi_minus.tolist() == [0.25, 3.0]

    def test_complementarity(self):
        """Test simultaneous charge and discharge is measured and reported."""
        assert complementarity_violation([1.0, 0.0], [0.0, 2.0]) == 0.0
        assert complementarity_violation([1.0, 0.5], [0.2, 2.0]) == 0.5
        assert complementarity_violation([], []) == 0.0
        assert check_complementarity([1.0], [0.0], "l_Q") is None
        assert "l_Q" in check_complementarity([1.0], [1.0], "l_Q")


class TestLinearity:
    """Tests for the affine structure of the charge dynamics."""

    def test_superposition(self, rng):
        """Test trajectories add up over initial charges and flows."""
        params = CesParams(Q_M=100.0, q0=0.0, alpha=0.95, beta_plus=0.9, beta_minus=1.1)
        f1 = FlowSplit(rng.uniform(0, 2, 12), rng.uniform(0, 2, 12))
        f2 = FlowSplit(rng.uniform(0, 2, 12), rng.uniform(0, 2, 12))
        both = FlowSplit(f1.chi_plus + f2.chi_plus, f1.chi_minus + f2.chi_minus)

        q1 = charge_trajectory(3.0, f1, params).q
        q2 = charge_trajectory(4.0, f2, params).q
        assert np.allclose(charge_trajectory(7.0, both, params).q, q1 + q2)

    def test_scaling(self, rng):
        """Test scaling q0 and the flows scales the trajectory."""
        params = CesParams(Q_M=100.0, q0=0.0, alpha=0.9, beta_plus=0.95, beta_minus=1.05)
        flows = FlowSplit(rng.uniform(0, 2, 8), rng.uniform(0, 2, 8))
        scaled = FlowSplit(2.5 * flows.chi_plus, 2.5 * flows.chi_minus)

        assert np.allclose(
            charge_trajectory(10.0, scaled, params).q,
            2.5 * charge_trajectory(4.0, flows, params).q,
        )

    def test_lossless_conservation(self, rng):
        """Test an ideal store ends at q0 plus the net flow."""
        params = CesParams(Q_M=1000.0, q0=50.0)
        flows = FlowSplit(rng.uniform(0, 3, 48), rng.uniform(0, 3, 48))
        traj = charge_trajectory(50.0, flows, params)

        assert traj.q[-1] == pytest.approx(50.0 + float(np.sum(flows.net)), rel=1e-12)
        assert traj.continuity_residual == pytest.approx(abs(float(np.sum(flows.net))))

    def test_round_trip_loses_energy(self):
        """Test charging then discharging the same grid-side energy drains a lossy store."""
        params = CesParams(Q_M=20.0, q0=10.0, alpha=1.0, beta_plus=0.9, beta_minus=1.1)
        flows = FlowSplit(np.array([2.0, 0.0]), np.array([0.0, 2.0]))
        traj = charge_trajectory(10.0, flows, params)

        assert traj.q.tolist() == pytest.approx([10.0, 11.8, 9.6])

    def test_leakage_decays_idle_charge(self):
        """Test an idle store decays geometrically."""
        params = CesParams(Q_M=20.0, q0=16.0, alpha=0.5)
        traj = charge_trajectory(16.0, FlowSplit(np.zeros(3), np.zeros(3)), params)

        assert traj.q.tolist() == pytest.approx([16.0, 8.0, 4.0, 2.0])

    def test_tolerance_is_relative_to_capacity(self):
        """Test a tiny overshoot passes only within 1e-9 of the capacity."""
        params = CesParams(Q_M=80.0, q0=20.0)
        inside = ChargeTrajectory(np.array([20.0, 80.0 + 5e-8, 20.0]), True, 0.0)
        outside = ChargeTrajectory(np.array([20.0, 80.0 + 2e-7, 20.0]), True, 0.0)

        assert check_feasible(inside, params).capacity_ok
        assert not check_feasible(outside, params).capacity_ok
