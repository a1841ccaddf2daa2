"""
Domain data classes for the community energy storage trading simulator.

All energy series are per-slot energies in kWh and all prices are cents/kWh.
Series are stored as float numpy arrays; the classes are plain value types
and none of them mutates its inputs.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np


def as_series(values, name: str = "series") -> np.ndarray:
    """Return ``values`` as a one-dimensional float array."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """H slots of length dt hours with a half-open peak tariff window."""

    H: int
    dt: float = 0.5
    peak_window: Tuple[int, int] = (0, 0)

    def peak_mask(self) -> np.ndarray:
        """Boolean mask of the slots inside the peak window."""
        mask = np.zeros(self.H, dtype=bool)
        start, stop = self.peak_window
        mask[start:stop] = True
        return mask

    def to_dict(self) -> Dict[str, Any]:
        return {"slots": self.H, "slot_hours": self.dt, "peak_window": list(self.peak_window)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TimeGrid":
        return cls(
            H=int(data["slots"]),
            dt=float(data.get("slot_hours", 0.5)),
            peak_window=tuple(int(v) for v in data.get("peak_window", (0, 0))),
        )


@dataclass(eq=False)
class UserProfile:
    """Demand e_n(t) and PV generation g_n(t) of one household."""

    id: int
    demand: np.ndarray
    generation: np.ndarray
    participating: bool = True

    def __post_init__(self):
        self.demand = as_series(self.demand, "demand")
        self.generation = as_series(self.generation, "generation")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "demand": self.demand.tolist(),
            "generation": self.generation.tolist(),
            "participating": self.participating,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "UserProfile":
        demand = data["demand"]
        generation = data.get("generation") or [0.0] * len(demand)
        return cls(
            id=int(data["id"]),
            demand=demand,
            generation=generation,
            participating=bool(data.get("participating", True)),
        )


@dataclass(eq=False)
class SurplusView:
    """Net generation s_n(t) = g_n(t) - e_n(t) of one household."""

    surplus: np.ndarray


@dataclass(frozen=True)
class SlotPartition:
    """Surplus users S(t) and deficit users D(t) by user id."""

    surplus_users: Tuple[int, ...]
    deficit_users: Tuple[int, ...]


@dataclass(eq=False)
class Tariff:
    """Quadratic grid price p(t) = phi_t * L(t) + delta_t."""

    phi: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        self.phi = as_series(self.phi, "phi")
        self.delta = as_series(self.delta, "delta")

    def to_dict(self) -> Dict[str, Any]:
        return {"phi": self.phi.tolist(), "delta": self.delta.tolist()}


@dataclass(frozen=True)
class StageCostCoefficients:
    """C_n(t) = K2 l^2 + K1 l + K0 as a function of the user's grid load."""

    K2: float
    K1: float
    K0: float

    def evaluate(self, l: float) -> float:
        return self.K2 * l * l + self.K1 * l + self.K0


@dataclass(eq=False)
class CostBreakdown:
    """Per-slot grid and CES payments of one user."""

    user_id: int
    grid_component: np.ndarray
    ces_component: np.ndarray

    @property
    def per_slot(self) -> np.ndarray:
        return self.grid_component + self.ces_component

    @property
    def total(self) -> float:
        return float(np.sum(self.grid_component + self.ces_component))


@dataclass(frozen=True)
class CesParams:
    """Community energy storage device parameters."""

    Q_M: float
    q0: float
    alpha: float = 1.0
    beta_plus: float = 1.0
    beta_minus: float = 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "capacity": self.Q_M,
            "initial_charge": self.q0,
            "alpha": self.alpha,
            "beta_plus": self.beta_plus,
            "beta_minus": self.beta_minus,
        }


@dataclass(eq=False)
class FlowSplit:
    """Charging chi+ and discharging chi- flows, both non-negative."""

    chi_plus: np.ndarray
    chi_minus: np.ndarray

    @property
    def net(self) -> np.ndarray:
        return self.chi_plus - self.chi_minus


@dataclass(eq=False)
class CapacityOperators:
    """eta, Psi and beta of the vector form of the charge recurrence."""

    eta: np.ndarray
    psi: np.ndarray
    beta_vec: Tuple[float, float]


@dataclass(eq=False)
class ChargeTrajectory:
    """q(0..H) with its capacity and continuity verdicts."""

    q: np.ndarray
    capacity_ok: bool
    continuity_residual: float


@dataclass(eq=False)
class FeasibilityVerdict:
    """Outcome of checking a charge trajectory against Q_M and q(H) = q(0)."""

    capacity_ok: bool
    continuity_ok: bool
    continuity_residual: float
    capacity_violations: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.capacity_ok and self.continuity_ok


@dataclass(eq=False)
class Scenario:
    """A complete day-ahead problem instance."""

    grid: TimeGrid
    users: List[UserProfile]
    l_P: np.ndarray
    tariff: Tariff
    ces: CesParams
    L_max: float

    def __post_init__(self):
        self.l_P = as_series(self.l_P, "l_P")

    @property
    def H(self) -> int:
        return self.grid.H

    @property
    def participants(self) -> List[UserProfile]:
        return [u for u in self.users if u.participating]

    @property
    def non_participants(self) -> List[UserProfile]:
        return [u for u in self.users if not u.participating]

    @property
    def I(self) -> int:  # noqa: E743
        return len(self.participants)

    @property
    def participant_ids(self) -> List[int]:
        return [u.id for u in self.participants]

    def surplus_matrix(self) -> np.ndarray:
        """I x H matrix of participant surpluses s_n(t)."""
        participants = self.participants
        if not participants:
            return np.zeros((0, self.H))
        return np.vstack([u.generation - u.demand for u in participants])

    def user(self, user_id: int) -> UserProfile:
        for u in self.users:
            if u.id == user_id:
                return u
        raise KeyError(user_id)


@dataclass(eq=False)
class OperatorSignal:
    """Leader decision rho = [a, l_Q] with l_Q stored sign-split."""

    a: np.ndarray
    l_Q_plus: np.ndarray
    l_Q_minus: np.ndarray

    def __post_init__(self):
        self.a = as_series(self.a, "a")
        self.l_Q_plus = as_series(self.l_Q_plus, "l_Q_plus")
        self.l_Q_minus = as_series(self.l_Q_minus, "l_Q_minus")

    @property
    def l_Q(self) -> np.ndarray:
        return self.l_Q_plus - self.l_Q_minus

    @classmethod
    def from_signed(cls, a, l_Q) -> "OperatorSignal":
        l_Q = as_series(l_Q, "l_Q")
        return cls(a=a, l_Q_plus=np.maximum(l_Q, 0.0), l_Q_minus=np.maximum(-l_Q, 0.0))

    def vector(self) -> np.ndarray:
        """rho stacked as [a; l_Q] for the relative-change criterion."""
        return np.concatenate([self.a, self.l_Q])


@dataclass(eq=False)
class TradeProfile:
    """I x H matrix of participant CES trades x_n(t); columns are slots."""

    x: np.ndarray
    user_ids: Tuple[int, ...] = ()

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))

    @property
    def plus(self) -> np.ndarray:
        return np.maximum(self.x, 0.0)

    @property
    def minus(self) -> np.ndarray:
        return np.maximum(-self.x, 0.0)

    @property
    def aggregate(self) -> np.ndarray:
        """X_A(t), the community total per slot."""
        return self.x.sum(axis=0)


@dataclass(eq=False)
class NashSlotResult:
    """Stage-game equilibrium x*_n(t) = s_n(t) - eps(t)."""

    x_star: np.ndarray
    epsilon: float


@dataclass(frozen=True)
class EpsilonBox:
    """Admissible range of the common deviation eps(t)."""

    lower: float
    upper: float
    case: str

    def contains(self, epsilon: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= epsilon <= self.upper + tol


@dataclass(frozen=True)
class CompetitiveObjectiveCoefficients:
    """Per-slot leader objective lambda a^2 + mu a + nu l_Q^2 + xi l_Q."""

    lambda_t: float
    mu_t: float
    nu_t: float
    xi_t: float

    def evaluate(self, a: float, l_Q: float) -> float:
        return self.lambda_t * a * a + self.mu_t * a + self.nu_t * l_Q * l_Q + self.xi_t * l_Q


@dataclass(frozen=True)
class BenevolentObjectiveCoefficients:
    """Per-slot benevolent objective gamma1 l_Q^2 + gamma2 l_Q + gamma3."""

    gamma1: float
    gamma2: float
    gamma3: float

    def evaluate(self, l_Q: float) -> float:
        return self.gamma1 * l_Q * l_Q + self.gamma2 * l_Q + self.gamma3


@dataclass(frozen=True)
class RoundRecord:
    """One round of the leader/follower iteration."""

    round: int
    revenue: float
    relative_change: float


@dataclass(eq=False)
class StackelbergOutcome:
    """Solution of one CES operator model."""

    model: str
    signal: OperatorSignal
    trades: TradeProfile
    trajectory: ChargeTrajectory
    prices: np.ndarray
    grid_load: np.ndarray
    revenue: float
    iterations: List[RoundRecord] = field(default_factory=list)
    converged: bool = True
    optimality_gap: Optional[float] = None
    diagnostics: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class ParetoVerdict:
    """Zero-sum check of load-preserving perturbations around an equilibrium."""

    samples: int
    max_residual: float
    zero_sum: bool
    worst_slot: int = -1
    worst_theta: float = 0.0


@dataclass(eq=False)
class OutcomeReport:
    """Evaluated outcome: loads, prices, every user's costs and the CES revenue."""

    model: str
    signal: OperatorSignal
    trades: TradeProfile
    trajectory: ChargeTrajectory
    grid_load: np.ndarray
    prices: np.ndarray
    user_costs: List[CostBreakdown]
    revenue: float
    iterations: List[RoundRecord] = field(default_factory=list)
    converged: bool = True
    diagnostics: List[str] = field(default_factory=list)

    @property
    def community_payment(self) -> float:
        """Total paid by the community (users and CES) to the grid."""
        return float(np.sum(self.prices * self.grid_load))

    def cost_of(self, user_id: int) -> CostBreakdown:
        for cost in self.user_costs:
            if cost.user_id == user_id:
                return cost
        raise KeyError(user_id)


@dataclass(frozen=True)
class ComparisonRow:
    """One row of the three-model comparison table."""

    model: str
    participation_pct: float
    avg_pu_saving_pct: float
    ces_revenue: float
    community_benefit: float
    par_reduction_pct: float
    avg_npu_saving_pct: float = float("nan")
    avg_community_saving_pct: float = float("nan")
    benefit_share_pct: float = float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model,
            "participation_pct": self.participation_pct,
            "avg_pu_saving_pct": self.avg_pu_saving_pct,
            "avg_npu_saving_pct": self.avg_npu_saving_pct,
            "avg_community_saving_pct": self.avg_community_saving_pct,
            "ces_revenue": self.ces_revenue,
            "community_benefit": self.community_benefit,
            "benefit_share_pct": self.benefit_share_pct,
            "par_reduction_pct": self.par_reduction_pct,
        }


@dataclass(eq=False)
class SweepPoint:
    """Community benefit of each model at one storage capacity."""

    capacity: float
    community_benefit: Dict[str, float] = field(default_factory=dict)
