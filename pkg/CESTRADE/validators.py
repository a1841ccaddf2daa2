"""
Input validation utilities for the CESTRADE simulator.
Checks the invariants of scenario components and run settings before any
model sees them.
"""

import math
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .exceptions import ScenarioError, ValidationError
from .models import CesParams, Scenario, Tariff, TimeGrid, UserProfile

MODEL_NAMES = ("competitive", "benevolent", "centralized", "baseline")


class SeriesValidator:
    """Validates per-slot numeric series."""

    @classmethod
    def validate_series(
        cls,
        values,
        length: Optional[int] = None,
        name: str = "series",
        non_negative: bool = False,
    ) -> np.ndarray:
        """
        Validate a one-dimensional finite series.

        Args:
            values: Sequence or array to validate
            length: Required length, if any
            name: Field name used in error messages
            non_negative: Whether negative entries are rejected

        Returns:
            The series as a float array

        Raises:
            ValidationError: If the series is malformed
        """
        try:
            arr = np.asarray(values, dtype=float)
        except (TypeError, ValueError):
            raise ValidationError(f"{name} must be numeric", field=name, value=values)

        if arr.ndim != 1:
            raise ValidationError(
                f"{name} must be one-dimensional", field=name, value=arr.shape
            )

        if length is not None and arr.shape[0] != length:
            raise ValidationError(
                f"{name} has length {arr.shape[0]}, expected {length}",
                field=name,
                value=arr.shape[0],
            )

        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{name} contains non-finite values", field=name)

        if non_negative and np.any(arr < 0):
            slot = int(np.argmin(arr))
            raise ValidationError(
                f"{name} is negative at slot {slot} ({arr[slot]:.6g})",
                field=name,
                value=float(arr[slot]),
            )

        return arr


class ScenarioValidator:
    """Validates scenario components and whole scenarios."""

    @classmethod
    def validate_time_grid(cls, grid: TimeGrid) -> TimeGrid:
        """Check H >= 1, dt > 0 and that the peak window lies inside [0, H)."""
        if grid.H < 1:
            raise ScenarioError(f"slot count must be >= 1, got {grid.H}", invariant="H")
        if not grid.dt > 0:
            raise ScenarioError(f"slot length must be > 0, got {grid.dt}", invariant="dt")
        start, stop = grid.peak_window
        if not (0 <= start <= stop <= grid.H):
            raise ScenarioError(
                f"peak window {grid.peak_window} is not inside [0, {grid.H})",
                invariant="peak_window",
            )
        return grid

    @classmethod
    def validate_ces_params(cls, params: CesParams) -> CesParams:
        """Check the storage parameter ranges."""
        if not 0 < params.alpha <= 1:
            raise ScenarioError(f"alpha must be in (0, 1], got {params.alpha}", invariant="alpha")
        if not 0 < params.beta_plus <= 1:
            raise ScenarioError(
                f"beta_plus must be in (0, 1], got {params.beta_plus}", invariant="beta_plus"
            )
        if params.beta_minus < 1:
            raise ScenarioError(
                f"beta_minus must be >= 1, got {params.beta_minus}", invariant="beta_minus"
            )
        if params.Q_M < 0:
            raise ScenarioError(f"capacity must be >= 0, got {params.Q_M}", invariant="Q_M")
        if not 0 <= params.q0 <= params.Q_M:
            raise ScenarioError(
                f"initial charge {params.q0} outside [0, {params.Q_M}]", invariant="q0"
            )
        return params

    @classmethod
    def validate_tariff(cls, tariff: Tariff, H: int) -> Tariff:
        """Check phi > 0 and delta >= 0 on every slot."""
        SeriesValidator.validate_series(tariff.phi, H, "phi")
        SeriesValidator.validate_series(tariff.delta, H, "delta", non_negative=True)
        if np.any(tariff.phi <= 0):
            raise ScenarioError("phi must be strictly positive", invariant="phi")
        return tariff

    @classmethod
    def validate_user(cls, user: UserProfile, H: int) -> UserProfile:
        """Check series lengths, signs and the non-participant generation rule."""
        SeriesValidator.validate_series(user.demand, H, f"user {user.id} demand", True)
        SeriesValidator.validate_series(
            user.generation, H, f"user {user.id} generation", True
        )
        if not user.participating and np.any(user.generation != 0):
            raise ScenarioError(
                f"non-participating user {user.id} has PV generation",
                invariant="non_participant_generation",
            )
        return user

    @classmethod
    def validate_scenario(cls, scenario: Scenario) -> Scenario:
        """
        Validate every invariant of a scenario.

        Raises:
            ScenarioError: If any invariant is violated
            ValidationError: If a series is malformed
        """
        H = scenario.grid.H
        cls.validate_time_grid(scenario.grid)
        cls.validate_ces_params(scenario.ces)
        cls.validate_tariff(scenario.tariff, H)

        ids = [u.id for u in scenario.users]
        if len(set(ids)) != len(ids):
            raise ScenarioError("user ids must be unique", invariant="user_ids")
        for user in scenario.users:
            cls.validate_user(user, H)

        if scenario.I == 0:
            raise ScenarioError(
                "at least one participating user is required", invariant="participants"
            )

        SeriesValidator.validate_series(scenario.l_P, H, "l_P", non_negative=True)

        baseline = np.sum(
            [u.demand - u.generation for u in scenario.participants], axis=0
        ) + scenario.l_P
        if not scenario.L_max > float(np.max(baseline)):
            raise ScenarioError(
                f"L_max {scenario.L_max:.6g} does not exceed the baseline peak "
                f"{float(np.max(baseline)):.6g}",
                invariant="L_max",
            )
        return scenario


class ConfigValidator:
    """Validates run settings coming from the command line or YAML."""

    @classmethod
    def validate_fraction(cls, value, name: str = "participation") -> float:
        """Validate a participation fraction in (0, 1]."""
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"{name} must be a number", field=name, value=value)
        if not 0 < value <= 1:
            raise ValidationError(f"{name} must be in (0, 1]", field=name, value=value)
        return value

    @classmethod
    def validate_positive(cls, value, name: str, allow_zero: bool = False) -> float:
        """Validate a positive (or non-negative) finite number."""
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"{name} must be a number", field=name, value=value)
        if not math.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
            bound = ">= 0" if allow_zero else "> 0"
            raise ValidationError(f"{name} must be {bound}", field=name, value=value)
        return value

    @classmethod
    def validate_count(cls, value, name: str, minimum: int = 1) -> int:
        """Validate an integer count."""
        try:
            count = int(value)
        except (TypeError, ValueError):
            raise ValidationError(f"{name} must be an integer", field=name, value=value)
        if count != value and not isinstance(value, str):
            raise ValidationError(f"{name} must be an integer", field=name, value=value)
        if count < minimum:
            raise ValidationError(f"{name} must be >= {minimum}", field=name, value=value)
        return count

    @classmethod
    def validate_model(cls, name: str) -> List[str]:
        """Expand a model selection ('all' or one model name)."""
        if name == "all":
            return list(MODEL_NAMES)
        if name not in MODEL_NAMES:
            raise ValidationError(
                f"unknown model '{name}', expected one of {', '.join(MODEL_NAMES)} or all",
                field="model",
                value=name,
            )
        return [name]

    @classmethod
    def validate_float_list(
        cls, values: Iterable, name: str, allow_zero: bool = True, increasing: bool = False
    ) -> List[float]:
        """Validate a non-empty list of non-negative numbers."""
        values = list(values)
        if not values:
            raise ValidationError(f"{name} cannot be empty", field=name)
        result = [cls.validate_positive(v, name, allow_zero=allow_zero) for v in values]
        if increasing and any(b <= a for a, b in zip(result, result[1:])):
            raise ValidationError(
                f"{name} must be strictly increasing", field=name, value=result
            )
        return result

    @classmethod
    def validate_window(cls, window: Sequence, H: int) -> tuple:
        """Validate a half-open [start, stop) slot window."""
        try:
            start, stop = (int(v) for v in window)
        except (TypeError, ValueError):
            raise ValidationError(
                "peak window must be two slot indices", field="peak_window", value=window
            )
        if not 0 <= start <= stop <= H:
            raise ValidationError(
                f"peak window must lie inside [0, {H}]", field="peak_window", value=window
            )
        return (start, stop)
