"""Consumption and bequest utility, the legacy map and admissibility floors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .profiles import DependencyProfile, default_dependency, phi_bar

# numerical closure of the strict legacy inequality, dollars
LEGACY_EPS = 0.01


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Preferences:
    r: float = 0.032
    sigma: float = 2.0
    beta: float = -np.log(0.975)
    phi: float = 0.95
    bequest_mode: Literal["crra", "hara"] = "hara"
    dependency: Optional[DependencyProfile] = None

    def __post_init__(self):
        if not self.sigma > 0 or self.sigma == 1:
            raise ValueError("sigma must be positive and different from 1")
        if not 0 < self.phi < 1:
            raise ValueError("phi must lie in (0, 1)")
        if self.bequest_mode not in ("crra", "hara"):
            raise ValueError(f"unknown bequest mode {self.bequest_mode!r}")
        if self.bequest_mode == "hara" and self.dependency is None:
            object.__setattr__(self, "dependency", default_dependency(self.phi))

    @property
    def phi_bar(self) -> float:
        return phi_bar(self.phi)

    def shift(self, t):
        """c_b at profile time t (years since age 25); zero for CRRA bequests."""
        if self.bequest_mode == "crra":
            return np.zeros_like(np.asarray(t, float))
        return self.dependency(t)

    def legacy_floor(self, t):
        """Smallest admissible legacy, max{0, -phi_bar * c_b(t)}."""
        return np.maximum(0.0, -self.phi_bar * self.shift(t))


def consumption_utility(c, sigma: float = 2.0):
    c = np.asarray(c, float)
    if np.any(c <= 0):
        raise DomainError("consumption must be positive")
    return (c ** (1.0 - sigma) - 1.0) / (1.0 - sigma)


def bequest_utility(t, z, prefs: Preferences):
    """HARA bequest utility at profile time t and legacy z."""
    pb, sigma = prefs.phi_bar, prefs.sigma
    arg = pb * prefs.shift(t) + np.asarray(z, float)
    if np.any(arg <= 0):
        raise DomainError("legacy below the bequest-utility domain")
    return pb**sigma * arg ** (1.0 - sigma) / (1.0 - sigma)


def bequest_marginal_utility(t, z, prefs: Preferences):
    pb = prefs.phi_bar
    arg = pb * prefs.shift(t) + np.asarray(z, float)
    if np.any(arg <= 0):
        raise DomainError("legacy below the bequest-utility domain")
    return pb**prefs.sigma * arg ** (-prefs.sigma)


@dataclass(frozen=True)
class LegacyInputs:
    wealth: float
    premium_rate: float
    eta: float
    theta: float


def legacy(wealth, premium_rate, eta, theta):
    """Legacy left at death: wealth plus the sum insured (negative for annuities)."""
    p = np.asarray(premium_rate, float)
    sum_insured = np.where(p > 0, p / eta, np.where(p < 0, p / theta, 0.0))
    return np.asarray(wealth, float) + sum_insured


@dataclass(frozen=True)
class FeasibleRegion:
    """Premium rates p >= p_min keep the legacy at or above ``floor`` + eps."""

    floor: float
    p_min: float

    @property
    def insurance_required(self) -> bool:
        return self.p_min > 0


def admissible_bounds(t, wealth: float, prefs: Preferences, eta: float, theta: float,
                      eps: float = LEGACY_EPS) -> FeasibleRegion:
    """Lower bound on the premium rate implied by the legacy constraint.

    Consumption only needs c > 0, so the premium is bounded below and free
    above; the budget is the solver's concern.
    """
    floor = float(prefs.legacy_floor(t))
    gap = floor + eps - wealth
    p_min = eta * gap if gap > 0 else theta * gap
    return FeasibleRegion(floor, float(p_min))
