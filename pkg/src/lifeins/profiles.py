"""Age-earnings profile y(t) and age-dependency profile c_b(t).

Time t is measured in years since age 25, the start of working life.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_ANCHORS = ((0.0, 42_460.0), (10.0, 57_320.0), (25.0, 71_650.0), (40.0, 60_900.0))
RETIREMENT_TIME = 40.0
POST_RETIREMENT_INCOME = 24_360.0
LUXURY_SHIFT = 32_900.0
# decimals of the published log-quadratic coefficients (t^2, t, 1)
PUBLISHED_DECIMALS = (6, 4, 2)


@dataclass(frozen=True)
class IncomeProfile:
    coefficients: tuple[float, float, float]  # (a2, a1, a0) of ln y
    retirement_time: float = RETIREMENT_TIME
    post_retirement_income: float = POST_RETIREMENT_INCOME

    def working_income(self, t):
        return np.exp(np.polyval(self.coefficients, np.asarray(t, float)))

    def __call__(self, t):
        t = np.asarray(t, float)
        return np.where(t < self.retirement_time, self.working_income(t), self.post_retirement_income)

    @property
    def peak_time(self) -> float:
        a2, a1, _ = self.coefficients
        return -a1 / (2.0 * a2)

    def rounded(self, decimals=PUBLISHED_DECIMALS) -> "IncomeProfile":
        coeffs = tuple(round(c, d) for c, d in zip(self.coefficients, decimals))
        return IncomeProfile(coeffs, self.retirement_time, self.post_retirement_income)


def fit_income(anchors=DEFAULT_ANCHORS, retirement_time=RETIREMENT_TIME,
               post_retirement_income=POST_RETIREMENT_INCOME) -> IncomeProfile:
    """Least-squares quadratic in t fitted to log income at the anchor points."""
    anchors = np.asarray(anchors, float)
    if anchors.ndim != 2 or len(anchors) < 3:
        raise ValueError("need at least three (t, income) anchors")
    if np.any(anchors[:, 1] <= 0):
        raise ValueError("anchor incomes must be positive")
    coeffs = np.polyfit(anchors[:, 0], np.log(anchors[:, 1]), 2)
    return IncomeProfile(tuple(float(c) for c in coeffs), retirement_time, post_retirement_income)


def income(profile: IncomeProfile, t):
    return profile(t)


def published_income() -> IncomeProfile:
    """Income curve with the coefficients at their printed precision."""
    return fit_income().rounded()


@dataclass(frozen=True)
class DependencyProfile:
    """Clamped cubic spline through (0, c0), (knot, c_knot), (end, c_end), then flat.

    ``first`` holds (a3, a2, a1, a0) in powers of t; ``second`` the same in
    powers of (t - knot).
    """

    first: tuple[float, float, float, float]
    second: tuple[float, float, float, float]
    knot: float = 20.0
    end: float = 40.0
    plateau: float = LUXURY_SHIFT

    def __call__(self, t):
        t = np.asarray(t, float)
        return np.where(
            t < self.knot,
            np.polyval(self.first, t),
            np.where(t < self.end, np.polyval(self.second, t - self.knot), self.plateau),
        )

    def derivative(self, t):
        t = np.asarray(t, float)
        return np.where(
            t < self.knot,
            np.polyval(np.polyder(self.first), t),
            np.where(t < self.end, np.polyval(np.polyder(self.second), t - self.knot), 0.0),
        )

    def minimum(self) -> tuple[float, float]:
        """Location and value of the smallest interior stationary point."""
        best = (0.0, float(self(0.0)))
        for poly, offset, lo, hi in ((self.first, 0.0, 0.0, self.knot), (self.second, self.knot, self.knot, self.end)):
            for root in np.roots(np.polyder(poly)):
                if abs(root.imag) < 1e-12 and lo <= root.real + offset <= hi:
                    t = root.real + offset
                    if self(t) < best[1]:
                        best = (float(t), float(self(t)))
        return best


def phi_bar(phi: float) -> float:
    return phi / (1.0 - phi)


def build_dependency(c_knot: float, c_end: float = LUXURY_SHIFT, c0: float = 0.0,
                     knot: float = 20.0, end: float = 40.0) -> DependencyProfile:
    """Two cubics, zero slope at 0 and ``end``, C2 at the knot.

    Matching the second derivative at the knot is what makes the piecewise
    fit unique; it also reproduces the published coefficients.
    """
    if c0 == c_knot == c_end:
        return DependencyProfile((0.0, 0.0, 0.0, c0), (0.0, 0.0, 0.0, c0), knot, end, c_end)
    h1, h2 = knot, end - knot
    # unknowns: a3, a2 (first piece), e3, e2 (second piece), slope at the knot
    lhs = np.array([
        [h1**3, h1**2, 0, 0, 0],
        [3 * h1**2, 2 * h1, 0, 0, -1],
        [0, 0, h2**3, h2**2, h2],
        [0, 0, 3 * h2**2, 2 * h2, 1],
        [6 * h1, 2, 0, -2, 0],
    ], dtype=float)
    rhs = np.array([c_knot - c0, 0.0, c_end - c_knot, 0.0, 0.0])
    a3, a2, e3, e2, slope = np.linalg.solve(lhs, rhs)
    return DependencyProfile((a3, a2, 0.0, c0), (e3, e2, slope, c_knot), knot, end, c_end)


def default_dependency(phi: float = 0.95, income_profile: IncomeProfile | None = None,
                       ratio: float = 1.35) -> DependencyProfile:
    """Minimum bequest after 20 working years is ``ratio`` times income then."""
    income_profile = income_profile or published_income()
    c_knot = -ratio * float(income_profile(20.0)) / phi_bar(phi)
    return build_dependency(c_knot)


def dependency(profile: DependencyProfile, t):
    return profile(t)
