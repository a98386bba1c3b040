"""Backward induction on a time x wealth grid and forward simulation.

Within a step the objective

    a1 U(c) + a2 B(t, Z(w, p)) + a3 V(t + dt, w (1 + r dt) + (y - c - p) dt)

is jointly concave in (c, p): the legacy Z is concave and piecewise linear
in p (slope 1/eta above zero, 1/theta below).  For a fixed total outlay
s = c + p the best split has a closed form in each regime, so every node
reduces to a one-dimensional concave search over s, done by golden section
for all nodes of a slice at once.

Utility is optimised without the constant -1/(1 - sigma) of U; the constant
is carried separately (``Solution.offsets``) so values near the optimum keep
their floating-point resolution.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.interpolate import PchipInterpolator

from .loads import LoadSchedule
from .mortality import GompertzParams
from .preferences import LEGACY_EPS, Preferences
from .profiles import IncomeProfile, published_income

log = logging.getLogger(__name__)

INV_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
MAX_AGE = 110.0
PROFILE_START_AGE = 25.0
# smallest consumption rate the search will consider, dollars/year
MIN_CONSUMPTION = 1.0


class InfeasibleError(RuntimeError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class SolverConfig:
    horizon: float | None = None  # defaults to MAX_AGE - initial age
    dt: float = 0.05
    nodes: int = 400
    w_max: float = 3e6
    interpolation: Literal["pchip", "linear"] = "pchip"
    control_tolerance: float = 1e-8
    gauss_order: int = 16
    borrowing_share: float = 0.9
    # grid floor leaves room to consume this share of income while borrowing
    boundary_consumption_share: float = 0.05
    # "start": eta, theta at the start of each step; "step-average": hazard
    # averaged over the step with the same survival weights as a2 / a1
    rate_evaluation: Literal["start", "step-average"] = "start"

    def __post_init__(self):
        if self.dt <= 0 or self.nodes < 4:
            raise ValueError("need dt > 0 and at least 4 wealth nodes")
        if self.rate_evaluation not in ("start", "step-average"):
            raise ValueError(f"unknown rate evaluation {self.rate_evaluation!r}")
        if self.interpolation not in ("pchip", "linear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")

    def steps(self, horizon: float) -> int:
        n = horizon / self.dt
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"dt={self.dt} does not divide the horizon {horizon}")
        return int(round(n))


@dataclass(frozen=True)
class Model:
    """Everything the dynamic program needs, in scenario time t (years from x)."""

    mortality: GompertzParams = field(default_factory=GompertzParams)
    prefs: Preferences = field(default_factory=Preferences)
    schedule: LoadSchedule = field(default_factory=LoadSchedule)
    income: IncomeProfile = field(default_factory=published_income)

    @property
    def initial_age(self) -> float:
        return self.mortality.x

    def profile_time(self, t):
        return np.asarray(t, float) + self.mortality.x - PROFILE_START_AGE

    def income_rate(self, t):
        return self.income(self.profile_time(t))

    def shift(self, t):
        return self.prefs.shift(self.profile_time(t))

    def legacy_floor(self, t):
        return self.prefs.legacy_floor(self.profile_time(t))

    def eta(self, t):
        return self.mortality.hazard(t) * self.schedule.kappa_ins

    def theta(self, t):
        return self.mortality.hazard(t) / self.schedule.kappa_ann

    def bequest(self, t, z):
        """Bequest utility; -inf outside its domain instead of raising."""
        pb, sigma = self.prefs.phi_bar, self.prefs.sigma
        arg = pb * self.shift(t) + np.asarray(z, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = pb**sigma * arg ** (1.0 - sigma) / (1.0 - sigma)
        return np.where(arg > 0, out, -np.inf)


@dataclass(frozen=True)
class StepCoefficients:
    a1: float
    a2: float
    a3: float


@lru_cache(maxsize=8)
def _gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def step_coefficients(t0: float, dt: float, mortality, beta: float, order: int = 16) -> StepCoefficients:
    """Discounted conditional survival/density weights over [t0, t0 + dt].

    ``mortality`` needs ``hazard`` and ``cumulative_hazard``.
    """
    x, w = _gauss_legendre(order)
    s = 0.5 * dt * (x + 1.0)
    w = 0.5 * dt * w
    h0 = mortality.cumulative_hazard(t0)
    surv = np.exp(h0 - mortality.cumulative_hazard(t0 + s))
    disc = np.exp(-beta * s)
    a1 = float(np.sum(w * disc * surv))
    a2 = float(np.sum(w * disc * mortality.hazard(t0 + s) * surv))
    a3 = float(np.exp(-beta * dt + h0 - mortality.cumulative_hazard(t0 + dt)))
    return StepCoefficients(a1, a2, a3)


class ValueInterpolant:
    """V(t_{i+1}, .) from node values; linear extrapolation above the grid."""

    def __init__(self, grid: np.ndarray, values: np.ndarray, method: str = "pchip"):
        self.grid = np.asarray(grid, float)
        self.values = np.asarray(values, float)
        self.method = method
        if method == "pchip":
            self._f = PchipInterpolator(self.grid, self.values, extrapolate=False)
        self.top_slope = (self.values[-1] - self.values[-2]) / (self.grid[-1] - self.grid[-2])

    @property
    def lower(self) -> float:
        return float(self.grid[0])

    def __call__(self, w):
        w = np.asarray(w, float)
        inside = np.clip(w, self.grid[0], self.grid[-1])
        if self.method == "pchip":
            v = self._f(inside)
        else:
            v = np.interp(inside, self.grid, self.values)
        v = np.where(w > self.grid[-1], self.values[-1] + self.top_slope * (w - self.grid[-1]), v)
        return np.where(w < self.grid[0] - 1e-9 * max(1.0, abs(self.grid[0])), -np.inf, v)


class TerminalValue:
    def __init__(self, model: Model, horizon: float, lower: float):
        self.model, self.horizon, self.lower = model, horizon, lower

    def __call__(self, w):
        w = np.asarray(w, float)
        return np.where(w >= self.lower, self.model.bequest(self.horizon, w), -np.inf)


@dataclass
class NodeSolution:
    consumption: np.ndarray
    premium: np.ndarray
    value: np.ndarray  # without the utility constant
    feasible: np.ndarray


def step_rates(model: Model, t: float, coeffs: StepCoefficients, rate_evaluation: str = "start"):
    """(eta, theta) applied over the step starting at t."""
    eta, theta = float(model.eta(t)), float(model.theta(t))
    if rate_evaluation == "step-average" and coeffs.a1 > 0:
        lam = coeffs.a2 / coeffs.a1
        eta, theta = lam * model.schedule.kappa_ins, lam / model.schedule.kappa_ann
    return eta, theta


def _step_inputs(model: Model, t: float, coeffs: StepCoefficients, rate_evaluation: str = "start"):
    prefs = model.prefs
    eta, theta = step_rates(model, t, coeffs, rate_evaluation)
    return dict(
        sigma=prefs.sigma, pb=prefs.phi_bar, r=prefs.r,
        eta=eta, theta=theta,
        shift=float(model.shift(t)),
        floor=float(model.legacy_floor(t)) + LEGACY_EPS,
        y=float(model.income_rate(t)),
        a1=coeffs.a1, a2=coeffs.a2, a3=coeffs.a3,
    )


def _min_premium(w, floor, eta, theta):
    gap = floor - w
    return np.where(gap > 0, eta * gap, theta * gap)


def _best_premium(s, w, inp):
    """Premium rate maximising a1 U(s - p) + a2 B(Z(w, p)) given outlay s."""
    p_min = _min_premium(w, inp["floor"], inp["eta"], inp["theta"])
    if inp["a2"] <= 0:
        return p_min
    base = inp["pb"] * inp["shift"] + w
    out = np.zeros_like(s)
    for k, keep in ((inp["eta"], lambda p: p > 0), (inp["theta"], lambda p: p < 0)):
        g = (inp["a1"] * k / inp["a2"]) ** (1.0 / inp["sigma"]) / inp["pb"]
        c = g * (base * k + s) / (k + g)
        p = s - c
        out = np.where((out == 0) & keep(p), p, out)
    return np.maximum(out, p_min)


def _objective(s, w, inp, dt, next_value):
    sigma = inp["sigma"]
    p = _best_premium(s, w, inp)
    c = np.maximum(s - p, MIN_CONSUMPTION * 1e-3)
    z = w + np.where(p > 0, p / inp["eta"], p / inp["theta"])
    w_next = w * (1.0 + inp["r"] * dt) + (inp["y"] - s) * dt
    val = inp["a1"] * c ** (1.0 - sigma) / (1.0 - sigma) + inp["a3"] * next_value(w_next)
    if inp["a2"] > 0:
        arg = inp["pb"] * inp["shift"] + z
        with np.errstate(divide="ignore", invalid="ignore"):
            beq = inp["pb"] ** sigma * arg ** (1.0 - sigma) / (1.0 - sigma)
        val = val + inp["a2"] * np.where(arg > 0, beq, -np.inf)
    return val, c, p


def optimize_nodes(model: Model, t: float, dt: float, wealth, next_value, next_lower: float,
                   coeffs: StepCoefficients, tol: float = 1e-4,
                   rate_evaluation: str = "start") -> NodeSolution:
    """Optimal (c, p) at each wealth level for the step starting at time t.

    ``next_lower`` is the smallest wealth the next slice accepts.  Nodes that
    cannot reach it with positive consumption are flagged infeasible and get
    value -inf.
    """
    w = np.atleast_1d(np.asarray(wealth, float))
    inp = _step_inputs(model, t, coeffs, rate_evaluation)
    s_lo = _min_premium(w, inp["floor"], inp["eta"], inp["theta"]) + MIN_CONSUMPTION
    s_hi = inp["y"] + (w * (1.0 + inp["r"] * dt) - next_lower) / dt
    feasible = s_hi > s_lo
    a = np.where(feasible, s_lo, s_hi)
    b = s_hi.copy()

    def f(s):
        return _objective(s, w, inp, dt, next_value)[0]

    width = np.max(b - a) if w.size else 0.0
    n_iter = int(np.ceil(np.log(tol / width) / np.log(INV_GOLDEN))) if width > tol else 0
    x1 = b - INV_GOLDEN * (b - a)
    x2 = a + INV_GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(n_iter):
        right = f2 > f1  # maximum lies in [x1, b]
        a = np.where(right, x1, a)
        b = np.where(right, b, x2)
        new = np.where(right, a + INV_GOLDEN * (b - a), b - INV_GOLDEN * (b - a))
        f_new = f(new)
        x1, f1, x2, f2 = (
            np.where(right, x2, new), np.where(right, f2, f_new),
            np.where(right, new, x1), np.where(right, f_new, f1),
        )
    s_best = np.where(f1 >= f2, x1, x2)
    # concave objective: the only other candidate is the borrowing limit
    v_best, c_best, p_best = _objective(s_best, w, inp, dt, next_value)
    v_hi, c_hi, p_hi = _objective(s_hi, w, inp, dt, next_value)
    use_hi = v_hi > v_best
    value = np.where(use_hi, v_hi, v_best)
    c = np.where(use_hi, c_hi, c_best)
    p = np.where(use_hi, p_hi, p_best)
    value = np.where(feasible, value, -np.inf)
    return NodeSolution(c, p, value, feasible & np.isfinite(value))


@dataclass
class ValueSlice:
    index: int
    time: float
    grid: np.ndarray
    values: np.ndarray  # true value function V(t_i, w_j)
    consumption: np.ndarray
    premium: np.ndarray
    feasible: np.ndarray


@dataclass
class Solution:
    model: Model
    config: SolverConfig
    horizon: float
    times: np.ndarray
    coefficients: list
    slices: list  # index i holds the slice at times[i]
    offsets: np.ndarray  # utility constant carried per slice

    def value_function(self, i: int):
        """Interpolant of V(t_i, .) without the utility constant."""
        cache = self.__dict__.setdefault("_interpolants", {})
        if i not in cache:
            sl = self.slices[i]
            if i == len(self.times) - 1:
                cache[i] = TerminalValue(self.model, self.horizon, float(sl.grid[0]))
            else:
                ok = sl.feasible
                cache[i] = ValueInterpolant(sl.grid[ok], sl.values[ok] - self.offsets[i], self.config.interpolation)
        return cache[i]

    def lower_bound(self, i: int) -> float:
        sl = self.slices[i]
        return float(sl.grid[sl.feasible][0])

    def controls(self, i: int, wealth) -> NodeSolution:
        """Re-solve the step starting at times[i] for arbitrary wealth."""
        return optimize_nodes(self.model, self.times[i], self.config.dt, wealth, self.value_function(i + 1),
                              self.lower_bound(i + 1), self.coefficients[i], self._tol,
                              self.config.rate_evaluation)

    @property
    def _tol(self) -> float:
        return self.config.control_tolerance * 1e4


def human_capital(model: Model, times: np.ndarray, dt: float) -> np.ndarray:
    """Remaining income discounted at r, consistent with the Euler wealth step."""
    r = model.prefs.r
    y = model.income_rate(times)
    h = np.zeros(len(times))
    for i in range(len(times) - 2, -1, -1):
        h[i] = (h[i + 1] + y[i] * dt) / (1.0 + r * dt)
    return h


def _feasibility_floor(model: Model, t: float, dt: float, next_lower: float, consumption: float) -> float:
    """Least wealth that can consume ``consumption``, keep the legacy floor and reach ``next_lower``."""
    r = model.prefs.r
    y = float(model.income_rate(t))
    floor = float(model.legacy_floor(t)) + LEGACY_EPS
    growth = (1.0 + r * dt) / dt
    w_ins = (consumption - y + next_lower / dt + float(model.eta(t)) * floor) / (growth + float(model.eta(t)))
    if w_ins < floor:
        return w_ins
    return (consumption - y + next_lower / dt + float(model.theta(t)) * floor) / (growth + float(model.theta(t)))


def wealth_grids(model: Model, config: SolverConfig, times: np.ndarray) -> list[np.ndarray]:
    dt, horizon = config.dt, times[-1]
    n = len(times) - 1
    hc = human_capital(model, times, dt)
    r = model.prefs.r
    lower = np.empty(n + 1)
    lower[n] = float(model.legacy_floor(horizon)) + LEGACY_EPS
    for i in range(n - 1, -1, -1):
        c_edge = max(MIN_CONSUMPTION, config.boundary_consumption_share * float(model.income_rate(times[i])))
        w_feas = _feasibility_floor(model, times[i], dt, lower[i + 1], c_edge)
        lower[i] = max(w_feas, -config.borrowing_share * hc[i])
    grids = []
    for i, t in enumerate(times):
        upper = max(config.w_max * np.exp(r * (horizon - t)), lower[i] + 1.0)
        u = np.linspace(0.0, np.sqrt(upper - lower[i]), config.nodes)
        grids.append(lower[i] + u**2)
    return grids


def backward_induction(model: Model, config: SolverConfig | None = None) -> Solution:
    config = config or SolverConfig()
    horizon = config.horizon if config.horizon is not None else MAX_AGE - model.initial_age
    n = config.steps(horizon)
    dt = config.dt
    times = np.linspace(0.0, horizon, n + 1)
    prefs = model.prefs
    coeffs = [step_coefficients(times[i], dt, model.mortality, prefs.beta, config.gauss_order) for i in range(n)]
    grids = wealth_grids(model, config, times)

    utility_const = -1.0 / (1.0 - prefs.sigma)
    offsets = np.zeros(n + 1)
    for i in range(n - 1, -1, -1):
        offsets[i] = coeffs[i].a1 * utility_const + coeffs[i].a3 * offsets[i + 1]

    slices: list = [None] * (n + 1)
    terminal = model.bequest(horizon, grids[n])
    slices[n] = ValueSlice(n, horizon, grids[n], terminal, np.full(len(terminal), np.nan),
                           np.full(len(terminal), np.nan), np.isfinite(terminal))
    next_value = TerminalValue(model, horizon, float(grids[n][0]))
    next_lower = float(grids[n][0])
    tol = config.control_tolerance * 1e4
    for i in range(n - 1, -1, -1):
        sol = optimize_nodes(model, times[i], dt, grids[i], next_value, next_lower, coeffs[i], tol,
                             config.rate_evaluation)
        if not sol.feasible.any():
            raise InfeasibleError(f"every wealth node is infeasible at t={times[i]:g}", step=i)
        if not sol.feasible.all():
            log.debug("step %d: %d infeasible nodes", i, int((~sol.feasible).sum()))
        slices[i] = ValueSlice(i, times[i], grids[i], sol.value + offsets[i], sol.consumption, sol.premium,
                               sol.feasible)
        ok = sol.feasible
        next_value = ValueInterpolant(grids[i][ok], sol.value[ok], config.interpolation)
        next_lower = float(grids[i][ok][0])
    return Solution(model, config, horizon, times, coeffs, slices, offsets)


@dataclass
class Trajectory:
    time: np.ndarray
    age: np.ndarray
    wealth: np.ndarray  # length N + 1, last entry is W(T)
    consumption: np.ndarray
    premium: np.ndarray
    sum_insured: np.ndarray
    legacy: np.ndarray
    income: np.ndarray
    dt: float

    def to_rows(self):
        for k in range(len(self.premium)):
            yield dict(age=self.age[k], wealth=self.wealth[k], income=self.income[k],
                       consumption=self.consumption[k], premium=self.premium[k],
                       sum_insured=self.sum_insured[k], legacy=self.legacy[k])


def forward_simulate(solution: Solution, w0: float) -> Trajectory:
    """Roll wealth forward, re-optimising the controls at realised wealth."""
    model, dt = solution.model, solution.config.dt
    r = model.prefs.r
    times = solution.times
    n = len(times) - 1
    wealth = np.empty(n + 1)
    c = np.empty(n)
    p = np.empty(n)
    wealth[0] = w0
    for i in range(n):
        sol = solution.controls(i, wealth[i])
        if not sol.feasible[0]:
            raise InfeasibleError(f"wealth {wealth[i]:.2f} is infeasible at step {i} (t={times[i]:g})", step=i)
        c[i], p[i] = sol.consumption[0], sol.premium[0]
        y = float(model.income_rate(times[i]))
        wealth[i + 1] = wealth[i] * (1.0 + r * dt) + (y - c[i] - p[i]) * dt
    t = times[:-1]
    rates = [step_rates(model, times[i], solution.coefficients[i], solution.config.rate_evaluation)
             for i in range(n)]
    eta, theta = np.array([e for e, _ in rates]), np.array([h for _, h in rates])
    insured = np.where(p > 0, p / eta, np.where(p < 0, p / theta, 0.0))
    return Trajectory(times, model.initial_age + times, wealth, c, p, insured, wealth[:-1] + insured,
                      model.income_rate(t), dt)


@dataclass(frozen=True)
class Phase:
    kind: Literal["insurance", "none", "annuity"]
    start_age: float
    end_age: float

    @property
    def length(self) -> float:
        return self.end_age - self.start_age


def participation_report(traj: Trajectory, tolerance: float = 1.0) -> list[Phase]:
    """Maximal age intervals of insurance (p > tol), annuities (p < -tol) or neither.

    Each step covers [age_i, age_i + dt), so intervals end where the next
    phase starts (or at the horizon).
    """
    p = traj.premium
    kinds = np.where(p > tolerance, "insurance", np.where(p < -tolerance, "annuity", "none"))
    phases = []
    start = 0
    for k in range(1, len(kinds) + 1):
        if k == len(kinds) or kinds[k] != kinds[start]:
            end_age = traj.age[k] if k < len(traj.age) else traj.age[-1]
            phases.append(Phase(str(kinds[start]), float(traj.age[start]), float(end_age)))
            start = k
    return phases


def non_participation_intervals(traj: Trajectory, tolerance: float = 1.0) -> list[tuple[float, float]]:
    return [(ph.start_age, ph.end_age) for ph in participation_report(traj, tolerance) if ph.kind == "none"]


def annuity_demand(traj: Trajectory, age: float) -> float:
    """Annuity income bought at ``age`` in dollars/year (0 when not annuitising)."""
    k = int(np.argmin(np.abs(traj.age[:-1] - age)))
    if abs(traj.age[k] - age) > 1e-9:
        raise ValueError(f"age {age} is not on the time grid")
    return float(max(-traj.premium[k], 0.0))
