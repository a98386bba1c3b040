"""Loaded life annuity / life insurance pricing under Gompertz mortality.

A load L on a product bought at the calibration age is turned into a
multiplicative distortion of the hazard: kappa_ins scales it up for life
insurance, 1/kappa_ann scales it down for annuities.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy import integrate, optimize

from .mortality import GompertzParams

DEFAULT_PRICING_RATE = 0.02
DEFAULT_CALIBRATION_AGE = 65.0
KAPPA_BRACKET = (1.0, 1e6)


class NoSolutionError(ValueError):
    pass


def gen_exp_integral(s: float, z: float) -> float:
    """Generalized integro-exponential E_s(z) = int_1^inf u^-s exp(-z u) du.

    Evaluated as z^(s-1) * int_z^inf v^-s exp(-v) dv.  The piece below 1 is
    integrated in log(v) so the power singularity near small z stays smooth.
    """
    return float(np.exp(-z) * scaled_exp_integral(s, z))


def scaled_exp_integral(s: float, z: float) -> float:
    """exp(z) * E_s(z), finite for large z where E_s underflows."""
    if not z > 0:
        raise ValueError(f"E_s(z) requires z > 0, got z={z}")
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=200)
    lower = max(z, 1.0)
    # v = lower + x keeps the tail integrand O(1) at its left end
    tail = integrate.quad(lambda x: (1.0 + x / lower) ** (-s) * np.exp(-x), 0.0, np.inf, **opts)[0]
    total = tail / z if z >= 1.0 else z ** (s - 1.0) * np.exp(z - 1.0) * tail
    if z < 1.0:
        head = integrate.quad(lambda w: np.exp((1.0 - s) * w - np.exp(w)), np.log(z), 0.0, **opts)[0]
        total += z ** (s - 1.0) * np.exp(z) * head
    return float(total)


@dataclass(frozen=True)
class EpvQuote:
    value: float
    kind: Literal["annuity", "insurance"]
    kappa: float


def _check_kappa(kappa):
    if kappa < 1:
        raise ValueError(f"loading factor must be >= 1, got {kappa}")


def annuity_epv(kappa: float, r: float, params: GompertzParams) -> EpvQuote:
    """Present value of $1/year paid for life, hazard divided by kappa."""
    _check_kappa(kappa)
    if not r > 0:
        raise ValueError("a perpetual life annuity needs a positive discount rate")
    c = np.exp((params.x - params.m) / params.b) / kappa
    value = params.b * scaled_exp_integral(1.0 + r * params.b, c)
    return EpvQuote(value, "annuity", kappa)


def insurance_epv(kappa: float, r: float, params: GompertzParams) -> EpvQuote:
    """Present value of $1 paid at death, hazard multiplied by kappa."""
    _check_kappa(kappa)
    if r < 0:
        raise ValueError("discount rate must be non-negative")
    c = np.exp((params.x - params.m) / params.b) * kappa
    value = c * scaled_exp_integral(r * params.b, c)
    return EpvQuote(value, "insurance", kappa)


def _solve_kappa(epv, load, r, params):
    if not 0 <= load < 1:
        raise ValueError(f"load must lie in [0, 1), got {load}")
    if load == 0:
        return 1.0
    fair = epv(1.0, r, params).value

    def resid(k):
        return (1.0 - load) * epv(k, r, params).value - fair

    lo, hi = KAPPA_BRACKET
    if resid(hi) < 0:
        raise NoSolutionError(f"no loading factor in [{lo:g}, {hi:g}] reproduces a load of {load:.2%}")
    return float(optimize.brentq(resid, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps))


def solve_kappa_ann(load: float, r: float = DEFAULT_PRICING_RATE, x: float = DEFAULT_CALIBRATION_AGE,
                    params: GompertzParams | None = None) -> float:
    """Loading factor kappa with (1 - L) * abar(kappa) = abar(1) at age x."""
    params = (params or GompertzParams()).at_age(x)
    return _solve_kappa(annuity_epv, load, r, params)


def solve_kappa_ins(load: float, r: float = DEFAULT_PRICING_RATE, x: float = DEFAULT_CALIBRATION_AGE,
                    params: GompertzParams | None = None) -> float:
    """Loading factor kappa with (1 - L) * Abar(kappa) = Abar(1) at age x."""
    params = (params or GompertzParams()).at_age(x)
    return _solve_kappa(insurance_epv, load, r, params)


@dataclass(frozen=True)
class LoadSchedule:
    """Premium-insurance ratios eta (insurance, ask) and theta (annuity, bid).

    ``base`` fixes the hazard; its reference age x is time zero for
    :meth:`eta` and :meth:`theta`.
    """

    kappa_ins: float = 1.0
    kappa_ann: float = 1.0
    pricing_rate: float = DEFAULT_PRICING_RATE
    calibration_age: float = DEFAULT_CALIBRATION_AGE
    base: GompertzParams = field(default_factory=GompertzParams)

    def __post_init__(self):
        _check_kappa(self.kappa_ins)
        _check_kappa(self.kappa_ann)

    @classmethod
    def from_loads(cls, load_ins: float, load_ann: float, pricing_rate: float = DEFAULT_PRICING_RATE,
                   calibration_age: float = DEFAULT_CALIBRATION_AGE, base: GompertzParams | None = None):
        base = base or GompertzParams()
        k_ins = solve_kappa_ins(load_ins, pricing_rate, calibration_age, base)
        k_ann = solve_kappa_ann(load_ann, pricing_rate, calibration_age, base)
        return cls(k_ins, k_ann, pricing_rate, calibration_age, base)

    def for_age(self, x: float) -> "LoadSchedule":
        return replace(self, base=self.base.at_age(x))

    @property
    def modal_age_ins(self) -> float:
        return self.base.m - self.base.b * np.log(self.kappa_ins)

    @property
    def modal_age_ann(self) -> float:
        return self.base.m + self.base.b * np.log(self.kappa_ann)

    def eta(self, t):
        return self.base.hazard(t) * self.kappa_ins

    def theta(self, t):
        return self.base.hazard(t) / self.kappa_ann

    def spread(self, t):
        return self.eta(t) - self.theta(t)


def implied_load_by_age(schedule: LoadSchedule, purchase_age: float) -> tuple[float, float]:
    """Loads (L_ins, L_ann) implied by the schedule's kappas at another purchase age."""
    if not 25 <= purchase_age < 110:
        raise ValueError("purchase age must lie in [25, 110)")
    params = schedule.base.at_age(purchase_age)
    r = schedule.pricing_rate
    l_ins = 1.0 - insurance_epv(1.0, r, params).value / insurance_epv(schedule.kappa_ins, r, params).value
    l_ann = 1.0 - annuity_epv(1.0, r, params).value / annuity_epv(schedule.kappa_ann, r, params).value
    return l_ins, l_ann


def load_table(loads=None, pricing_rate=DEFAULT_PRICING_RATE, calibration_age=DEFAULT_CALIBRATION_AGE,
               base: GompertzParams | None = None) -> list[dict]:
    """Kappas and implied modal ages for a grid of loads (both products)."""
    base = base or GompertzParams()
    if loads is None:
        loads = [k / 100 for k in range(0, 21, 2)]
    rows = []
    for load in loads:
        s = LoadSchedule.from_loads(load, load, pricing_rate, calibration_age, base)
        rows.append(dict(load=load, kappa_ins=s.kappa_ins, m_ins=s.modal_age_ins,
                         kappa_ann=s.kappa_ann, m_ann=s.modal_age_ann))
    return rows
