"""Gompertz mortality law and its calibration to aggregated life tables."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .lifetable import CEMETERY_AGE, FIRST_AGE, AggregatedTable

log = logging.getLogger(__name__)

LSQ_WEIGHT = 0.25


class CalibrationError(RuntimeError):
    """A fitter failed to converge; ``last`` holds the final iterate."""

    def __init__(self, message: str, last=None):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class GompertzParams:
    """Gompertz hazard (1/b) exp((x + t - m)/b) for a life aged x at t = 0."""

    m: float = 88.23
    b: float = 9.38
    x: float = 25.0

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError(f"scale b must be positive, got {self.b}")

    def at_age(self, x: float) -> "GompertzParams":
        return replace(self, x=float(x))

    def with_modal_age(self, m: float) -> "GompertzParams":
        return replace(self, m=float(m))

    def hazard(self, t):
        return np.exp((self.x + np.asarray(t, float) - self.m) / self.b) / self.b

    def cumulative_hazard(self, t):
        t = np.asarray(t, float)
        return np.exp((self.x - self.m) / self.b) * np.expm1(t / self.b)

    def survival(self, t):
        return np.exp(-self.cumulative_hazard(t))

    def density(self, t):
        # log-space form stays finite (underflows cleanly to 0) for large t
        t = np.asarray(t, float)
        log_c = (self.x - self.m) / self.b
        return np.exp(log_c + t / self.b - np.exp(log_c) * np.expm1(t / self.b)) / self.b

    def conditional_survival(self, t, s):
        """Probability of surviving to t given alive at s (t >= s)."""
        return np.exp(self.cumulative_hazard(s) - self.cumulative_hazard(t))


@dataclass(frozen=True)
class CalibrationResult:
    lm_estimate: tuple[float, float]
    mle_estimate: tuple[float, float]
    blended: GompertzParams
    alpha: float
    beta_rate: float
    lsq_residual_norm: float
    mle_score: float


def _survival_target(table: AggregatedTable) -> tuple[np.ndarray, np.ndarray]:
    ages = np.asarray(table.ages)
    if ages[0] != FIRST_AGE or ages[-1] != CEMETERY_AGE:
        raise ValueError(f"table must cover ages {FIRST_AGE}..{CEMETERY_AGE}")
    t = (ages - FIRST_AGE).astype(float)
    return t, table.survivors / table.survivors[0]


def _survival_and_jacobian(b: float, m: float, t: np.ndarray):
    c = np.exp((FIRST_AGE - m) / b)
    g = np.expm1(t / b)
    s = np.exp(-c * g)
    # d/db and d/dm of -c*g, times s
    dc_db = c * (m - FIRST_AGE) / b**2
    dg_db = -np.exp(t / b) * t / b**2
    dc_dm = -c / b
    jac = np.column_stack([-(dc_db * g + c * dg_db) * s, -dc_dm * g * s])
    return s, jac


def fit_survival_lsq(table: AggregatedTable, start=(10.0, 85.0), tol=1e-10, max_iter=200):
    """Levenberg-Marquardt fit of the Gompertz survival curve to l_x / l_25.

    Returns ``(b, m, residual_norm)``.
    """
    t, target = _survival_target(table)
    if np.all(target == 1.0):
        raise CalibrationError("survivor counts are constant; survival curve is not identifiable", last=start)

    p = np.array(start, dtype=float)
    s, jac = _survival_and_jacobian(*p, t)
    resid = s - target
    cost = 0.5 * resid @ resid
    mu = 1e-3 * np.max(np.diag(jac.T @ jac))
    for it in range(max_iter):
        jtj = jac.T @ jac
        grad = jac.T @ resid
        while True:
            step = np.linalg.solve(jtj + mu * np.diag(np.diag(jtj)), -grad)
            trial = p + step
            if trial[0] <= 0 or not np.all(np.isfinite(trial)):
                mu *= 10.0
            else:
                s_new, jac_new = _survival_and_jacobian(*trial, t)
                r_new = s_new - target
                cost_new = 0.5 * r_new @ r_new
                if cost_new <= cost:
                    break
                mu *= 10.0
            if mu > 1e16:
                raise CalibrationError("Levenberg-Marquardt step could not reduce the residual", last=tuple(p))
        p, resid, cost, jac = trial, r_new, cost_new, jac_new
        mu = max(mu / 10.0, 1e-15)
        if np.max(np.abs(step) / np.maximum(np.abs(p), 1.0)) < tol:
            log.debug("LM converged after %d iterations", it + 1)
            return float(p[0]), float(p[1]), float(np.sqrt(2 * cost))
    raise CalibrationError(f"Levenberg-Marquardt did not converge in {max_iter} iterations", last=tuple(p))


def _mle_arrays(table: AggregatedTable):
    mask = np.asarray(table.ages) < CEMETERY_AGE
    ex = table.exposure[mask]
    if np.any(~np.isfinite(ex)):
        raise ValueError("exposures must be defined for every non-cemetery age")
    t = (np.asarray(table.ages)[mask] - FIRST_AGE).astype(float)
    return t, table.deaths[mask], ex


def mle_score(y: float, t: np.ndarray, deaths: np.ndarray, exposure: np.ndarray) -> tuple[float, float]:
    """Profile score f(y) for the Gompertz rate and its derivative f'(y)."""
    w = exposure * np.exp(y * (t - t.mean()))  # centring cancels in the ratios
    m1 = (w @ t) / w.sum()
    m2 = (w @ t**2) / w.sum()
    return (deaths @ t) / deaths.sum() - m1, m1**2 - m2


def fit_mle(table: AggregatedTable, y0=0.1, tol=1e-10, max_iter=200, bracket=(1e-4, 1.0)):
    """Poisson maximum likelihood for hazard alpha*exp(beta*t), ages 25..109.

    Newton-Raphson on the profile score from ``y0``; bisection on ``bracket``
    if Newton leaves the bracket or stalls.  Returns ``(b, m, alpha, beta)``.
    """
    t, d, ex = _mle_arrays(table)
    if d.sum() <= 0:
        raise CalibrationError("no deaths before the cemetery age")

    def score(y):
        return mle_score(y, t, d, ex)

    y = y0
    root = None
    for _ in range(max_iter):
        f, fp = score(y)
        if fp == 0 or not np.isfinite(f):
            break
        y_new = y - f / fp
        if not bracket[0] <= y_new <= bracket[1]:
            break
        if abs(y_new - y) < tol * max(abs(y_new), 1.0):
            root = y_new
            break
        y = y_new

    if root is None:
        lo, hi = bracket
        f_lo, f_hi = score(lo)[0], score(hi)[0]
        if np.sign(f_lo) == np.sign(f_hi):
            raise CalibrationError(f"score has no sign change on [{lo}, {hi}]", last=y)
        log.info("Newton-Raphson failed; falling back to bisection")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            f_mid = score(mid)[0]
            if np.sign(f_mid) == np.sign(f_lo):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
            if hi - lo < tol * 1e-2:
                break
        root = 0.5 * (lo + hi)

    beta = float(root)
    alpha = float(d.sum() / (ex @ np.exp(beta * t)))
    b, m = mle_to_gompertz(alpha, beta)
    return b, m, alpha, beta


def mle_to_gompertz(alpha: float, beta: float) -> tuple[float, float]:
    b = 1.0 / beta
    return b, FIRST_AGE - b * np.log(alpha * b)


def gompertz_to_mle(b: float, m: float) -> tuple[float, float]:
    return np.exp((FIRST_AGE - m) / b) / b, 1.0 / b


def blend(lm: tuple[float, float], mle: tuple[float, float], weight: float = LSQ_WEIGHT) -> tuple[float, float]:
    """Weighted average of two (b, m) estimates; ``weight`` goes to ``lm``."""
    return tuple(weight * p + (1.0 - weight) * q for p, q in zip(lm, mle))


def calibrate(table: AggregatedTable) -> CalibrationResult:
    b_lm, m_lm, resid = fit_survival_lsq(table)
    b_ml, m_ml, alpha, beta = fit_mle(table)
    t, d, ex = _mle_arrays(table)
    b, m = blend((b_lm, m_lm), (b_ml, m_ml))
    return CalibrationResult(
        lm_estimate=(b_lm, m_lm),
        mle_estimate=(b_ml, m_ml),
        blended=GompertzParams(m=m, b=b, x=FIRST_AGE),
        alpha=alpha,
        beta_rate=beta,
        lsq_residual_norm=resid,
        mle_score=mle_score(beta, t, d, ex)[0],
    )


def mortality_rate_curve(table: AggregatedTable) -> tuple[np.ndarray, np.ndarray]:
    """Empirical central rates d_x / E_x; ages without positive exposure are dropped."""
    ex = table.exposure
    ok = np.isfinite(ex) & (ex > 0)
    return np.asarray(table.ages)[ok], table.deaths[ok] / ex[ok]
