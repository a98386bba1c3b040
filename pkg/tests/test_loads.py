import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lifeins.loads import (LoadSchedule, NoSolutionError, annuity_epv, gen_exp_integral, implied_load_by_age,
                           insurance_epv, load_table, scaled_exp_integral, solve_kappa_ann, solve_kappa_ins)
from lifeins.mortality import GompertzParams

from reference_values import LOAD_FACTORS


# survival is below 1e-300 long before 200 years, so a finite range is exact
QUAD = dict(epsabs=0, epsrel=1e-13, limit=500, points=[30, 45, 60, 75])


def annuity_by_quadrature(kappa, r, p):
    f = lambda t: np.exp(-r * t - p.cumulative_hazard(t) / kappa)
    return integrate.quad(f, 0, 200, **QUAD)[0]


def insurance_by_quadrature(kappa, r, p):
    f = lambda t: np.exp(-r * t - kappa * p.cumulative_hazard(t)) * kappa * p.hazard(t)
    return integrate.quad(f, 0, 200, **QUAD)[0]


@pytest.mark.parametrize("s", [0.0, 0.3, 1.0, 1.1876, 2.5])
@pytest.mark.parametrize("z", [1e-4, 0.01, 0.3, 1.0, 4.0, 40.0])
def test_exp_integral_matches_mpmath(s, z):
    ref = float(mpmath.expint(s, z))
    assert gen_exp_integral(s, z) == pytest.approx(ref, rel=1e-11)


def test_scaled_exp_integral_large_argument():
    z = 800.0
    ref = float(mpmath.expint(1.5, z) * mpmath.exp(z))
    assert scaled_exp_integral(1.5, z) == pytest.approx(ref, rel=1e-11)


def test_exp_integral_domain():
    with pytest.raises(ValueError):
        gen_exp_integral(1.0, 0.0)


@pytest.mark.parametrize("kappa", [1.0, 2.0, 5.0])
@pytest.mark.parametrize("x", [25.0, 65.0, 85.0])
def test_closed_forms_match_defining_integrals(kappa, x):
    p = GompertzParams().at_age(x)
    assert annuity_epv(kappa, 0.02, p).value == pytest.approx(annuity_by_quadrature(kappa, 0.02, p), rel=1e-8)
    assert insurance_epv(kappa, 0.02, p).value == pytest.approx(insurance_by_quadrature(kappa, 0.02, p), rel=1e-8)


@pytest.mark.parametrize("kappa", [1.0, 3.0, 50.0])
def test_insurance_pays_one_without_discounting(kappa):
    assert insurance_epv(kappa, 0.0, GompertzParams().at_age(65)).value == pytest.approx(1.0, abs=1e-10)


def test_annuity_needs_positive_rate():
    with pytest.raises(ValueError):
        annuity_epv(1.0, 0.0, GompertzParams())


def test_kappa_below_one_rejected():
    with pytest.raises(ValueError):
        insurance_epv(0.5, 0.02, GompertzParams())


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 20.0), st.floats(1.0, 20.0), st.floats(25.0, 100.0))
def test_epv_monotone_in_kappa(k1, k2, x):
    lo, hi = sorted((k1, k2))
    p = GompertzParams().at_age(x)
    assert annuity_epv(hi, 0.02, p).value >= annuity_epv(lo, 0.02, p).value * (1 - 1e-12)
    assert insurance_epv(hi, 0.02, p).value >= insurance_epv(lo, 0.02, p).value * (1 - 1e-12)


@pytest.mark.parametrize("load", sorted(LOAD_FACTORS))
def test_published_load_factors(load):
    k_ins, m_ins, k_ann, m_ann = LOAD_FACTORS[load]
    s = LoadSchedule.from_loads(load, load)
    assert s.kappa_ins == pytest.approx(k_ins, abs=5e-4)
    assert s.kappa_ann == pytest.approx(k_ann, abs=5e-4)
    assert s.modal_age_ins == pytest.approx(m_ins, abs=0.01)
    assert s.modal_age_ann == pytest.approx(m_ann, abs=0.01)


def test_zero_load_is_identity():
    assert solve_kappa_ins(0.0) == 1.0 and solve_kappa_ann(0.0) == 1.0


@pytest.mark.parametrize("load", [0.02, 0.10, 0.18])
def test_round_trip_at_calibration_age(load):
    s = LoadSchedule.from_loads(load, load)
    l_ins, l_ann = implied_load_by_age(s, 65)
    assert l_ins == pytest.approx(load, abs=1e-8)
    assert l_ann == pytest.approx(load, abs=1e-8)


def test_load_out_of_range():
    with pytest.raises(ValueError):
        solve_kappa_ins(1.0)


def test_unreachable_annuity_load():
    # an annuity cannot lose more than its whole value; huge loads have no kappa
    with pytest.raises(NoSolutionError):
        solve_kappa_ann(0.999)


def test_implied_insurance_load_falls_with_age():
    s = LoadSchedule.from_loads(0.18, 0.18)
    l_ins = [implied_load_by_age(s, a)[0] for a in range(25, 96, 5)]
    assert all(b < a for a, b in zip(l_ins, l_ins[1:]))


def test_purchase_age_validated():
    with pytest.raises(ValueError):
        implied_load_by_age(LoadSchedule(), 110)


def test_schedule_rates():
    s = LoadSchedule.from_loads(0.1, 0.1).for_age(65)
    t = np.array([0.0, 10.0])
    np.testing.assert_allclose(s.eta(t), s.base.hazard(t) * s.kappa_ins)
    np.testing.assert_allclose(s.spread(t), s.eta(t) - s.theta(t))
    assert np.all(s.spread(t) > 0)


def test_modal_age_shift_matches_scaled_hazard():
    # kappa * hazard is a Gompertz hazard with modal age m - b ln kappa
    s = LoadSchedule.from_loads(0.12, 0.12)
    shifted = GompertzParams(m=s.modal_age_ins)
    assert shifted.hazard(30.0) == pytest.approx(s.eta(30.0))


def test_load_table_default_grid():
    rows = load_table()
    assert [round(r["load"], 2) for r in rows] == sorted(LOAD_FACTORS)
