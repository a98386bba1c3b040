import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lifeins.lifetable import (CEMETERY_AGE, LifeTableError, aggregate, exposures, parse_life_tables,
                               rows_to_csv, synthetic_cohort)
from lifeins.mortality import GompertzParams


def small_table(country="AAA", lx=(100, 60, 20), start=108):
    lines = ["country,age,lx,dx"]
    for k, l in enumerate(lx):
        d = l - lx[k + 1] if k + 1 < len(lx) else l
        lines.append(f"{country},{start + k},{l},{d}")
    return "\n".join(lines) + "\n"


def test_parse_small_table():
    rows = parse_life_tables(small_table())
    assert [r.age for r in rows] == [108, 109, 110]
    assert rows[-1].survivors == rows[-1].deaths == 20


def test_parse_empty_input():
    with pytest.raises(LifeTableError, match="empty"):
        parse_life_tables("")


def test_parse_header_only():
    with pytest.raises(LifeTableError, match="no data"):
        parse_life_tables("country,age,lx,dx\n")


def test_bad_header():
    with pytest.raises(LifeTableError) as exc:
        parse_life_tables("c,a,l,d\nX,25,1,0\n")
    assert exc.value.line == 1


def test_non_numeric_field_reports_line():
    text = "country,age,lx,dx\nX,109,10,4\nX,110,six,6\n"
    with pytest.raises(LifeTableError) as exc:
        parse_life_tables(text)
    assert exc.value.line == 3


def test_negative_count_rejected():
    with pytest.raises(LifeTableError, match="non-negative"):
        parse_life_tables("country,age,lx,dx\nX,110,-1,0\n")


def test_deaths_exceeding_survivors():
    with pytest.raises(LifeTableError, match="exceed"):
        parse_life_tables("country,age,lx,dx\nX,109,10,11\nX,110,0,0\n")


def test_gap_in_ages():
    with pytest.raises(LifeTableError, match="contiguous"):
        parse_life_tables("country,age,lx,dx\nX,107,10,2\nX,109,8,4\nX,110,4,4\n")


def test_cemetery_row_must_close_cohort():
    with pytest.raises(LifeTableError, match="cemetery"):
        parse_life_tables("country,age,lx,dx\nX,109,10,4\nX,110,6,5\n")


def test_rows_regrouped_and_sorted():
    text = "country,age,lx,dx\nB,110,5,5\nA,110,3,3\nB,109,9,4\nA,109,7,4\n"
    rows = parse_life_tables(text)
    assert [(r.country, r.age) for r in rows] == [("B", 109), ("B", 110), ("A", 109), ("A", 110)]


def test_aggregate_sums_and_exposure():
    text = small_table("AAA") + small_table("BBB", (50, 30, 10)).split("\n", 1)[1]
    table = aggregate(parse_life_tables(text))
    np.testing.assert_array_equal(table.ages, [108, 109, 110])
    np.testing.assert_array_equal(table.survivors, [150, 90, 30])
    np.testing.assert_array_equal(table.deaths, [60, 60, 30])
    np.testing.assert_array_equal(table.exposure[:2], [120, 60])
    assert np.isnan(table.exposure[-1])


def test_aggregate_rejects_mismatched_ranges():
    text = small_table("AAA") + "BBB,109,4,2\nBBB,110,2,2\n"
    with pytest.raises(LifeTableError, match="different age ranges"):
        aggregate(parse_life_tables(text))


def test_aggregate_is_order_independent():
    a = small_table("AAA", (100.1, 60.7, 20.3))
    b = small_table("BBB", (50.9, 30.2, 10.4)).split("\n", 1)[1]
    c = "CCC" + small_table("CCC", (7.7, 3.3, 1.1)).split("\nCCC", 1)[1]
    t1 = aggregate(parse_life_tables(a + b + c))
    t2 = aggregate(parse_life_tables("country,age,lx,dx\n" + c + b + a.split("\n", 1)[1]))
    assert t1.to_csv() == t2.to_csv()


def test_exposure_fraction_bounds():
    with pytest.raises(ValueError):
        exposures(np.array([25]), np.array([10.0]), np.array([1.0]), a=1.5)


def test_exposure_with_fraction_one_is_survivors():
    ex = exposures(np.array([25, 26]), np.array([10.0, 8.0]), np.array([2.0, 3.0]), a=1.0)
    np.testing.assert_array_equal(ex, [10.0, 8.0])


def test_synthetic_cohort_round_trip_through_csv():
    rows = synthetic_cohort(GompertzParams())
    assert rows[0].age == 25 and rows[-1].age == CEMETERY_AGE
    back = parse_life_tables(rows_to_csv(rows))
    assert back == rows


def test_to_csv_format():
    table = aggregate(parse_life_tables(small_table()))
    lines = table.to_csv().splitlines()
    assert lines[0] == "age,lx,dx,Ex"
    assert lines[-1] == "110,20,20,"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1e6), min_size=2, max_size=30))
def test_exposure_between_survivors_and_next(decrements):
    # l_x decreasing, d_x = l_x - l_{x+1}: E_x sits between l_{x+1} and l_x
    lx = np.cumsum(np.asarray(decrements)[::-1])[::-1] + 1.0
    dx = np.append(lx[:-1] - lx[1:], lx[-1])
    ages = np.arange(CEMETERY_AGE - len(lx) + 1, CEMETERY_AGE + 1)
    ex = exposures(ages, lx, dx)
    assert np.all(ex[:-1] <= lx[:-1] + 1e-9)
    assert np.all(ex[:-1] >= lx[1:] - 1e-9)
