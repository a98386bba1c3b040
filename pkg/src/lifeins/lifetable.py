"""Cohort life tables: CSV ingestion, cross-country aggregation and exposures."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

CEMETERY_AGE = 110
FIRST_AGE = 25


class LifeTableError(ValueError):
    """Raised for malformed or inconsistent life-table input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class LifeTableRow:
    country: str
    age: int
    survivors: float
    deaths: float


@dataclass(frozen=True)
class AggregatedTable:
    """Survivors and deaths summed over countries, indexed by integer age.

    ``exposure`` has the same length as ``ages``; the cemetery-age entry is NaN.
    """

    ages: np.ndarray
    survivors: np.ndarray
    deaths: np.ndarray
    exposure: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["age", "lx", "dx", "Ex"])
        for age, lx, dx, ex in zip(self.ages, self.survivors, self.deaths, self.exposure):
            writer.writerow([int(age), _fmt(lx), _fmt(dx), "" if np.isnan(ex) else _fmt(ex)])
        return buf.getvalue()


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _parse_count(text: str, line: int, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise LifeTableError(f"{name} is not numeric: {text!r}", line) from None
    if value < 0 or not np.isfinite(value):
        raise LifeTableError(f"{name} must be a non-negative number, got {text!r}", line)
    return value


def parse_life_tables(source: TextIO | str) -> list[LifeTableRow]:
    """Read ``country,age,lx,dx`` rows and validate them.

    Rows come back grouped by country (in order of first appearance) and
    sorted by age within each country.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        raise LifeTableError("empty life-table input")
    if [h.strip().lower() for h in header] != ["country", "age", "lx", "dx"]:
        raise LifeTableError(f"expected header country,age,lx,dx, got {','.join(header)}", 1)

    by_country: dict[str, list[LifeTableRow]] = {}
    for line, fields in enumerate(reader, start=2):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != 4:
            raise LifeTableError(f"expected 4 fields, got {len(fields)}", line)
        country = fields[0].strip()
        if not country:
            raise LifeTableError("missing country id", line)
        try:
            age = int(fields[1])
        except ValueError:
            raise LifeTableError(f"age is not an integer: {fields[1]!r}", line) from None
        lx = _parse_count(fields[2], line, "lx")
        dx = _parse_count(fields[3], line, "dx")
        if dx > lx:
            raise LifeTableError(f"deaths {dx:g} exceed survivors {lx:g} at age {age}", line)
        by_country.setdefault(country, []).append(LifeTableRow(country, age, lx, dx))

    if not by_country:
        raise LifeTableError("life-table input has no data rows")

    rows: list[LifeTableRow] = []
    for country, group in by_country.items():
        group.sort(key=lambda r: r.age)
        ages = [r.age for r in group]
        if ages != list(range(ages[0], ages[0] + len(ages))):
            raise LifeTableError(f"ages for {country} are not contiguous")
        last = group[-1]
        if last.age == CEMETERY_AGE and last.survivors != last.deaths:
            raise LifeTableError(f"{country}: cemetery age {CEMETERY_AGE} needs lx == dx")
        rows.extend(group)
    return rows


def aggregate(rows: Iterable[LifeTableRow], a: float = 0.5) -> AggregatedTable:
    """Sum l_x and d_x over countries (raw counts, no population weights)."""
    by_country: dict[str, dict[int, LifeTableRow]] = {}
    for row in rows:
        by_country.setdefault(row.country, {})[row.age] = row
    if not by_country:
        raise LifeTableError("no rows to aggregate")

    age_sets = {tuple(sorted(t)) for t in by_country.values()}
    if len(age_sets) != 1:
        raise LifeTableError("countries cover different age ranges")
    ages = np.array(age_sets.pop(), dtype=int)

    lx = np.zeros(len(ages))
    dx = np.zeros(len(ages))
    # sorted keys make float summation order independent of input order
    for country in sorted(by_country):
        table = by_country[country]
        lx += np.array([table[a_].survivors for a_ in ages])
        dx += np.array([table[a_].deaths for a_ in ages])
    return AggregatedTable(ages, lx, dx, exposures(ages, lx, dx, a))


def exposures(ages: np.ndarray, survivors: np.ndarray, deaths: np.ndarray, a: float | np.ndarray = 0.5) -> np.ndarray:
    """Person-years E_x = l_x - (1 - a_x) d_x; NaN at the cemetery age."""
    a = np.broadcast_to(np.asarray(a, dtype=float), np.shape(survivors))
    if np.any((a < 0) | (a > 1)):
        raise ValueError("averaging fraction must lie in [0, 1]")
    ex = np.asarray(survivors, float) - (1.0 - a) * np.asarray(deaths, float)
    return np.where(np.asarray(ages) >= CEMETERY_AGE, np.nan, ex)


def synthetic_cohort(params, radix: float = 1e6, country: str = "SYN", rounded: bool = False) -> list[LifeTableRow]:
    """Life table of a Gompertz cohort, ages 25..110.

    l_x = radix * survival(x - 25) and d_x = l_x - l_{x+1}; the cemetery row
    absorbs everyone left.  ``params`` must use reference age 25.
    """
    t = np.arange(CEMETERY_AGE - FIRST_AGE + 1)
    lx = radix * params.survival(t)
    if rounded:
        lx = np.round(lx)
    dx = np.append(lx[:-1] - lx[1:], lx[-1])
    return [LifeTableRow(country, FIRST_AGE + int(k), float(lx[k]), float(dx[k])) for k in t]


def rows_to_csv(rows: Iterable[LifeTableRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["country", "age", "lx", "dx"])
    for r in rows:
        writer.writerow([r.country, r.age, repr(r.survivors), repr(r.deaths)])
    return buf.getvalue()
