"""Calendar helpers.

All dates are stored as integer day counts from the epoch 2000-01-01 (day 0).
Continuous durations (delay scales, claim time) are measured in years of
365.25 days.
"""

from __future__ import annotations

import datetime as dt

EPOCH = dt.date(2000, 1, 1)
DAYS_PER_YEAR = 365.25


def to_day(date: dt.date) -> int:
    return (date - EPOCH).days


def to_date(day: int) -> dt.date:
    return EPOCH + dt.timedelta(days=int(day))


def parse_iso(text: str) -> int:
    return to_day(dt.date.fromisoformat(text))


def iso(day: int) -> str:
    return to_date(day).isoformat()


def year_of(day: int) -> int:
    return to_date(day).year


def year_start(year: int) -> int:
    return to_day(dt.date(year, 1, 1))


def years_since_epoch(day: float) -> float:
    """Continuous time in years for a (possibly fractional) day count."""
    return day / DAYS_PER_YEAR
