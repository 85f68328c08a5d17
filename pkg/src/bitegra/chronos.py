"""Discrete bitemporal time: instants, close-open periods and period predicates.

Instants are integers counting milliseconds since the Unix epoch (UTC).  The
two sentinels :data:`NEG_INF` and :data:`POS_INF` bound the domain and sort
below/above every finite instant, so plain integer comparison gives the total
order.  They fit into ``int64`` which lets storage keep timestamps in numpy
columns.
"""
from __future__ import annotations

import enum
import re
from datetime import datetime, timedelta
from typing import NamedTuple, Union

from .errors import BitegraError

NEG_INF = -(2**63)
POS_INF = 2**63 - 1

_EPOCH = datetime(1970, 1, 1)
_MS = timedelta(milliseconds=1)

_MS_PER = {
    "MILLISECOND": 1,
    "SECOND": 1000,
    "MINUTE": 60_000,
    "HOUR": 3_600_000,
    "DAY": 86_400_000,
    "WEEK": 7 * 86_400_000,
}


class ChronosError(BitegraError, ValueError):
    pass


class BoundsError(ChronosError):
    """Period bounds are inverted."""


class InfiniteBoundError(ChronosError):
    """A length was requested for a period with a sentinel bound."""


class TimeDomain(enum.Enum):
    TX = "TX"
    VAL = "VAL"


class TimeUnit(enum.Enum):
    YEAR = "YEAR"
    QUARTER = "QUARTER"
    MONTH = "MONTH"
    WEEK = "WEEK"
    DAY = "DAY"
    HOUR = "HOUR"
    MINUTE = "MINUTE"
    SECOND = "SECOND"
    MILLISECOND = "MILLISECOND"


def is_finite(t: int) -> bool:
    return NEG_INF < t < POS_INF


class Timestamp(int):
    """An instant used as a query value.

    Behaves as the underlying millisecond count in comparisons; only the
    textual rendering differs from a plain integer.
    """

    __slots__ = ()

    def __repr__(self) -> str:
        return f"Timestamp({format_timestamp(self, 'full')!r})"

    def __str__(self) -> str:
        return format_timestamp(self)


class Period(NamedTuple):
    """Close-open interval ``[start, end)`` of instants."""

    start: int
    end: int

    @property
    def empty(self) -> bool:
        return self.start >= self.end

    @property
    def finite(self) -> bool:
        return is_finite(self.start) and is_finite(self.end)

    def __contains__(self, t: object) -> bool:
        return isinstance(t, int) and self.start <= t < self.end

    def intersect(self, other: "Period") -> "Period | None":
        lo = max(self.start, other.start)
        hi = min(self.end, other.end)
        return Period(lo, hi) if lo < hi else None

    def __str__(self) -> str:
        return format_period(self)


ALWAYS = Period(NEG_INF, POS_INF)

PeriodOrInstant = Union[Period, int]


def new_period(t1: int, t2: int) -> Period:
    if t1 > t2:
        raise BoundsError(
            f"period start {format_timestamp(t1)} is after end {format_timestamp(t2)}"
        )
    return Period(int(t1), int(t2))


def instant_period(t: int) -> Period:
    """The one-tick period ``[t, t+1ms)``."""
    return Period(t, t + 1 if t < POS_INF else t)


# -- period predicates -------------------------------------------------------
# Every predicate is false when an operand period is empty.


def contains(p: Period, other: PeriodOrInstant) -> bool:
    if isinstance(other, Period):
        if p.empty or other.empty:
            return False
        return p.start <= other.start and p.end >= other.end
    return p.start <= other < p.end


def overlaps(p1: Period, p2: Period) -> bool:
    if p1.empty or p2.empty:
        return False
    return p1.start < p2.end and p2.start < p1.end


def equals(p1: Period, p2: Period) -> bool:
    if p1.empty != p2.empty:
        return False
    if p1.empty:
        return False
    return p1.start == p2.start and p1.end == p2.end


def precedes(p1: Period, p2: Period, immediately: bool = False) -> bool:
    if p1.empty or p2.empty:
        return False
    if immediately:
        return p1.end == p2.start
    return p1.end <= p2.start


def succeeds(p1: Period, p2: Period, immediately: bool = False) -> bool:
    if p1.empty or p2.empty:
        return False
    if immediately:
        return p1.start == p2.end
    return p1.start >= p2.end


# -- length ------------------------------------------------------------------


def to_datetime(t: int) -> datetime:
    if not is_finite(t):
        raise InfiniteBoundError("sentinel instant has no calendar representation")
    return _EPOCH + t * _MS


def from_datetime(dt: datetime) -> int:
    return (dt - _EPOCH) // _MS


def _add_months(dt: datetime, months: int) -> datetime:
    idx = dt.year * 12 + (dt.month - 1) + months
    year, month = divmod(idx, 12)
    month += 1
    # clamp day to the target month's length
    nxt = datetime(year + (month == 12), month % 12 + 1, 1)
    last_day = (nxt - timedelta(days=1)).day
    return dt.replace(year=year, month=month, day=min(dt.day, last_day))


def length(p: Period, unit: TimeUnit | str = TimeUnit.MILLISECOND) -> int:
    """Number of whole ``unit`` steps from ``p.start`` that fit before ``p.end``."""
    if not p.finite:
        raise InfiniteBoundError(f"LENGTH of unbounded period {p}")
    unit = TimeUnit(unit) if isinstance(unit, str) else unit
    span = p.end - p.start
    if unit.value in _MS_PER:
        return span // _MS_PER[unit.value]
    step = {TimeUnit.MONTH: 1, TimeUnit.QUARTER: 3, TimeUnit.YEAR: 12}[unit]
    start, end = to_datetime(p.start), to_datetime(p.end)
    months = (end.year - start.year) * 12 + (end.month - start.month)
    n = max(months // step + 1, 0)
    while n > 0 and _add_months(start, n * step) > end:
        n -= 1
    return n


# -- literals and rendering --------------------------------------------------

_TS_RE = re.compile(
    r"^\s*(\d{1,4})-(\d{2})-(\d{2})"
    r"(?:[ T](\d{2}):(\d{2})(?::(\d{2})(?:\.(\d{1,3}))?)?)?\s*$"
)


def parse_timestamp(text: str) -> int:
    """Parse ``YYYY-MM-DD[ HH:MM[:SS[.mmm]]]`` (UTC) or the sentinel names."""
    low = text.strip().lower()
    if low in ("-infinity", "-inf"):
        return NEG_INF
    if low in ("infinity", "inf", "+infinity"):
        return POS_INF
    m = _TS_RE.match(text)
    if not m:
        raise ChronosError(f"invalid timestamp literal {text!r}")
    y, mo, d, hh, mm, ss, frac = m.groups()
    try:
        dt = datetime(int(y), int(mo), int(d), int(hh or 0), int(mm or 0), int(ss or 0))
    except ValueError as exc:
        raise ChronosError(f"invalid timestamp literal {text!r}: {exc}") from None
    ms = int((frac or "0").ljust(3, "0"))
    return from_datetime(dt) + ms


def format_timestamp(t: int, style: str = "display") -> str:
    """Render an instant.

    ``full`` always carries milliseconds (machine formats), ``display`` shows
    seconds and adds milliseconds only when non-zero, ``compact`` drops zero
    seconds as well (used for period bounds in result tables).
    """
    if t <= NEG_INF:
        return "-infinity"
    if t >= POS_INF:
        return "infinity"
    dt = to_datetime(t)
    ms = t % 1000
    base = f"{dt.year:04d}-{dt.month:02d}-{dt.day:02d} {dt.hour:02d}:{dt.minute:02d}"
    if style == "full":
        return f"{base}:{dt.second:02d}.{ms:03d}"
    if style == "compact" and dt.second == 0 and ms == 0:
        return base
    out = f"{base}:{dt.second:02d}"
    return f"{out}.{ms:03d}" if ms else out


def format_period(p: Period, style: str = "compact") -> str:
    return f"[{format_timestamp(p.start, style)}, {format_timestamp(p.end, style)})"
