"""Vote-log ingestion, day-region binning, default periods, energy accounting.

The input is a delimited text log, one vote event per row:

    timestamp,occupant_id,vote,is_default

Timestamps are ISO-8601; naive ones are interpreted in the configured IANA
timezone, aware ones are converted to it. A day splits into four regions:

    Dawn     [05:00, 10:00)
    Daylight [10:00, 17:00)
    Dusk     [17:00, 20:00)
    Night    [20:00, 05:00 next day)

with the post-midnight span attached to the previous day's Night, so every
instant belongs to exactly one (day, region) cell.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, replace
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from zoneinfo import ZoneInfo

from .errors import DataFormatError, UncoveredDateError

logger = logging.getLogger(__name__)

REGIONS = ("Dawn", "Daylight", "Dusk", "Night")
_REGION_ORDER = {name: k for k, name in enumerate(REGIONS)}

VOTE_LOG_HEADER = ("timestamp", "occupant_id", "vote", "is_default")
PERIODS_HEADER = ("start", "end", "default_level")

_TRUE = {"true", "1", "yes"}
_FALSE = {"false", "0", "no"}


@dataclass(frozen=True)
class VoteRecord:
    """One vote event from the platform log."""

    timestamp: datetime  # always timezone-aware after ingest
    occupant_id: str
    vote: float
    is_default: bool
    session_start: bool = False  # first event of the occupant's presence day


@dataclass(frozen=True)
class ObservedVote:
    value: float
    is_default: bool


@dataclass(frozen=True, eq=True)
class Observation:
    """Votes of one (day, region) cell; absent occupants are simply missing."""

    day: date
    region: str
    votes: dict[str, ObservedVote]
    default_level: float | None = None

    def participants(self) -> tuple[str, ...]:
        return tuple(sorted(self.votes))


@dataclass(frozen=True)
class DefaultPeriod:
    """Inclusive date range during which one default level was in force."""

    start: date
    end: date
    default_level: float

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"period end {self.end} before start {self.start}")

    def covers(self, day: date) -> bool:
        return self.start <= day <= self.end


@dataclass(frozen=True)
class DayEnergy:
    day: date
    implemented: float
    kwh_consumed: float
    kwh_saved: float
    above_baseline: bool


@dataclass(frozen=True)
class EnergyLedger:
    """Per-day lighting energy versus an always-at-baseline counterfactual."""

    baseline: float
    power_kw: float
    hours_per_day: float
    rate_per_kwh: float
    days: tuple[DayEnergy, ...]
    total_consumed_kwh: float
    total_saved_kwh: float
    reduction_pct: float  # saved relative to what was consumed
    currency_saved: float


def region_of(ts: datetime) -> tuple[date, str]:
    """(day, region) cell owning a local timestamp."""
    h = ts.hour
    if 5 <= h < 10:
        return ts.date(), "Dawn"
    if 10 <= h < 17:
        return ts.date(), "Daylight"
    if 17 <= h < 20:
        return ts.date(), "Dusk"
    if h >= 20:
        return ts.date(), "Night"
    # before 05:00: still the previous day's Night
    return ts.date() - timedelta(days=1), "Night"


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def ingest_votes(path: str | Path, tz: str = "UTC", lenient: bool = False) -> list[VoteRecord]:
    """Parse, validate, normalize, and order a vote log.

    Row-level problems (bad timestamp, vote outside [0, 100], malformed
    boolean, wrong column count) are collected with their row numbers; any
    problem fails the whole ingest unless ``lenient``, which skips the bad
    rows with a warning instead. Exact (occupant, timestamp) duplicates keep
    the later row, with a warning. Output is sorted by timestamp and the
    first event of each occupant's local day carries ``session_start``.
    """
    path = Path(path)
    try:
        zone = ZoneInfo(tz)
    except Exception as exc:
        raise DataFormatError(f"unknown timezone {tz!r}: {exc}") from exc
    problems: list[tuple[int, str]] = []
    parsed: list[tuple[int, VoteRecord]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, header required") from None
        if tuple(h.strip() for h in header) != VOTE_LOG_HEADER:
            raise DataFormatError(
                f"{path}: bad header {header!r}, expected {','.join(VOTE_LOG_HEADER)}"
            )
        for row_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # blank line
            if len(row) != 4:
                problems.append((row_no, f"expected 4 columns, got {len(row)}"))
                continue
            raw_ts, occ, raw_vote, raw_default = (c.strip() for c in row)
            try:
                ts = datetime.fromisoformat(raw_ts)
            except ValueError:
                problems.append((row_no, f"bad timestamp {raw_ts!r}"))
                continue
            ts = ts.replace(tzinfo=zone) if ts.tzinfo is None else ts.astimezone(zone)
            if not occ:
                problems.append((row_no, "empty occupant_id"))
                continue
            try:
                vote = float(raw_vote)
            except ValueError:
                problems.append((row_no, f"bad vote {raw_vote!r}"))
                continue
            if not 0.0 <= vote <= 100.0:
                problems.append((row_no, f"vote {vote} outside [0, 100]"))
                continue
            try:
                is_default = _parse_bool(raw_default)
            except ValueError:
                problems.append((row_no, f"bad is_default {raw_default!r}"))
                continue
            parsed.append((row_no, VoteRecord(ts, occ, vote, is_default)))

    if problems:
        if not lenient:
            listed = "; ".join(f"row {r}: {m}" for r, m in problems[:20])
            more = "" if len(problems) <= 20 else f" (+{len(problems) - 20} more)"
            raise DataFormatError(f"{path}: {len(problems)} bad rows: {listed}{more}", problems)
        for r, m in problems:
            logger.warning("%s row %d skipped: %s", path, r, m)

    # Later file rows win exact (occupant, timestamp) collisions.
    by_key: dict[tuple[str, datetime], tuple[int, VoteRecord]] = {}
    for row_no, rec in parsed:
        key = (rec.occupant_id, rec.timestamp)
        if key in by_key:
            logger.warning(
                "%s row %d overrides row %d: duplicate (%s, %s)",
                path,
                row_no,
                by_key[key][0],
                rec.occupant_id,
                rec.timestamp.isoformat(),
            )
        by_key[key] = (row_no, rec)

    records = sorted((rec for _, rec in by_key.values()), key=lambda r: (r.timestamp, r.occupant_id))
    seen_day: set[tuple[str, date]] = set()
    out: list[VoteRecord] = []
    for rec in records:
        day, _ = region_of(rec.timestamp)
        key = (rec.occupant_id, day)
        if key not in seen_day:
            seen_day.add(key)
            rec = replace(rec, session_start=True)
        out.append(rec)
    return out


def bin_day_regions(records: Sequence[VoteRecord]) -> list[Observation]:
    """Average each occupant's votes per (day, region) cell.

    A cell vote is flagged default only when every contributing event was a
    default vote. Cells come back ordered by day then region order.
    """
    cells: dict[tuple[date, str], dict[str, list[VoteRecord]]] = {}
    for rec in records:
        day, region = region_of(rec.timestamp)
        cells.setdefault((day, region), {}).setdefault(rec.occupant_id, []).append(rec)
    out = []
    for (day, region) in sorted(cells, key=lambda k: (k[0], _REGION_ORDER[k[1]])):
        votes = {}
        for occ, recs in cells[(day, region)].items():
            votes[occ] = ObservedVote(
                value=sum(r.vote for r in recs) / len(recs),
                is_default=all(r.is_default for r in recs),
            )
        out.append(Observation(day=day, region=region, votes=votes))
    return out


def check_periods(periods: Sequence[DefaultPeriod]) -> list[DefaultPeriod]:
    """Order periods by start date and reject overlaps."""
    ordered = sorted(periods, key=lambda p: p.start)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start <= prev.end:
            raise DataFormatError(
                f"default periods overlap: {prev.start}..{prev.end} and {cur.start}..{cur.end}"
            )
    return ordered


def segment_default_periods(
    observations: Sequence[Observation], periods: Sequence[DefaultPeriod]
) -> list[Observation]:
    """Attach the in-force default level to every observation.

    Every observation day must be covered by exactly one period; uncovered
    days raise with the full list of offending dates.
    """
    ordered = check_periods(periods)
    uncovered = set()
    out = []
    for obs in observations:
        level = None
        for p in ordered:
            if p.covers(obs.day):
                level = p.default_level
                break
        if level is None:
            uncovered.add(obs.day)
        else:
            out.append(replace(obs, default_level=level))
    if uncovered:
        raise UncoveredDateError(uncovered)
    return out


def read_periods(path: str | Path) -> list[DefaultPeriod]:
    """Read `start,end,default_level` rows (inclusive ISO dates)."""
    path = Path(path)
    out = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, header required") from None
        if tuple(h.strip() for h in header) != PERIODS_HEADER:
            raise DataFormatError(
                f"{path}: bad header {header!r}, expected {','.join(PERIODS_HEADER)}"
            )
        for row_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise DataFormatError(f"{path} row {row_no}: expected 3 columns")
            try:
                out.append(
                    DefaultPeriod(
                        start=date.fromisoformat(row[0].strip()),
                        end=date.fromisoformat(row[1].strip()),
                        default_level=float(row[2]),
                    )
                )
            except ValueError as exc:
                raise DataFormatError(f"{path} row {row_no}: {exc}") from exc
    return check_periods(out)


def default_level_for(day: date, periods: Sequence[DefaultPeriod]) -> float:
    for p in periods:
        if p.covers(day):
            return p.default_level
    raise UncoveredDateError([day])


def energy_savings(
    daily_implemented: Mapping[date, float],
    baseline: float,
    power_kw: float,
    hours_per_day: float,
    rate_per_kwh: float = 0.0,
) -> EnergyLedger:
    """Energy ledger against a light-always-at-baseline counterfactual.

    Per day: consumed = implemented/100 * power * hours and saved =
    (baseline - implemented)/100 * power * hours. Days above the baseline
    save negative energy and are flagged, never clipped.
    """
    if power_kw <= 0 or hours_per_day <= 0:
        raise ValueError("power_kw and hours_per_day must be positive")
    if not 0 < baseline <= 100:
        raise ValueError(f"baseline {baseline} outside (0, 100]")
    days = []
    for day in sorted(daily_implemented):
        level = daily_implemented[day]
        consumed = level / 100.0 * power_kw * hours_per_day
        saved = (baseline - level) / 100.0 * power_kw * hours_per_day
        days.append(
            DayEnergy(
                day=day,
                implemented=level,
                kwh_consumed=consumed,
                kwh_saved=saved,
                above_baseline=saved < 0,
            )
        )
    total_consumed = sum(d.kwh_consumed for d in days)
    total_saved = sum(d.kwh_saved for d in days)
    reduction = 100.0 * total_saved / total_consumed if total_consumed > 0 else 0.0
    return EnergyLedger(
        baseline=baseline,
        power_kw=power_kw,
        hours_per_day=hours_per_day,
        rate_per_kwh=rate_per_kwh,
        days=tuple(days),
        total_consumed_kwh=total_consumed,
        total_saved_kwh=total_saved,
        reduction_pct=reduction,
        currency_saved=total_saved * rate_per_kwh,
    )


# --- line-delimited serialization -----------------------------------------
# One JSON object per line, keys sorted, so files diff cleanly and reruns are
# byte-identical.


def _obs_to_dict(obs: Observation) -> dict:
    return {
        "day": obs.day.isoformat(),
        "region": obs.region,
        "default_level": obs.default_level,
        "votes": {
            occ: {"value": v.value, "is_default": v.is_default}
            for occ, v in sorted(obs.votes.items())
        },
    }


def _obs_from_dict(raw: dict) -> Observation:
    return Observation(
        day=date.fromisoformat(raw["day"]),
        region=raw["region"],
        default_level=raw["default_level"],
        votes={
            occ: ObservedVote(value=float(v["value"]), is_default=bool(v["is_default"]))
            for occ, v in raw["votes"].items()
        },
    )


def write_observations(path: str | Path, observations: Iterable[Observation]) -> None:
    with Path(path).open("w") as fh:
        for obs in observations:
            fh.write(json.dumps(_obs_to_dict(obs), sort_keys=True) + "\n")


def read_observations(path: str | Path) -> list[Observation]:
    out = []
    with Path(path).open() as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(_obs_from_dict(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise DataFormatError(f"{path} line {line_no}: {exc}") from exc
    return out


def write_jsonl(path: str | Path, rows: Iterable[Mapping]) -> None:
    with Path(path).open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def export_votes_csv(records: Sequence[VoteRecord]) -> str:
    """Render records back into the vote-log text schema (ingest round-trips)."""
    lines = [",".join(VOTE_LOG_HEADER)]
    for rec in records:
        lines.append(
            "%s,%s,%r,%s"
            % (
                rec.timestamp.isoformat(),
                rec.occupant_id,
                rec.vote,
                "true" if rec.is_default else "false",
            )
        )
    return "\n".join(lines) + "\n"
