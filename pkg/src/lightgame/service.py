"""Live game service: presence, standing votes, points, lottery, export.

State is event-sourced: every mutation appends one JSON line to an
append-only log and replaying the log reconstructs the state exactly, so a
crashed service restarts from its log (optionally from a snapshot plus the
tail). A single lock serializes writers; reads take the same lock and hence
always see a state some log prefix explains.

Platform rules differ from the analytical core on purpose: any vote in
[lower, upper] is accepted, votes at or above the baseline simply earn zero
points, and a round where nobody voted below the baseline splits the pool
equally.
"""

import json
import logging
import random
import threading
from dataclasses import dataclass, field
from datetime import date, datetime, time
from pathlib import Path
from typing import Callable
from zoneinfo import ZoneInfo

from .data import VoteRecord, export_votes_csv
from .errors import (
    DataFormatError,
    DegenerateRoundError,
    LightingGameError,
    NoParticipantsError,
    NotAuthorizedError,
    NotPresentError,
)
from .game import GameConfig

logger = logging.getLogger(__name__)

LOG_VERSION = 1

ADMIN = "__admin__"


def award_increments(votes: dict[str, float], cfg: GameConfig) -> dict[str, float]:
    """Split the points pool over one closed day's standing votes.

    Below-baseline votes earn in proportion to their distance below the
    baseline; votes at or above it earn zero. When nobody is below the
    baseline the pool is split equally. Increments always sum to rho.
    """
    if not votes:
        raise NoParticipantsError("no participants to award")
    gaps = {occ: max(cfg.x_b - v, 0.0) for occ, v in votes.items()}
    total = sum(gaps.values())
    if total <= 1e-9 * len(votes) * cfg.x_b:
        share = cfg.rho / len(votes)
        return {occ: share for occ in votes}
    return {occ: cfg.rho * gap / total for occ, gap in gaps.items()}


@dataclass
class _Occupant:
    present_day: date | None = None
    standing_vote: float | None = None
    vote_is_default: bool = True
    points: float = 0.0


@dataclass(frozen=True)
class ServiceConfig:
    """Service wiring: who may talk to it and how rounds run."""

    game: GameConfig
    occupant_tokens: dict[str, str]  # occupant id -> static bearer token
    admin_token: str
    default_level: float
    tz: str = "UTC"
    round_cutoff: str = "23:59"  # intended daily close time, informational
    winners_per_draw: int = 3
    lottery_resets_points: bool = True

    def __post_init__(self):
        if len(set(self.occupant_tokens.values())) != len(self.occupant_tokens):
            raise ValueError("occupant tokens must be unique")
        if self.admin_token in self.occupant_tokens.values():
            raise ValueError("admin token collides with an occupant token")
        if not self.occupant_tokens:
            raise ValueError("service needs at least one occupant")
        if len(self.occupant_tokens) != self.game.n:
            raise ValueError(
                f"{len(self.occupant_tokens)} occupants but game config expects {self.game.n}"
            )
        time.fromisoformat(self.round_cutoff)  # validate format early


class GameService:
    """Event-sourced game state machine with token auth.

    All public methods are thread-safe. ``now_fn`` injects the clock for
    tests; it must return an aware datetime.
    """

    def __init__(
        self,
        config: ServiceConfig,
        log_path: str | Path,
        now_fn: Callable[[], datetime] | None = None,
        snapshot_every: int = 0,
    ):
        self.config = config
        self.log_path = Path(log_path)
        self.snapshot_path = self.log_path.with_suffix(self.log_path.suffix + ".snapshot")
        self.snapshot_every = snapshot_every
        self._zone = ZoneInfo(config.tz)
        self._now_fn = now_fn or (lambda: datetime.now(self._zone))
        self._lock = threading.RLock()
        self._token_to_occupant = {t: o for o, t in config.occupant_tokens.items()}

        self._default_level = config.default_level
        self._occupants = {occ: _Occupant() for occ in config.occupant_tokens}
        self._day_votes: dict[date, dict[str, float]] = {}
        self._vote_events: list[VoteRecord] = []
        self._awarded_days: set[date] = set()
        self._lottery_draws: list[dict] = []
        self._event_count = 0

        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        if self.log_path.exists():
            self._recover()
        else:
            self._append(
                {
                    "type": "header",
                    "version": LOG_VERSION,
                    "tz": config.tz,
                    "rho": config.game.rho,
                    "baseline": config.game.x_b,
                    "default_level": config.default_level,
                    "occupants": sorted(config.occupant_tokens),
                }
            )

    # -- clock ------------------------------------------------------------

    def _now(self) -> datetime:
        now = self._now_fn()
        if now.tzinfo is None:
            raise ValueError("now_fn must return an aware datetime")
        return now.astimezone(self._zone)

    def today(self) -> date:
        return self._now().date()

    # -- auth -------------------------------------------------------------

    def authenticate(self, token: str) -> str:
        """Occupant id for a token; ADMIN for the admin token."""
        if token == self.config.admin_token:
            return ADMIN
        occ = self._token_to_occupant.get(token)
        if occ is None:
            raise NotAuthorizedError("unknown token")
        return occ

    def require_admin(self, token: str) -> None:
        if token != self.config.admin_token:
            raise NotAuthorizedError("admin token required")

    # -- event log --------------------------------------------------------

    def _append(self, event: dict) -> None:
        with self.log_path.open("a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
        self._event_count += 1
        if (
            self.snapshot_every
            and event["type"] != "header"
            and self._event_count % self.snapshot_every == 0
        ):
            self.save_snapshot()

    def _apply(self, event: dict) -> None:
        kind = event["type"]
        if kind == "header":
            if event.get("version") != LOG_VERSION:
                raise DataFormatError(
                    f"event log version {event.get('version')} unsupported "
                    f"(expected {LOG_VERSION})"
                )
            self._default_level = float(event["default_level"])
            return
        if kind == "login":
            occ = self._occupants[event["occupant"]]
            occ.present_day = date.fromisoformat(event["day"])
            return
        if kind == "vote":
            ts = datetime.fromisoformat(event["ts"])
            occ_id = event["occupant"]
            value = float(event["value"])
            is_default = bool(event["is_default"])
            occ = self._occupants[occ_id]
            occ.standing_vote = value
            occ.vote_is_default = is_default
            day = date.fromisoformat(event["day"])
            self._day_votes.setdefault(day, {})[occ_id] = value
            self._vote_events.append(VoteRecord(ts, occ_id, value, is_default))
            return
        if kind == "set_default":
            self._default_level = float(event["level"])
            return
        if kind == "award":
            day = date.fromisoformat(event["day"])
            self._awarded_days.add(day)
            for occ_id, inc in event["increments"].items():
                self._occupants[occ_id].points += float(inc)
            return
        if kind == "lottery":
            self._lottery_draws.append(
                {"seed": event["seed"], "winners": list(event["winners"])}
            )
            if event["reset"]:
                for occ in self._occupants.values():
                    occ.points = 0.0
            return
        raise DataFormatError(f"unknown event type {kind!r} in log")

    def _record(self, event: dict) -> None:
        """Log first, then apply: the log is the source of truth."""
        self._append(event)
        self._apply(event)

    def _recover(self) -> None:
        start_line = 0
        if self.snapshot_path.exists():
            start_line = self._load_snapshot()
        self._event_count = start_line
        with self.log_path.open() as fh:
            for line_no, line in enumerate(fh):
                if line_no < start_line:
                    continue
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except ValueError as exc:
                    raise DataFormatError(f"{self.log_path} line {line_no + 1}: {exc}") from exc
                if line_no == 0:
                    if event.get("type") != "header":
                        raise DataFormatError(f"{self.log_path}: first event must be the header")
                    self._apply(event)
                    # replay overrides the header default with later set_default events
                else:
                    self._apply(event)
                self._event_count = line_no + 1
        logger.info("recovered %d events from %s", self._event_count, self.log_path)

    # -- snapshots --------------------------------------------------------

    def save_snapshot(self) -> None:
        """Write current state plus the covered event count."""
        with self._lock:
            payload = {
                "version": LOG_VERSION,
                "events": self._event_count,
                "default_level": self._default_level,
                "occupants": {
                    occ_id: {
                        "present_day": o.present_day.isoformat() if o.present_day else None,
                        "standing_vote": o.standing_vote,
                        "vote_is_default": o.vote_is_default,
                        "points": o.points,
                    }
                    for occ_id, o in self._occupants.items()
                },
                "day_votes": {
                    d.isoformat(): votes for d, votes in self._day_votes.items()
                },
                "vote_events": [
                    [r.timestamp.isoformat(), r.occupant_id, r.vote, r.is_default]
                    for r in self._vote_events
                ],
                "awarded_days": sorted(d.isoformat() for d in self._awarded_days),
                "lottery_draws": self._lottery_draws,
            }
            tmp = self.snapshot_path.with_suffix(".tmp")
            tmp.write_text(json.dumps(payload, sort_keys=True))
            tmp.replace(self.snapshot_path)

    def _load_snapshot(self) -> int:
        raw = json.loads(self.snapshot_path.read_text())
        if raw.get("version") != LOG_VERSION:
            logger.warning("snapshot version mismatch; replaying full log")
            return 0
        self._default_level = float(raw["default_level"])
        for occ_id, o in raw["occupants"].items():
            occ = self._occupants[occ_id]
            occ.present_day = date.fromisoformat(o["present_day"]) if o["present_day"] else None
            occ.standing_vote = o["standing_vote"]
            occ.vote_is_default = o["vote_is_default"]
            occ.points = float(o["points"])
        self._day_votes = {
            date.fromisoformat(d): {k: float(v) for k, v in votes.items()}
            for d, votes in raw["day_votes"].items()
        }
        self._vote_events = [
            VoteRecord(datetime.fromisoformat(ts), occ, float(v), bool(dflt))
            for ts, occ, v, dflt in raw["vote_events"]
        ]
        self._awarded_days = {date.fromisoformat(d) for d in raw["awarded_days"]}
        self._lottery_draws = list(raw["lottery_draws"])
        return int(raw["events"])

    # -- game operations --------------------------------------------------

    def login(self, occupant: str) -> dict:
        """Mark the occupant present today; first login sets the default vote.

        Idempotent within a day: repeat logins change nothing and append no
        events.
        """
        with self._lock:
            self._known(occupant)
            now = self._now()
            day = now.date()
            state = self._occupants[occupant]
            if state.present_day != day:
                self._record(
                    {
                        "type": "login",
                        "ts": now.isoformat(),
                        "day": day.isoformat(),
                        "occupant": occupant,
                    }
                )
                self._record(
                    {
                        "type": "vote",
                        "ts": now.isoformat(),
                        "day": day.isoformat(),
                        "occupant": occupant,
                        "value": self._default_level,
                        "is_default": True,
                    }
                )
            return self._occupant_view(occupant)

    def cast_vote(self, occupant: str, value: float) -> dict:
        """Record an explicit vote for a logged-in occupant."""
        with self._lock:
            self._known(occupant)
            value = float(value)
            cfg = self.config.game
            if not cfg.lower <= value <= cfg.upper:
                raise ValueError(f"vote {value} outside [{cfg.lower}, {cfg.upper}]")
            now = self._now()
            day = now.date()
            if self._occupants[occupant].present_day != day:
                raise NotPresentError(f"occupant {occupant!r} has not logged in today")
            self._record(
                {
                    "type": "vote",
                    "ts": now.isoformat(),
                    "day": day.isoformat(),
                    "occupant": occupant,
                    "value": value,
                    "is_default": False,
                }
            )
            return self._occupant_view(occupant)

    def set_default(self, level: float) -> dict:
        """Change the default level used for future logins."""
        with self._lock:
            level = float(level)
            cfg = self.config.game
            if not cfg.lower <= level <= cfg.upper:
                raise ValueError(f"default {level} outside [{cfg.lower}, {cfg.upper}]")
            self._record(
                {"type": "set_default", "ts": self._now().isoformat(), "level": level}
            )
            return {"default_level": self._default_level}

    def award_points(self, day: date | None = None) -> dict:
        """Split the pool over the day's standing votes and bank the points.

        Admin-triggered; awarding today closes the round early. Each day can
        be awarded once.
        """
        with self._lock:
            if day is None:
                day = self.today()
            if day > self.today():
                raise ValueError(f"cannot award future day {day}")
            if day in self._awarded_days:
                raise ValueError(f"day {day} already awarded")
            votes = self._day_votes.get(day)
            if not votes:
                raise NoParticipantsError(f"no participants on {day}")
            increments = award_increments(votes, self.config.game)
            self._record(
                {
                    "type": "award",
                    "ts": self._now().isoformat(),
                    "day": day.isoformat(),
                    "increments": {occ: increments[occ] for occ in sorted(increments)},
                }
            )
            return {"day": day.isoformat(), "increments": increments}

    def draw_lottery(self, seed: int) -> dict:
        """Draw distinct winners weighted by points, deterministically.

        Up to ``winners_per_draw`` winners; only positive balances are
        eligible; all-zero balances refuse the draw. Optionally resets all
        balances afterwards (config).
        """
        with self._lock:
            eligible = {
                occ_id: o.points for occ_id, o in self._occupants.items() if o.points > 0
            }
            if not eligible:
                raise DegenerateRoundError("no positive point balances; nothing to draw")
            rng = random.Random(seed)
            pool = dict(eligible)
            winners = []
            while pool and len(winners) < self.config.winners_per_draw:
                names = sorted(pool)
                weights = [pool[n] for n in names]
                pick = rng.choices(names, weights=weights, k=1)[0]
                winners.append(pick)
                del pool[pick]
            self._record(
                {
                    "type": "lottery",
                    "ts": self._now().isoformat(),
                    "seed": seed,
                    "winners": winners,
                    "reset": self.config.lottery_resets_points,
                }
            )
            return {"winners": winners, "reset": self.config.lottery_resets_points}

    # -- views ------------------------------------------------------------

    def _known(self, occupant: str) -> None:
        if occupant not in self._occupants:
            raise NotAuthorizedError(f"unknown occupant {occupant!r}")

    def _participants_today(self) -> dict[str, _Occupant]:
        day = self.today()
        return {
            occ_id: o for occ_id, o in self._occupants.items() if o.present_day == day
        }

    def implemented_level(self) -> float:
        """Mean standing vote of today's participants; default if nobody came."""
        with self._lock:
            present = self._participants_today()
            if not present:
                return self._default_level
            return sum(o.standing_vote for o in present.values()) / len(present)

    def _occupant_view(self, occupant: str) -> dict:
        o = self._occupants[occupant]
        return {
            "occupant": occupant,
            "day": self.today().isoformat(),
            "present": o.present_day == self.today(),
            "standing_vote": o.standing_vote if o.present_day == self.today() else None,
            "default_level": self._default_level,
            "implemented": self.implemented_level(),
            "points": o.points,
        }

    def get_state(self) -> dict:
        with self._lock:
            present = self._participants_today()
            return {
                "day": self.today().isoformat(),
                "default_level": self._default_level,
                "round_cutoff": self.config.round_cutoff,
                "implemented": self.implemented_level(),
                "participants": {
                    occ_id: {
                        "vote": o.standing_vote,
                        "is_default": o.vote_is_default,
                    }
                    for occ_id, o in sorted(present.items())
                },
            }

    def get_points(self) -> dict:
        with self._lock:
            return {occ_id: o.points for occ_id, o in sorted(self._occupants.items())}

    def state_snapshot(self) -> dict:
        """Full state as JSON-able data; replaying the log must equal this."""
        with self._lock:
            return {
                "default_level": self._default_level,
                "occupants": {
                    occ_id: {
                        "present_day": o.present_day.isoformat() if o.present_day else None,
                        "standing_vote": o.standing_vote,
                        "vote_is_default": o.vote_is_default,
                        "points": o.points,
                    }
                    for occ_id, o in sorted(self._occupants.items())
                },
                "day_votes": {
                    d.isoformat(): dict(sorted(v.items()))
                    for d, v in sorted(self._day_votes.items())
                },
                "awarded_days": sorted(d.isoformat() for d in self._awarded_days),
                "lottery_draws": list(self._lottery_draws),
                "events": self._event_count,
            }

    def export_csv(self) -> str:
        """Vote events in the ingestible log schema."""
        with self._lock:
            return export_votes_csv(self._vote_events)


def create_app(service: GameService, static_dir: str | Path | None = None):
    """FastAPI wrapper exposing the service over JSON HTTP."""
    from fastapi import FastAPI, Header, HTTPException
    from fastapi.responses import PlainTextResponse
    from pydantic import BaseModel

    class VoteBody(BaseModel):
        value: float

    class DefaultBody(BaseModel):
        level: float

    class AwardBody(BaseModel):
        day: str | None = None

    class LotteryBody(BaseModel):
        seed: int

    app = FastAPI(title="lightgame service", docs_url=None, redoc_url=None)

    def occupant_of(token: str) -> str:
        who = _auth(token)
        if who == ADMIN:
            raise HTTPException(status_code=403, detail="occupant token required")
        return who

    def _auth(token: str | None) -> str:
        if not token:
            raise HTTPException(status_code=401, detail="missing X-Auth-Token header")
        try:
            return service.authenticate(token)
        except NotAuthorizedError:
            raise HTTPException(status_code=401, detail="unknown token") from None

    def _admin(token: str | None) -> None:
        _auth(token)
        try:
            service.require_admin(token)
        except NotAuthorizedError:
            raise HTTPException(status_code=403, detail="admin token required") from None

    def _run(fn, *args):
        try:
            return fn(*args)
        except (NotPresentError, NoParticipantsError) as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except (ValueError, DegenerateRoundError, LightingGameError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.post("/login")
    def login(x_auth_token: str | None = Header(default=None)):
        return _run(service.login, occupant_of(x_auth_token))

    @app.post("/vote")
    def vote(body: VoteBody, x_auth_token: str | None = Header(default=None)):
        return _run(service.cast_vote, occupant_of(x_auth_token), body.value)

    @app.get("/state")
    def state(x_auth_token: str | None = Header(default=None)):
        _auth(x_auth_token)
        return service.get_state()

    @app.get("/points")
    def points(x_auth_token: str | None = Header(default=None)):
        _auth(x_auth_token)
        return {"points": service.get_points()}

    @app.post("/admin/default")
    def admin_default(body: DefaultBody, x_auth_token: str | None = Header(default=None)):
        _admin(x_auth_token)
        return _run(service.set_default, body.level)

    @app.post("/admin/award")
    def admin_award(body: AwardBody, x_auth_token: str | None = Header(default=None)):
        _admin(x_auth_token)
        day = date.fromisoformat(body.day) if body.day else None
        return _run(service.award_points, day)

    @app.post("/admin/lottery")
    def admin_lottery(body: LotteryBody, x_auth_token: str | None = Header(default=None)):
        _admin(x_auth_token)
        return _run(service.draw_lottery, body.seed)

    @app.get("/export")
    def export(x_auth_token: str | None = Header(default=None)):
        _auth(x_auth_token)
        return PlainTextResponse(service.export_csv(), media_type="text/csv")

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
