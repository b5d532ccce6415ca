"""Event-sourced service: replay, awards, lottery, recovery, HTTP layer."""

import threading
from datetime import date, datetime, timedelta
from zoneinfo import ZoneInfo

import numpy as np
import pytest

from lightgame.data import ingest_votes
from lightgame.errors import (
    DegenerateRoundError,
    NoParticipantsError,
    NotAuthorizedError,
    NotPresentError,
)
from lightgame.game import GameConfig
from lightgame.service import ADMIN, GameService, ServiceConfig, award_increments

CFG = GameConfig(n=3, rho=100.0)


class Clock:
    """Injectable aware clock; ticks a second per reading so events never
    share a timestamp (the ingest duplicate rule would merge them)."""

    def __init__(self, start=datetime(2014, 3, 3, 12, 0, tzinfo=ZoneInfo("UTC"))):
        self.now = start

    def __call__(self):
        self.now += timedelta(seconds=1)
        return self.now

    def advance(self, **kw):
        self.now += timedelta(**kw)


def _config(n=3, **kw):
    names = ["ana", "bob", "cat", "dan", "eva", "fay", "gus", "hal"][:n]
    defaults = dict(
        game=GameConfig(n=n, rho=100.0),
        occupant_tokens={name: f"tok-{name}" for name in names},
        admin_token="tok-admin",
        default_level=60.0,
    )
    defaults.update(kw)
    return ServiceConfig(**defaults)


@pytest.fixture
def svc(tmp_path):
    clock = Clock()
    service = GameService(_config(), tmp_path / "events.jsonl", now_fn=clock)
    service.clock = clock
    return service


# --- award arithmetic -------------------------------------------------------


def test_award_split_proportional_to_gap():
    inc = award_increments({"ana": 30.0, "bob": 60.0}, GameConfig(n=2, rho=100.0))
    assert inc["ana"] == pytest.approx(200.0 / 3.0)
    assert inc["bob"] == pytest.approx(100.0 / 3.0)
    assert sum(inc.values()) == pytest.approx(100.0, abs=1e-9)


def test_award_at_or_above_baseline_earns_zero():
    inc = award_increments({"ana": 30.0, "bob": 95.0}, GameConfig(n=2, rho=100.0))
    assert inc == {"ana": 100.0, "bob": 0.0}


def test_award_degenerate_round_splits_equally():
    inc = award_increments({"ana": 90.0, "bob": 95.0}, GameConfig(n=2, rho=100.0))
    assert inc == {"ana": 50.0, "bob": 50.0}
    with pytest.raises(NoParticipantsError):
        award_increments({}, GameConfig(n=2, rho=100.0))


# --- config validation ------------------------------------------------------


def test_service_config_validation():
    with pytest.raises(ValueError, match="unique"):
        _config(occupant_tokens={"ana": "same", "bob": "same", "cat": "x"})
    with pytest.raises(ValueError, match="collides"):
        _config(admin_token="tok-ana")
    with pytest.raises(ValueError, match="at least one"):
        _config(occupant_tokens={})
    with pytest.raises(ValueError, match="expects 3"):
        _config(occupant_tokens={"ana": "a", "bob": "b"})
    with pytest.raises(ValueError):
        _config(round_cutoff="25:99")


# --- auth -------------------------------------------------------------------


def test_authenticate_tokens(svc):
    assert svc.authenticate("tok-ana") == "ana"
    assert svc.authenticate("tok-admin") == ADMIN
    with pytest.raises(NotAuthorizedError):
        svc.authenticate("nope")
    svc.require_admin("tok-admin")
    with pytest.raises(NotAuthorizedError):
        svc.require_admin("tok-ana")


# --- presence and votes -----------------------------------------------------


def test_login_sets_default_vote_and_is_idempotent(svc):
    view = svc.login("ana")
    assert view["present"] and view["standing_vote"] == 60.0
    assert view["implemented"] == 60.0
    before = svc.state_snapshot()["events"]
    svc.login("ana")
    assert svc.state_snapshot()["events"] == before  # no new events


def test_vote_requires_login_today(svc):
    with pytest.raises(NotPresentError):
        svc.cast_vote("ana", 30.0)
    svc.login("ana")
    view = svc.cast_vote("ana", 30.0)
    assert view["standing_vote"] == 30.0
    svc.clock.advance(days=1)
    with pytest.raises(NotPresentError):  # presence expired with the day
        svc.cast_vote("ana", 25.0)


def test_vote_validation(svc):
    svc.login("ana")
    with pytest.raises(ValueError, match="outside"):
        svc.cast_vote("ana", 140.0)
    with pytest.raises(NotAuthorizedError):
        svc.cast_vote("zoe", 30.0)


def test_implemented_is_mean_of_present(svc):
    assert svc.implemented_level() == 60.0  # nobody in: the default rules
    svc.login("ana")
    svc.cast_vote("ana", 30.0)
    svc.login("bob")  # bob stays on the default 60
    assert svc.implemented_level() == 45.0
    state = svc.get_state()
    assert state["participants"] == {
        "ana": {"vote": 30.0, "is_default": False},
        "bob": {"vote": 60.0, "is_default": True},
    }


def test_set_default_applies_to_future_logins(svc):
    svc.login("ana")
    svc.set_default(20.0)
    assert svc.state_snapshot()["occupants"]["ana"]["standing_vote"] == 60.0
    svc.login("bob")
    assert svc.state_snapshot()["occupants"]["bob"]["standing_vote"] == 20.0
    with pytest.raises(ValueError, match="outside"):
        svc.set_default(101.0)


# --- awarding ---------------------------------------------------------------


def test_award_banks_points_and_conserves_pool(svc):
    svc.login("ana")
    svc.cast_vote("ana", 30.0)
    svc.login("bob")
    svc.cast_vote("bob", 60.0)
    out = svc.award_points()
    assert sum(out["increments"].values()) == pytest.approx(100.0, abs=1e-9)
    pts = svc.get_points()
    assert pts["ana"] == pytest.approx(200.0 / 3.0)
    assert pts["bob"] == pytest.approx(100.0 / 3.0)
    assert pts["cat"] == 0.0
    with pytest.raises(ValueError, match="already awarded"):
        svc.award_points()


def test_award_rejects_future_and_empty_days(svc):
    with pytest.raises(NoParticipantsError):
        svc.award_points()
    with pytest.raises(ValueError, match="future"):
        svc.award_points(svc.today() + timedelta(days=1))


def test_award_past_day_after_clock_advance(svc):
    svc.login("ana")
    svc.cast_vote("ana", 40.0)
    day1 = svc.today()
    svc.clock.advance(days=1)
    out = svc.award_points(day1)
    assert out["day"] == day1.isoformat()
    assert svc.get_points()["ana"] == pytest.approx(100.0)


# --- lottery ----------------------------------------------------------------


def _banked(svc):
    svc.login("ana")
    svc.cast_vote("ana", 30.0)
    svc.login("bob")
    svc.cast_vote("bob", 60.0)
    svc.award_points()
    return svc


def test_lottery_deterministic_and_weighted(tmp_path):
    winners = []
    for sub in ("a", "b"):
        service = GameService(_config(), tmp_path / sub / "events.jsonl", now_fn=Clock())
        service.clock = service._now_fn
        _banked_like(service)
        winners.append(service.draw_lottery(seed=42)["winners"])
    assert winners[0] == winners[1]
    # cat holds zero points and can never win
    assert "cat" not in winners[0]
    assert len(winners[0]) == len(set(winners[0])) == 2  # only two positive balances


def _banked_like(service):
    service.login("ana")
    service.cast_vote("ana", 30.0)
    service.login("bob")
    service.cast_vote("bob", 60.0)
    service.award_points()


def test_lottery_resets_points_when_configured(svc):
    _banked(svc)
    svc.draw_lottery(seed=1)
    assert set(svc.get_points().values()) == {0.0}
    with pytest.raises(DegenerateRoundError, match="nothing to draw"):
        svc.draw_lottery(seed=2)


def test_lottery_can_keep_balances(tmp_path):
    service = GameService(
        _config(lottery_resets_points=False), tmp_path / "events.jsonl", now_fn=Clock()
    )
    _banked_like(service)
    before = service.get_points()
    service.draw_lottery(seed=5)
    assert service.get_points() == before


def test_lottery_respects_winner_cap(tmp_path):
    service = GameService(
        _config(winners_per_draw=1), tmp_path / "events.jsonl", now_fn=Clock()
    )
    _banked_like(service)
    assert len(service.draw_lottery(seed=3)["winners"]) == 1


# --- replay and recovery ----------------------------------------------------


def _scripted_history(svc):
    svc.login("ana")
    svc.cast_vote("ana", 30.0)
    svc.login("bob")
    svc.set_default(20.0)
    svc.award_points()
    svc.clock.advance(days=1)
    svc.login("cat")
    svc.cast_vote("cat", 10.0)
    svc.draw_lottery(seed=7)


def test_replay_reconstructs_state_exactly(svc, tmp_path):
    _scripted_history(svc)
    replayed = GameService(_config(), svc.log_path, now_fn=svc.clock)
    assert replayed.state_snapshot() == svc.state_snapshot()


def test_snapshot_plus_tail_recovery(svc):
    svc.login("ana")
    svc.cast_vote("ana", 30.0)
    svc.save_snapshot()
    svc.login("bob")
    svc.cast_vote("bob", 45.0)  # tail beyond the snapshot
    recovered = GameService(_config(), svc.log_path, now_fn=svc.clock)
    assert recovered.state_snapshot() == svc.state_snapshot()


def test_automatic_snapshots(tmp_path):
    clock = Clock()
    service = GameService(
        _config(), tmp_path / "events.jsonl", now_fn=clock, snapshot_every=3
    )
    service.clock = clock
    _banked(service)
    assert service.snapshot_path.exists()
    recovered = GameService(_config(), service.log_path, now_fn=clock)
    assert recovered.state_snapshot() == service.state_snapshot()


def test_export_round_trips_through_ingest(svc, tmp_path):
    _scripted_history(svc)
    out = tmp_path / "export.csv"
    out.write_text(svc.export_csv())
    records = ingest_votes(out)
    assert [(r.occupant_id, r.vote, r.is_default) for r in records] == [
        ("ana", 60.0, True),
        ("ana", 30.0, False),
        ("bob", 60.0, True),
        ("cat", 20.0, True),
        ("cat", 10.0, False),
    ]


# --- concurrency ------------------------------------------------------------


def test_concurrent_clients_leave_replayable_log(tmp_path):
    n = 8
    clock = Clock()
    service = GameService(_config(n=n), tmp_path / "events.jsonl", now_fn=clock)
    names = sorted(service.config.occupant_tokens)
    rng = np.random.default_rng(0)
    votes = rng.uniform(0, 100, size=(n, 20))
    errors = []

    def client(k):
        try:
            service.login(names[k])
            for v in votes[k]:
                service.cast_vote(names[k], float(v))
        except Exception as exc:  # pragma: no cover - failure detail
            errors.append(exc)

    threads = [threading.Thread(target=client, args=(k,)) for k in range(n)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    # every write is in the log, and the log alone explains the final state
    replayed = GameService(_config(n=n), service.log_path, now_fn=clock)
    assert replayed.state_snapshot() == service.state_snapshot()
    final = service.state_snapshot()
    for k, name in enumerate(names):
        assert final["occupants"][name]["standing_vote"] == votes[k][-1]


# --- HTTP layer -------------------------------------------------------------


@pytest.fixture
def client(svc):
    from fastapi.testclient import TestClient

    from lightgame.service import create_app

    return TestClient(create_app(svc)), svc


def test_http_auth_codes(client):
    http, _ = client
    assert http.post("/login").status_code == 401
    assert http.post("/login", headers={"X-Auth-Token": "bogus"}).status_code == 401
    # admin token on an occupant route
    assert http.post("/login", headers={"X-Auth-Token": "tok-admin"}).status_code == 403
    # occupant token on an admin route
    r = http.post("/admin/default", json={"level": 20}, headers={"X-Auth-Token": "tok-ana"})
    assert r.status_code == 403


def test_http_vote_flow(client):
    http, _ = client
    ana = {"X-Auth-Token": "tok-ana"}
    assert http.post("/vote", json={"value": 30}, headers=ana).status_code == 409
    view = http.post("/login", headers=ana).json()
    assert view["standing_vote"] == 60.0
    assert http.post("/vote", json={"value": 130}, headers=ana).status_code == 400
    view = http.post("/vote", json={"value": 30}, headers=ana).json()
    assert view["standing_vote"] == 30.0
    state = http.get("/state", headers=ana).json()
    assert state["implemented"] == 30.0


def test_http_admin_flow_and_export(client, tmp_path):
    http, svc = client
    ana = {"X-Auth-Token": "tok-ana"}
    admin = {"X-Auth-Token": "tok-admin"}
    http.post("/login", headers=ana)
    http.post("/vote", json={"value": 30}, headers=ana)
    assert http.post("/admin/default", json={"level": 20}, headers=admin).json() == {
        "default_level": 20.0
    }
    award = http.post("/admin/award", json={}, headers=admin).json()
    assert award["increments"]["ana"] == pytest.approx(100.0)
    assert http.post("/admin/award", json={}, headers=admin).status_code == 400
    points = http.get("/points", headers=ana).json()["points"]
    assert points["ana"] == pytest.approx(100.0)
    lot = http.post("/admin/lottery", json={"seed": 9}, headers=admin).json()
    assert lot["winners"] == ["ana"]
    csv_text = http.get("/export", headers=ana).text
    out = tmp_path / "export.csv"
    out.write_text(csv_text)
    assert [r.vote for r in ingest_votes(out)] == [60.0, 30.0]


def test_http_award_specific_day(client):
    http, svc = client
    admin = {"X-Auth-Token": "tok-admin"}
    http.post("/login", headers={"X-Auth-Token": "tok-bob"})
    day = svc.today().isoformat()
    svc.clock.advance(days=1)
    r = http.post("/admin/award", json={"day": day}, headers=admin)
    assert r.status_code == 200 and r.json()["day"] == day
