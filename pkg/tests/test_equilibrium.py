"""Equilibrium solver and stability analysis against best-response oracles."""

import numpy as np
import pytest

from lightgame.equilibrium import SolverParams, solve_nash, stability_check
from lightgame.errors import DomainError
from lightgame.game import GameConfig, ThetaVector, VoteProfile

from oracles import best_response_bisect, best_response_equilibrium


def test_solver_params_validation():
    with pytest.raises(ValueError):
        SolverParams(step_size=0.0)
    with pytest.raises(ValueError):
        SolverParams(max_iters=0)
    with pytest.raises(ValueError):
        SolverParams(convergence_tol=-1.0)
    with pytest.raises(ValueError):
        SolverParams(epsilon_check=0.0)
    with pytest.raises(ValueError):
        SolverParams(grid_step=0.0)
    assert SolverParams().step_size == 0.05


def test_known_two_player_slide_to_floor():
    cfg = GameConfig(n=2, rho=100.0)
    res = solve_nash(ThetaVector((180.0, 0.0)), VoteProfile.all_active((30.0, 60.0)), cfg)
    assert res.converged
    assert abs(res.profile.votes[0]) <= 1e-3
    assert abs(res.profile.votes[1]) <= 1e-3
    assert res.certificate.valid


def test_single_active_matches_bisection_oracle():
    rng = np.random.default_rng(41)
    for _ in range(30):
        n = int(rng.integers(2, 7))
        cfg = GameConfig(n=n, rho=100.0)
        defaults = rng.uniform(20.0, 90.0, n - 1)
        votes = (50.0,) + tuple(defaults)
        roles = ("active",) + ("default",) * (n - 1)
        prof = VoteProfile(votes, roles)
        theta = ThetaVector((float(rng.uniform(0.0, 5000.0)),) + (0.0,) * (n - 1))
        res = solve_nash(theta, prof, cfg)
        assert res.converged
        best = best_response_bisect(0, prof, theta, cfg)
        assert res.profile.votes[0] == pytest.approx(best, abs=1e-4)
        for i in range(1, n):
            assert res.profile.votes[i] == votes[i]  # defaults never move


def test_multi_active_matches_best_response_oracle():
    rng = np.random.default_rng(83)
    for _ in range(10):
        n = int(rng.integers(2, 5))
        cfg = GameConfig(n=n, rho=100.0)
        prof = VoteProfile.all_active(tuple(rng.uniform(20.0, 80.0, n)))
        theta = ThetaVector(tuple(rng.uniform(0.0, 800.0, n)))
        res = solve_nash(theta, prof, cfg)
        assert res.converged and res.certificate.valid
        ref = best_response_equilibrium(theta, res.profile, cfg)
        for i in range(n):
            assert res.profile.votes[i] == pytest.approx(ref.votes[i], abs=1e-4)


def test_zero_weight_game_settles_at_initial_mean():
    # pure comfort dynamics preserve the mean and contract to consensus
    cfg = GameConfig(n=3, rho=100.0)
    init = VoteProfile.all_active((20.0, 50.0, 80.0))
    res = solve_nash(ThetaVector.zeros(3), init, cfg)
    assert res.converged
    for v in res.profile.votes:
        assert v == pytest.approx(50.0, abs=1e-6)
    assert res.certificate.valid


def test_absent_players_are_ignored():
    cfg = GameConfig(n=3, rho=100.0)
    prof = VoteProfile((50.0, 70.0, 33.0), ("active", "default", "absent"))
    theta = ThetaVector((200.0, 0.0, 0.0))
    res = solve_nash(theta, prof, cfg)
    assert res.converged
    assert res.profile.votes[2] == 33.0
    best = best_response_bisect(0, VoteProfile((50.0, 70.0, 33.0), ("active", "default", "absent")), theta, cfg)
    assert res.profile.votes[0] == pytest.approx(best, abs=1e-4)


def test_no_active_players_returns_input():
    cfg = GameConfig(n=2, rho=100.0)
    prof = VoteProfile((60.0, 90.0), ("default", "default"))
    res = solve_nash(ThetaVector.zeros(2), prof, cfg)
    assert res.converged and res.profile.votes == (60.0, 90.0)
    assert res.certificate.valid  # nobody to certify
    assert not res.stability.applicable


def test_active_init_outside_playable_interval_rejected():
    cfg = GameConfig(n=2, rho=100.0)
    with pytest.raises(DomainError):
        solve_nash(ThetaVector.zeros(2), VoteProfile.all_active((95.0, 50.0)), cfg)
    # a default may hold the baseline itself; the pole of the active's own
    # log term cancels against the round denominator there, so the points
    # motive vanishes and the solve stays well posed
    res = solve_nash(ThetaVector((400.0, 0.0)), VoteProfile((50.0, 90.0), ("active", "default")), cfg)
    assert res.converged
    # comfort alone pulls the active toward the fixed 90, so it pins at
    # the playable ceiling one margin below the baseline
    assert res.profile.votes[0] == pytest.approx(cfg.x_b - cfg.domain_margin, abs=1e-6)


def test_companion_above_baseline_makes_round_unsolvable():
    # with a companion above the baseline, pushing one's own vote up drives
    # the shared denominator to zero and the formal share diverges; the
    # solver refuses rather than returning a meaningless boundary point
    cfg = GameConfig(n=2, rho=100.0)
    prof = VoteProfile((50.0, 95.0), ("active", "default"))
    with pytest.raises(DomainError):
        solve_nash(ThetaVector((100.0, 0.0)), prof, cfg)


def test_max_iters_reports_non_convergence():
    cfg = GameConfig(n=2, rho=100.0)
    params = SolverParams(max_iters=3, epsilon_check=1e-3)
    res = solve_nash(ThetaVector((180.0, 0.0)), VoteProfile.all_active((30.0, 60.0)), cfg, params)
    assert not res.converged and res.iterations == 3
    assert not res.certificate.valid


def test_stability_interior_equilibrium():
    cfg = GameConfig(n=2, rho=100.0)
    theta = ThetaVector((100.0, 0.0))
    prof = VoteProfile((50.0, 60.0), ("active", "default"))
    res = solve_nash(theta, prof, cfg)
    report = stability_check(res.profile, theta, cfg)
    assert report.applicable and report.stable
    assert all(report.own_curvature_negative)
    assert all(z.real < 0 for z in report.eigenvalues)


def test_stability_not_applicable_on_boundary():
    cfg = GameConfig(n=2, rho=100.0)
    report = stability_check(VoteProfile.all_active((0.0, 50.0)), ThetaVector.zeros(2), cfg)
    assert not report.applicable and report.stable is None
    assert "boundary" in report.note


def test_stability_zero_eigenvalue_flagged():
    cfg = GameConfig(n=3, rho=100.0)
    prof = VoteProfile.all_active((40.0, 40.0, 40.0))
    report = stability_check(prof, ThetaVector.zeros(3), cfg)
    assert report.applicable
    assert report.stable is False
    assert "zero real part" in report.note


def test_stability_player_subset():
    cfg = GameConfig(n=2, rho=100.0)
    prof = VoteProfile((55.0, 90.0), ("active", "default"))
    report = stability_check(prof, ThetaVector((100.0, 0.0)), cfg, players=(0,))
    assert report.applicable and report.players == (0,)
    full = stability_check(prof, ThetaVector((100.0, 0.0)), cfg)
    assert not full.applicable  # the default at the ceiling blocks the full check


def test_solver_deterministic():
    cfg = GameConfig(n=4, rho=250.0)
    theta = ThetaVector((300.0, 10.0, 0.0, 1200.0))
    init = VoteProfile.all_active((25.0, 45.0, 65.0, 85.0))
    a = solve_nash(theta, init, cfg)
    b = solve_nash(theta, init, cfg)
    assert a.profile.votes == b.profile.votes
    assert a.iterations == b.iterations
