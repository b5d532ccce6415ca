"""Equilibrium computation for the lighting game.

The solver follows each active player's own-utility gradient and projects
onto the playable interval after every step (forward Euler discretization of
the projected pseudogradient flow). Default players hold their votes fixed,
absent occupants are excluded everywhere, and the result carries a grid
certificate plus an eigenvalue stability report so callers never have to
trust the iteration blindly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .game import (
    GameConfig,
    NashCertificate,
    ThetaVector,
    VoteProfile,
    epsilon_nash_check,
    omega_jacobian,
)
from .validation import check_profile, check_theta

# Eigenvalue real parts inside [-tol, tol] count as zero: stability undetermined.
_EIG_TOL = 1e-10


@dataclass(frozen=True)
class SolverParams:
    """Knobs for the projected gradient iteration and its certificate."""

    step_size: float = 0.05
    max_iters: int = 200_000
    convergence_tol: float = 1e-9
    epsilon_check: float = 1e-3
    grid_step: float = 0.1

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.convergence_tol > 0:
            raise ValueError(f"convergence_tol must be positive, got {self.convergence_tol}")
        if not self.epsilon_check > 0:
            raise ValueError(f"epsilon_check must be positive, got {self.epsilon_check}")
        if not self.grid_step > 0:
            raise ValueError(f"grid_step must be positive, got {self.grid_step}")


@dataclass(frozen=True)
class StabilityReport:
    """Eigenvalue test of the gradient-map Jacobian at a profile.

    ``applicable`` is False on boundary profiles: the active constraint duals
    are not inferred, so nothing is claimed there. ``stable`` is True only
    when every eigenvalue real part is strictly negative; a zero real part
    (within tolerance) reports False with a note rather than a guess.
    """

    applicable: bool
    stable: bool | None
    eigenvalues: tuple[complex, ...]
    own_curvature_negative: tuple[bool, ...]
    players: tuple[int, ...]
    note: str = ""


@dataclass(frozen=True)
class SolveResult:
    profile: VoteProfile
    iterations: int
    converged: bool
    certificate: NashCertificate
    stability: StabilityReport

    @property
    def stable(self) -> bool | None:
        return self.stability.stable


def stability_check(
    profile: VoteProfile,
    theta: ThetaVector,
    cfg: GameConfig,
    players=None,
) -> StabilityReport:
    """Eigenvalue stability of the gradient dynamics restricted to ``players``.

    ``players`` defaults to all participants. Every checked player must sit
    strictly inside (lower, x_b - margin); otherwise the report is marked not
    applicable.
    """
    parts = check_profile(profile, cfg)
    check_theta(theta, len(profile))
    players = tuple(players) if players is not None else parts
    if not players:
        return StabilityReport(False, None, (), (), (), note="no players to check")
    for i in players:
        v = profile.votes[i]
        if not cfg.lower < v < cfg.effective_upper:
            return StabilityReport(
                False,
                None,
                (),
                (),
                players,
                note=f"vote {v} of player {i} on the boundary; duals not inferred",
            )
    jac = omega_jacobian(profile, theta, cfg, players=players)
    eig = np.linalg.eigvals(jac)
    max_re = float(eig.real.max())
    stable = bool(max_re < -_EIG_TOL)
    note = ""
    if not stable and max_re <= _EIG_TOL:
        note = "eigenvalue with zero real part; stability undetermined"
    return StabilityReport(
        applicable=True,
        stable=stable,
        eigenvalues=tuple(complex(z) for z in eig),
        own_curvature_negative=tuple(bool(jac[k, k] < 0.0) for k in range(len(players))),
        players=players,
        note=note,
    )


def solve_nash(
    theta: ThetaVector,
    init: VoteProfile,
    cfg: GameConfig,
    params: SolverParams | None = None,
) -> SolveResult:
    """Iterate projected gradient ascent to a Nash profile.

    Active players move along their own-utility gradient with a fixed step
    and are clipped to [lower, min(upper, x_b - margin)] after every update;
    default players keep their initial votes; absent slots are untouched.
    Convergence is max absolute displacement below ``convergence_tol``. The
    returned certificate grid-checks the active players at
    ``epsilon_check``; the stability report covers the active subblock.

    Deterministic: no randomness, no dependence on iteration order.
    """
    if params is None:
        params = SolverParams()
    parts = check_profile(init, cfg)
    check_theta(theta, len(init))
    active = init.active_players()
    for i in active:
        v = init.votes[i]
        if not cfg.lower <= v <= cfg.effective_upper:
            raise DomainError(
                f"active init vote {v} for player {i} outside "
                f"[{cfg.lower}, {cfg.effective_upper}]"
            )

    x = np.asarray(init.votes, dtype=float)
    part_idx = np.fromiter(parts, dtype=int)
    act_idx = np.fromiter(active, dtype=int) if active else np.empty(0, dtype=int)
    n = len(parts)
    s = float(x[part_idx].sum())
    th_act = np.asarray([theta.theta[i] for i in active])
    lead = 2.0 * (1.0 - 1.0 / n)
    iterations = 0
    converged = False
    for iterations in range(1, params.max_iters + 1):
        denom = n * cfg.x_b - s
        if denom <= 0.0:
            raise DomainError(f"points denominator {denom} not positive during iteration")
        if act_idx.size == 0:
            converged = True
            break
        xa = x[act_idx]
        grad = lead * (s / n - xa) + th_act * (-1.0 / (cfg.x_b - xa) + 1.0 / denom)
        new = np.clip(xa + params.step_size * grad, cfg.lower, cfg.effective_upper)
        disp = float(np.max(np.abs(new - xa)))
        s += float((new - xa).sum())
        x[act_idx] = new
        if disp < params.convergence_tol:
            converged = True
            break

    profile = VoteProfile(tuple(x), init.roles)
    certificate = epsilon_nash_check(
        profile,
        theta,
        cfg,
        params.epsilon_check,
        grid_step=params.grid_step,
        players=active,
    )
    stability = stability_check(profile, theta, cfg, players=active)
    return SolveResult(
        profile=profile,
        iterations=iterations,
        converged=converged,
        certificate=certificate,
        stability=stability,
    )
