"""Core model of the lighting game.

Occupants vote for a lighting level between ``lower`` and ``upper`` percent.
The mean of the participating votes is the implemented setting, and a pool of
``rho`` points is split between participants in proportion to how far below
the baseline level ``x_b`` each vote sits. A participant weighs comfort
(quadratic loss around the implemented mean) against winning points:

    f_i(x) = -(xbar - x_i)**2 + theta_i * log(rho * (x_b - x_i) / D(x))
    D(x)   = n * x_b - sum_j x_j

where ``xbar``, the sum, and the participant count ``n`` run over non-absent
occupants only. Absent occupants never enter any evaluated quantity.

All derivative formulas fold the mean sensitivity d(xbar)/dx_i = 1/n in
analytically:

    df_i/dx_i = 2 * (1 - 1/n) * (xbar - x_i)
                + theta_i * (-1 / (x_b - x_i) + 1 / D(x))

The log forces a guard band below the baseline: a single vote is only
evaluable on [lower, min(upper, x_b - domain_margin)]. Evaluation outside
that interval raises :class:`~lightgame.errors.DomainError`; nothing clamps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import fmean
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateRoundError, DomainError
from .validation import check_duals, check_own_vote, check_profile, check_theta

ACTIVE = "active"
DEFAULT = "default"
ABSENT = "absent"
ROLES = frozenset((ACTIVE, DEFAULT, ABSENT))

# Shares denominator below this fraction of its n * x_b scale counts as a
# degenerate round (every participant at the baseline).
_DEGENERATE_REL_TOL = 1e-9


@dataclass(frozen=True)
class GameConfig:
    """Static parameters of one game instance.

    ``domain_margin`` keeps evaluable votes away from the baseline so the
    points logarithm stays finite; the playable interval for one vote is
    [lower, min(upper, x_b - domain_margin)]. The platform itself may accept
    votes above that (they earn zero points); the analytical ops do not.
    """

    n: int
    rho: float
    x_b: float = 90.0
    lower: float = 0.0
    upper: float = 100.0
    domain_margin: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"player count must be >= 1, got {self.n}")
        if not self.rho > 0:
            raise ValueError(f"points pool rho must be positive, got {self.rho}")
        if self.lower < 0 or not self.lower < self.upper:
            raise ValueError(f"need 0 <= lower < upper, got [{self.lower}, {self.upper}]")
        if not self.lower < self.x_b:
            raise ValueError(f"baseline x_b={self.x_b} must exceed lower={self.lower}")
        if not 0 < self.domain_margin < self.x_b - self.lower:
            raise ValueError(f"domain_margin {self.domain_margin} outside (0, x_b - lower)")

    @property
    def effective_upper(self) -> float:
        return min(self.upper, self.x_b - self.domain_margin)


@dataclass(frozen=True)
class VoteProfile:
    """One round of votes with per-occupant roles.

    Roles: ``active`` voted by hand, ``default`` is present but left the
    standing default vote, ``absent`` did not show up. Vote values in absent
    slots are carried but ignored everywhere.
    """

    votes: tuple[float, ...]
    roles: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "votes", tuple(float(v) for v in self.votes))
        object.__setattr__(self, "roles", tuple(self.roles))
        if len(self.votes) != len(self.roles):
            raise ValueError(f"{len(self.votes)} votes but {len(self.roles)} roles")
        bad = set(self.roles) - ROLES
        if bad:
            raise ValueError(f"unknown roles {sorted(bad)}; expected one of {sorted(ROLES)}")

    @classmethod
    def all_active(cls, votes: Iterable[float]) -> "VoteProfile":
        votes = tuple(votes)
        return cls(votes, (ACTIVE,) * len(votes))

    def __len__(self) -> int:
        return len(self.votes)

    def participants(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.roles) if r != ABSENT)

    def active_players(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.roles) if r == ACTIVE)

    def with_vote(self, i: int, value: float) -> "VoteProfile":
        votes = list(self.votes)
        votes[i] = value
        return VoteProfile(tuple(votes), self.roles)


@dataclass(frozen=True)
class ThetaVector:
    """Per-occupant nonnegative points weights, aligned with profile indices."""

    theta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        for i, t in enumerate(self.theta):
            if t < 0:
                raise ValueError(f"theta[{i}] = {t} negative; concavity needs theta >= 0")

    @classmethod
    def zeros(cls, n: int) -> "ThetaVector":
        return cls((0.0,) * n)

    def __len__(self) -> int:
        return len(self.theta)


@dataclass(frozen=True)
class NashCertificate:
    """Grid certificate: per-player best improvement found by deviating."""

    epsilon: float
    grid_step: float
    players: tuple[int, ...]
    per_player_gap: tuple[float, ...]

    @property
    def valid(self) -> bool:
        return max(self.per_player_gap, default=0.0) <= self.epsilon

    @property
    def max_gap(self) -> float:
        return max(self.per_player_gap, default=0.0)


def _round_terms(profile: VoteProfile, cfg: GameConfig):
    """Participant indices and the round aggregates (n, sum, mean, D)."""
    parts = check_profile(profile, cfg)
    votes = np.asarray([profile.votes[i] for i in parts], dtype=float)
    n = len(parts)
    s = float(votes.sum())
    return parts, votes, n, s, n * cfg.x_b - s


def _require_participant(profile: VoteProfile, i: int) -> None:
    if not 0 <= i < len(profile):
        raise IndexError(f"occupant index {i} out of range")
    if profile.roles[i] == ABSENT:
        raise ValueError(f"occupant {i} is absent this round")


def implemented_setting(profile: VoteProfile) -> float:
    """Mean of the participating votes; the level the room actually gets."""
    parts = profile.participants()
    if not parts:
        from .errors import NoParticipantsError

        raise NoParticipantsError("no participating occupants in profile")
    return fmean(profile.votes[i] for i in parts)


def points_share(i: int, profile: VoteProfile, cfg: GameConfig) -> float:
    """Occupant ``i``'s share of the points pool for the round.

    share_i = rho * (x_b - x_i) / (n * x_b - sum_j x_j)

    Requires every participating vote at or below x_b - domain_margin, which
    keeps each share positive; shares then sum to rho exactly.
    """
    parts, votes, n, s, denom = _round_terms(profile, cfg)
    _require_participant(profile, i)
    for j, v in zip(parts, votes):
        if v > cfg.effective_upper:
            raise DomainError(
                f"vote {v} of occupant {j} above {cfg.effective_upper}; shares undefined"
            )
    if denom <= _DEGENERATE_REL_TOL * n * cfg.x_b:
        raise DegenerateRoundError("every vote at the baseline; shares denominator is zero")
    return cfg.rho * (cfg.x_b - profile.votes[i]) / denom


def comfort_gradient(x_i: float, xbar: float, n: int) -> float:
    """d/dx_i of -(xbar - x_i)**2 with the 1/n mean sensitivity folded in."""
    return 2.0 * (1.0 - 1.0 / n) * (xbar - x_i)


def points_gradient(x_i: float, votes_sum: float, n: int, cfg: GameConfig) -> float:
    """d/dx_i of log(rho (x_b - x_i) / (n x_b - sum)); caller guards the domain."""
    return -1.0 / (cfg.x_b - x_i) + 1.0 / (n * cfg.x_b - votes_sum)


def utility(i: int, profile: VoteProfile, theta: ThetaVector, cfg: GameConfig) -> float:
    """Utility of occupant ``i`` at the profile: comfort plus points term."""
    check_theta(theta, len(profile))
    parts, votes, n, s, denom = _round_terms(profile, cfg)
    _require_participant(profile, i)
    x_i = profile.votes[i]
    check_own_vote(x_i, cfg, who=i)
    if denom <= 0.0:
        raise DomainError(f"points denominator {denom} not positive; round not evaluable")
    xbar = s / n
    value = -((xbar - x_i) ** 2)
    th = theta.theta[i]
    if th:
        value += th * math.log(cfg.rho * (cfg.x_b - x_i) / denom)
    return value


def utility_gradient(i: int, profile: VoteProfile, theta: ThetaVector, cfg: GameConfig) -> float:
    """Own-vote derivative of occupant ``i``'s utility at the profile."""
    check_theta(theta, len(profile))
    parts, votes, n, s, denom = _round_terms(profile, cfg)
    _require_participant(profile, i)
    x_i = profile.votes[i]
    check_own_vote(x_i, cfg, who=i)
    if denom <= 0.0:
        raise DomainError(f"points denominator {denom} not positive; round not evaluable")
    g = comfort_gradient(x_i, s / n, n)
    th = theta.theta[i]
    if th:
        g += th * points_gradient(x_i, s, n, cfg)
    return g


def omega(
    profile: VoteProfile,
    theta: ThetaVector,
    cfg: GameConfig,
    duals: Sequence[Sequence[float]] | None = None,
) -> np.ndarray:
    """Stacked per-player Lagrangian derivatives over participants.

    Entry i is df_i/dx_i plus the box-constraint terms: the upper bound
    contributes -mu_i1, the lower bound +mu_i2. ``duals`` is one (mu_i1,
    mu_i2) row per participant, nonnegative and only positive when the
    matching bound of the playable interval is active; omitted means zeros.

    At an interior Nash profile (zero duals) this vector is zero; at a
    boundary Nash profile the active-constraint duals cancel the gradient.
    """
    check_theta(theta, len(profile))
    parts, votes, n, s, denom = _round_terms(profile, cfg)
    if denom <= 0.0:
        raise DomainError(f"points denominator {denom} not positive; round not evaluable")
    if duals is None:
        duals = [(0.0, 0.0)] * n
    check_duals(duals, n)
    xbar = s / n
    out = np.empty(n)
    for k, i in enumerate(parts):
        x_i = profile.votes[i]
        check_own_vote(x_i, cfg, who=i)
        g = comfort_gradient(x_i, xbar, n)
        th = theta.theta[i]
        if th:
            g += th * points_gradient(x_i, s, n, cfg)
        mu_up, mu_lo = duals[k]
        if mu_up > 0 and x_i < cfg.effective_upper - 1e-9:
            raise ValueError(f"upper dual {mu_up} positive but vote {x_i} not at the bound")
        if mu_lo > 0 and x_i > cfg.lower + 1e-9:
            raise ValueError(f"lower dual {mu_lo} positive but vote {x_i} not at the bound")
        out[k] = g - mu_up + mu_lo
    return out


def omega_jacobian(
    profile: VoteProfile,
    theta: ThetaVector,
    cfg: GameConfig,
    players: Sequence[int] | None = None,
) -> np.ndarray:
    """Jacobian of the stacked gradient map, rows/cols over selected players.

    With D = n * x_b - sum_j x_j over all participants:

        J[i][i] = -2 * (1 - 1/n)**2 + theta_i * (-(x_b - x_i)**-2 + D**-2)
        J[i][j] =  2 * (1/n) * (1 - 1/n) + theta_i * D**-2        (j != i)

    ``players`` defaults to all participants; a subset gives the subblock for
    those players (their votes must be evaluable; the rest only enter through
    n and D). Dual terms are constant in x, so they never appear here.
    """
    check_theta(theta, len(profile))
    parts, votes, n, s, denom = _round_terms(profile, cfg)
    if denom <= 0.0:
        raise DomainError(f"points denominator {denom} not positive; round not evaluable")
    if players is None:
        players = parts
    else:
        players = tuple(players)
        part_set = set(parts)
        for i in players:
            if i not in part_set:
                raise ValueError(f"player {i} is not a participant")
    m = len(players)
    th = np.asarray([theta.theta[i] for i in players])
    x = np.empty(m)
    for k, i in enumerate(players):
        check_own_vote(profile.votes[i], cfg, who=i)
        x[k] = profile.votes[i]
    inv_d2 = 1.0 / denom**2
    off = 2.0 * (1.0 / n) * (1.0 - 1.0 / n)
    jac = np.tile((off + th * inv_d2)[:, None], (1, m))
    diag = -2.0 * (1.0 - 1.0 / n) ** 2 + th * (-((cfg.x_b - x) ** -2.0) + inv_d2)
    np.fill_diagonal(jac, diag)
    return jac


def epsilon_nash_check(
    profile: VoteProfile,
    theta: ThetaVector,
    cfg: GameConfig,
    epsilon: float,
    grid_step: float = 0.1,
    players: Sequence[int] | None = None,
) -> NashCertificate:
    """Certify the profile as an epsilon-Nash point by grid scan.

    For each checked player, scans unilateral deviations over a grid on
    [lower, min(upper, x_b - domain_margin)] including both endpoints, and
    records the best improvement over the current utility, floored at zero.
    Valid means no player improves by more than epsilon anywhere on the grid.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not grid_step > 0:
        raise ValueError(f"grid_step must be positive, got {grid_step}")
    check_theta(theta, len(profile))
    parts, votes, n, s, denom = _round_terms(profile, cfg)
    if players is None:
        players = parts
    else:
        players = tuple(players)
        part_set = set(parts)
        for i in players:
            if i not in part_set:
                raise ValueError(f"player {i} is not a participant")
    eff = cfg.effective_upper
    grid = np.arange(cfg.lower, eff, grid_step)
    grid = np.append(grid, eff)  # arange stops short; always include the top end
    gaps = []
    for i in players:
        x_i = profile.votes[i]
        base = utility(i, profile, theta, cfg)
        s_other = s - x_i
        xbar_dev = (s_other + grid) / n
        cand = -((xbar_dev - grid) ** 2)
        denom_dev = n * cfg.x_b - s_other - grid
        ok = denom_dev > 0.0
        th = theta.theta[i]
        if th:
            vals = np.full_like(grid, -np.inf)
            vals[ok] = cand[ok] + th * np.log(cfg.rho * (cfg.x_b - grid[ok]) / denom_dev[ok])
        else:
            vals = np.where(ok, cand, -np.inf)
        gaps.append(max(0.0, float(vals.max() - base)))
    return NashCertificate(
        epsilon=float(epsilon),
        grid_step=float(grid_step),
        players=tuple(players),
        per_player_gap=tuple(gaps),
    )
