"""Input validation helpers used across the package.

Everything here raises; nothing clamps. Callers that want lenient behavior
(the live service allows votes up to ``upper`` even though they earn nothing)
implement it explicitly on their side.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

from .errors import DomainError, NoParticipantsError

if TYPE_CHECKING:  # pragma: no cover
    from .game import GameConfig, ThetaVector, VoteProfile


def check_profile(profile: "VoteProfile", cfg: "GameConfig") -> tuple[int, ...]:
    """Validate a profile against a config and return the participant indices.

    Checks length against ``cfg.n``, at least one participant, and every
    participating vote inside [lower, upper]. The tighter per-player log-domain
    guard is applied by the evaluation ops, not here.
    """
    if len(profile) != cfg.n:
        raise ValueError(f"profile has {len(profile)} occupants, config expects {cfg.n}")
    parts = profile.participants()
    if not parts:
        raise NoParticipantsError("no participating occupants in profile")
    for i in parts:
        v = profile.votes[i]
        if not cfg.lower <= v <= cfg.upper:
            raise DomainError(f"vote {v} for occupant {i} outside [{cfg.lower}, {cfg.upper}]")
    return parts


def check_own_vote(x_i: float, cfg: "GameConfig", who: object = None) -> None:
    """Per-player log-domain guard: own vote must lie in [lower, x_b - margin]."""
    if not cfg.lower <= x_i <= cfg.effective_upper:
        label = "" if who is None else f" for occupant {who}"
        raise DomainError(
            f"vote {x_i}{label} outside the playable interval "
            f"[{cfg.lower}, {cfg.effective_upper}]"
        )


def check_theta(theta: "ThetaVector", n: int) -> None:
    if len(theta) != n:
        raise ValueError(f"theta has {len(theta)} entries, profile has {n}")


def check_duals(duals: Sequence[Sequence[float]], n: int) -> None:
    if len(duals) != n:
        raise ValueError(f"duals has {len(duals)} rows, expected {n}")
    for row in duals:
        if len(row) != 2:
            raise ValueError("each dual row must be (upper, lower) multipliers")
        if row[0] < 0 or row[1] < 0:
            raise ValueError(f"negative dual multiplier in {tuple(row)}")


def check_positive(value: float, name: str) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
