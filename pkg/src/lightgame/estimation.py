"""Estimate per-occupant points weights from observed votes.

At an interior best response the own-vote utility derivative vanishes, so
each usable observation k of occupant i gives one linear residual equation
in theta_i:

    psi_i[k] + theta_i * phi_i[k] = 0

    psi_i[k] = 2 * (1 - 1/n_k) * (xbar_k - x_ik)          (comfort part)
    phi_i[k] = -1 / (x_b - x_ik) + 1 / (n_k * x_b - S_k)  (points part)

Least squares over the stacked equations, constrained to theta_i >= 0, has
the closed form

    theta_hat_i = max(0, -<psi_i, phi_i> / <phi_i, phi_i>)

Usable means: occupant i cast a true (non-default) vote strictly below
x_b - margin that round. Other participants enter only through n_k and S_k.
Everything is separable per occupant, so occupants never interfere.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .data import Observation, _REGION_ORDER
from .errors import DataFormatError, IndeterminateThetaError, InsufficientDataError
from .game import GameConfig, comfort_gradient, points_gradient

logger = logging.getLogger(__name__)

# Below this squared norm the points column cannot identify theta.
_PHI_NORM_TOL = 1e-24


@dataclass(frozen=True)
class ResidualColumns:
    """Stacked residual columns for one occupant, plus filtering counts."""

    psi: np.ndarray
    phi: np.ndarray
    n_used: int
    n_excluded_domain: int  # true votes at/above the cutoff, or bad denominator

    def __post_init__(self):
        if self.psi.shape != self.phi.shape:
            raise ValueError("psi and phi must align")


@dataclass(frozen=True)
class OccupantTheta:
    theta: float
    n_obs: int
    flagged: bool  # too few observations to trust
    boot_mean: float | None = None
    boot_std: float | None = None


@dataclass(frozen=True)
class ThetaEstimate:
    """Per-occupant estimates plus the occupants that produced none."""

    occupants: dict[str, OccupantTheta] = field(default_factory=dict)
    skipped: dict[str, str] = field(default_factory=dict)

    def theta_of(self, occupant: str) -> float | None:
        entry = self.occupants.get(occupant)
        return entry.theta if entry is not None else None


def build_residual_columns(
    observations: Sequence[Observation], occupant: str, cfg: GameConfig
) -> ResidualColumns:
    """Stack (psi, phi) over the rounds where ``occupant`` truly voted.

    Raises :class:`InsufficientDataError` when nothing survives filtering.
    """
    psi, phi = [], []
    excluded = 0
    cutoff = cfg.x_b - cfg.domain_margin
    for obs in observations:
        entry = obs.votes.get(occupant)
        if entry is None or entry.is_default:
            continue
        x_i = entry.value
        if x_i >= cutoff:
            excluded += 1
            continue
        n = len(obs.votes)
        s = sum(v.value for v in obs.votes.values())
        denom = n * cfg.x_b - s
        if denom <= 0.0:
            excluded += 1
            continue
        psi.append(comfort_gradient(x_i, s / n, n))
        phi.append(points_gradient(x_i, s, n, cfg))
    if not psi:
        raise InsufficientDataError(occupant)
    return ResidualColumns(
        psi=np.asarray(psi),
        phi=np.asarray(phi),
        n_used=len(psi),
        n_excluded_domain=excluded,
    )


def closed_form_theta(psi: np.ndarray, phi: np.ndarray, occupant: str = "?") -> float:
    """Nonnegative least-squares weight for stacked residual columns."""
    phi_norm = float(phi @ phi)
    if phi_norm < _PHI_NORM_TOL:
        raise IndeterminateThetaError(occupant)
    return max(0.0, float(-(psi @ phi) / phi_norm))


def _occupants_with_votes(observations: Sequence[Observation]) -> list[str]:
    seen = set()
    for obs in observations:
        seen.update(obs.votes)
    return sorted(seen)


def estimate_theta(
    observations: Sequence[Observation], cfg: GameConfig, min_obs: int = 3
) -> ThetaEstimate:
    """Point estimates for every occupant appearing in the observations.

    Occupants without a single usable observation, or whose points column is
    identically zero, land in ``skipped`` with a reason; they never affect
    the others. Estimates from fewer than ``min_obs`` observations are
    flagged.
    """
    occupants: dict[str, OccupantTheta] = {}
    skipped: dict[str, str] = {}
    for occ in _occupants_with_votes(observations):
        try:
            cols = build_residual_columns(observations, occ, cfg)
            theta = closed_form_theta(cols.psi, cols.phi, occ)
        except InsufficientDataError:
            skipped[occ] = "no usable true votes"
            continue
        except IndeterminateThetaError:
            skipped[occ] = "points column identically zero"
            continue
        occupants[occ] = OccupantTheta(
            theta=theta, n_obs=cols.n_used, flagged=cols.n_used < min_obs
        )
    return ThetaEstimate(occupants=occupants, skipped=skipped)


def _resample_thetas(psi: np.ndarray, phi: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Closed-form theta per bootstrap resample (rows of ``idx``)."""
    p = psi[idx]
    f = phi[idx]
    den = np.einsum("ij,ij->i", f, f)
    num = -np.einsum("ij,ij->i", p, f)
    out = np.zeros(len(idx))
    ok = den >= _PHI_NORM_TOL
    # A resample can in principle draw only zero-phi rows; report 0 for it
    # rather than poisoning the whole occupant.
    out[ok] = np.maximum(0.0, num[ok] / den[ok])
    return out


def bootstrap_theta(
    observations: Sequence[Observation],
    cfg: GameConfig,
    n_boot: int = 200,
    seed: int = 0,
    min_obs: int = 3,
) -> ThetaEstimate:
    """Point estimates plus resampling spread.

    Efron bootstrap: resample each occupant's usable observations with
    replacement at full size, re-estimate per resample, report mean and
    standard deviation. Occupants with fewer than two usable observations
    keep their point estimate with zero spread and a flag. Seeding splits
    deterministically per occupant (sorted order), so results do not depend
    on execution order and repeat exactly for a given seed.
    """
    if n_boot < 1:
        raise ValueError(f"n_boot must be >= 1, got {n_boot}")
    base = estimate_theta(observations, cfg, min_obs=min_obs)
    names = sorted(base.occupants)
    children = np.random.SeedSequence(seed).spawn(len(names))
    occupants: dict[str, OccupantTheta] = {}
    for occ, child in zip(names, children):
        entry = base.occupants[occ]
        cols = build_residual_columns(observations, occ, cfg)
        if cols.n_used < 2:
            occupants[occ] = OccupantTheta(
                theta=entry.theta,
                n_obs=entry.n_obs,
                flagged=True,
                boot_mean=entry.theta,
                boot_std=0.0,
            )
            continue
        rng = np.random.default_rng(child)
        idx = rng.integers(0, cols.n_used, size=(n_boot, cols.n_used))
        thetas = _resample_thetas(cols.psi, cols.phi, idx)
        occupants[occ] = OccupantTheta(
            theta=entry.theta,
            n_obs=entry.n_obs,
            flagged=entry.flagged,
            boot_mean=float(thetas.mean()),
            boot_std=float(thetas.std()),
        )
    return ThetaEstimate(occupants=occupants, skipped=dict(base.skipped))


PERIOD_REGION = "period-region"
POOLED = "pooled"


def _stratum_sort_key(key: tuple[float, str]) -> tuple[float, int]:
    level, region = key
    return (level, _REGION_ORDER[region])


class ThetaEstimator(BaseEstimator):
    """Stratified points-weight estimator with an sklearn-style surface.

    Parameters mirror the CLI: ``strata`` is either ``"period-region"``
    (one estimate per default-level x day-region cell) or ``"pooled"``
    (one estimate over everything). ``n_boot=0`` skips the bootstrap.
    ``fit`` expects observations that already carry their default level
    when stratifying by period.
    """

    def __init__(
        self,
        cfg: GameConfig,
        strata: str = PERIOD_REGION,
        n_boot: int = 200,
        seed: int = 0,
        min_obs: int = 3,
    ):
        self.cfg = cfg
        self.strata = strata
        self.n_boot = n_boot
        self.seed = seed
        self.min_obs = min_obs

    def fit(self, observations: Sequence[Observation], y=None) -> "ThetaEstimator":
        if self.strata not in (PERIOD_REGION, POOLED):
            raise ValueError(f"strata must be {PERIOD_REGION!r} or {POOLED!r}")
        groups: dict[tuple[float, str], list[Observation]] = {}
        if self.strata == PERIOD_REGION:
            for obs in observations:
                if obs.default_level is None:
                    raise DataFormatError(
                        f"observation {obs.day}/{obs.region} lacks a default level; "
                        "segment periods before stratified estimation"
                    )
                groups.setdefault((obs.default_level, obs.region), []).append(obs)
        keys = sorted(groups, key=_stratum_sort_key)
        seeds = np.random.SeedSequence(self.seed).generate_state(len(keys) + 1)

        def run(obs_list, child_seed):
            if self.n_boot > 0:
                return bootstrap_theta(
                    obs_list, self.cfg, n_boot=self.n_boot, seed=int(child_seed), min_obs=self.min_obs
                )
            return estimate_theta(obs_list, self.cfg, min_obs=self.min_obs)

        self.by_stratum_ = {k: run(groups[k], seeds[j]) for j, k in enumerate(keys)}
        self.pooled_ = run(list(observations), seeds[-1])
        self.n_observations_ = len(observations)
        return self

    def stratum(self, default_level: float, region: str) -> ThetaEstimate | None:
        self._check_fitted()
        return self.by_stratum_.get((default_level, region))

    def _check_fitted(self) -> None:
        if not hasattr(self, "pooled_"):
            raise RuntimeError("ThetaEstimator is not fitted")


def population_median_theta(estimate: ThetaEstimate) -> float | None:
    """Median theta over unflagged occupants; None when there are none."""
    values = [e.theta for e in estimate.occupants.values() if not e.flagged]
    if not values:
        values = [e.theta for e in estimate.occupants.values()]
    if not values:
        return None
    return float(np.median(values))


def resolve_theta(
    occupant: str,
    stratum_estimate: ThetaEstimate | None,
    pooled_estimate: ThetaEstimate | None,
) -> float | None:
    """Best available theta for one occupant.

    Cascade: unflagged stratum estimate, then pooled estimate, then the
    population median of the pooled (else stratum) estimates. None only when
    no estimate of any kind exists.
    """
    if stratum_estimate is not None:
        entry = stratum_estimate.occupants.get(occupant)
        if entry is not None and not entry.flagged:
            return entry.theta
    if pooled_estimate is not None:
        entry = pooled_estimate.occupants.get(occupant)
        if entry is not None:
            return entry.theta
    for est in (pooled_estimate, stratum_estimate):
        if est is not None:
            med = population_median_theta(est)
            if med is not None:
                return med
    return None


def resolve_thetas(
    occupants: Sequence[str],
    stratum_estimate: ThetaEstimate | None,
    pooled_estimate: ThetaEstimate | None,
) -> dict[str, float]:
    """Resolved theta map; occupants with no estimate anywhere get 0."""
    out = {}
    for occ in occupants:
        value = resolve_theta(occ, stratum_estimate, pooled_estimate)
        out[occ] = 0.0 if value is None else value
    return out
