"""Day-ahead behavior prediction plus reference baselines.

The pipeline: count each occupant's historical presence states, sample
presence for the target day, put sampled defaults at the default level,
solve the sampled active players to equilibrium, and average over samples.
Baselines (ARMA, constant at the default, persistent last value) ride along
for comparison.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .equilibrium import SolverParams, solve_nash
from .errors import SamplingError
from .game import ABSENT, ACTIVE, DEFAULT, GameConfig, ThetaVector, VoteProfile

logger = logging.getLogger(__name__)

STATES = (ABSENT, DEFAULT, ACTIVE)

_MAX_REDRAWS = 100


@dataclass(frozen=True)
class PresenceModel:
    """Per-occupant empirical state frequencies.

    ``counts`` maps occupant to (n_absent, n_default, n_active) in STATES
    order; probabilities are the exact count ratios. Occupants that appeared
    in the history with zero events are listed in ``excluded``.
    """

    counts: dict[str, tuple[int, int, int]]
    excluded: tuple[str, ...] = ()

    def occupants(self) -> tuple[str, ...]:
        return tuple(sorted(self.counts))

    def probabilities(self, occupant: str) -> tuple[float, float, float]:
        c = self.counts[occupant]
        total = sum(c)
        return tuple(v / total for v in c)


def fit_presence(history: Mapping[str, Sequence[str]]) -> PresenceModel:
    """Count absent/default/active events per occupant.

    ``history`` maps occupant to one state string per event (day, or
    day-region cell; the caller picks the granularity and keeps it
    consistent with prediction).
    """
    counts = {}
    excluded = []
    for occ in sorted(history):
        events = list(history[occ])
        if not events:
            excluded.append(occ)
            continue
        tally = {s: 0 for s in STATES}
        for state in events:
            if state not in tally:
                raise ValueError(f"unknown presence state {state!r} for occupant {occ!r}")
            tally[state] += 1
        counts[occ] = (tally[ABSENT], tally[DEFAULT], tally[ACTIVE])
    return PresenceModel(counts=counts, excluded=tuple(excluded))


@dataclass(frozen=True)
class PredictionDistribution:
    """Sampled prediction for one target: per-occupant votes and the mean."""

    sample_count: int
    seed: int
    implemented_samples: tuple[float, ...]
    implemented_mean: float
    implemented_std: float
    occupant_samples: dict[str, tuple[float, ...]]  # only samples when present
    occupant_mean: dict[str, float]
    occupant_std: dict[str, float]
    redraws: int  # zero-participant draws that were rolled again


def predict_day(
    presence: PresenceModel,
    thetas: Mapping[str, float],
    default_level: float,
    cfg: GameConfig,
    params: SolverParams | None = None,
    sample_count: int = 20,
    seed: int = 0,
) -> PredictionDistribution:
    """Sample presence, solve the sampled games, aggregate.

    Per sample: each occupant draws absent/default/active from their
    empirical frequencies; defaults vote ``default_level``; actives start at
    the default level and run to equilibrium with the defaults held fixed;
    absents are excluded. A sample with zero participants is redrawn (up to
    a cap, then :class:`SamplingError`). Seeding splits per sample index, so
    the draw sequence is reproducible regardless of execution order.

    Every occupant with any active probability needs an entry in ``thetas``.
    """
    if sample_count < 1:
        raise ValueError(f"sample_count must be >= 1, got {sample_count}")
    occupants = presence.occupants()
    if not occupants:
        raise ValueError("presence model has no occupants")
    if len(occupants) != cfg.n:
        raise ValueError(f"presence has {len(occupants)} occupants, config expects {cfg.n}")
    if not cfg.lower <= default_level <= cfg.upper:
        raise ValueError(f"default level {default_level} outside [{cfg.lower}, {cfg.upper}]")
    # Defaults may sit at the baseline itself; actives start at the default
    # but clipped into the playable interval so the solve can evaluate them.
    init_level = min(max(default_level, cfg.lower), cfg.effective_upper)
    probs = np.asarray([presence.probabilities(o) for o in occupants])
    for occ, p in zip(occupants, probs):
        if p[2] > 0 and occ not in thetas:
            raise ValueError(f"occupant {occ!r} can be active but has no theta")
    theta = ThetaVector(tuple(thetas.get(o, 0.0) for o in occupants))
    if params is None:
        params = SolverParams()

    children = np.random.SeedSequence(seed).spawn(sample_count)
    implemented = []
    occ_samples: dict[str, list[float]] = {o: [] for o in occupants}
    total_redraws = 0
    cum = probs.cumsum(axis=1)
    for child in children:
        rng = np.random.default_rng(child)
        for _ in range(_MAX_REDRAWS + 1):
            u = rng.random(len(occupants))
            picks = np.minimum((u[:, None] > cum).sum(axis=1), len(STATES) - 1)
            states = [STATES[int(k)] for k in picks]
            if any(s != ABSENT for s in states):
                break
            total_redraws += 1
        else:
            raise SamplingError(
                f"no participants after {_MAX_REDRAWS} redraws; presence is all-absent"
            )
        roles = tuple(states)
        votes = tuple(init_level if s == ACTIVE else default_level for s in states)
        profile = VoteProfile(votes, roles)
        if profile.active_players():
            result = solve_nash(theta, profile, cfg, params)
            if not result.converged:
                logger.warning("equilibrium solve hit max_iters; using last iterate")
            profile = result.profile
        sampled_votes = profile.votes
        parts = profile.participants()
        implemented.append(sum(sampled_votes[i] for i in parts) / len(parts))
        for i in parts:
            occ_samples[occupants[i]].append(sampled_votes[i])

    imp = np.asarray(implemented)
    present = {o: np.asarray(v) for o, v in occ_samples.items() if v}
    return PredictionDistribution(
        sample_count=sample_count,
        seed=seed,
        implemented_samples=tuple(float(v) for v in imp),
        implemented_mean=float(imp.mean()),
        implemented_std=float(imp.std()),
        occupant_samples={o: tuple(float(x) for x in v) for o, v in present.items()},
        occupant_mean={o: float(v.mean()) for o, v in present.items()},
        occupant_std={o: float(v.std()) for o, v in present.items()},
        redraws=total_redraws,
    )


class NashDayPredictor(BaseEstimator):
    """Equilibrium-based day predictor with an sklearn-style surface."""

    def __init__(
        self,
        cfg: GameConfig,
        params: SolverParams | None = None,
        sample_count: int = 20,
        seed: int = 0,
    ):
        self.cfg = cfg
        self.params = params
        self.sample_count = sample_count
        self.seed = seed

    def fit(self, presence: PresenceModel, thetas: Mapping[str, float]) -> "NashDayPredictor":
        self.presence_ = presence
        self.thetas_ = dict(thetas)
        return self

    def predict(self, default_level: float, seed: int | None = None) -> PredictionDistribution:
        if not hasattr(self, "presence_"):
            raise RuntimeError("NashDayPredictor is not fitted")
        return predict_day(
            self.presence_,
            self.thetas_,
            default_level,
            self.cfg,
            params=self.params,
            sample_count=self.sample_count,
            seed=self.seed if seed is None else seed,
        )


def baseline_constant(default_level: float) -> float:
    """Predict the current default level, always."""
    return float(default_level)


def baseline_persistent(history: Sequence[float], default_level: float) -> tuple[float, bool]:
    """Predict the previous observed value; (value, fell_back_to_constant)."""
    if len(history) == 0:
        return float(default_level), True
    return float(history[-1]), False


# --- day-region driver ------------------------------------------------------


@dataclass(frozen=True)
class CellPrediction:
    """Prediction for one (day, region) cell, one day ahead."""

    day: date
    region: str
    default_level: float
    seed: int
    dist: PredictionDistribution


def observation_states(obs, universe: Sequence[str]) -> dict[str, str]:
    """Presence state of every occupant in one cell (missing = absent)."""
    out = {}
    for occ in universe:
        entry = obs.votes.get(occ)
        if entry is None:
            out[occ] = ABSENT
        elif entry.is_default:
            out[occ] = DEFAULT
        else:
            out[occ] = ACTIVE
    return out


def predict_cells(
    observations,
    estimator,
    cfg: GameConfig,
    params: SolverParams | None = None,
    sample_count: int = 20,
    seed: int = 0,
    min_history: int = 1,
    threads: int = 1,
) -> list[CellPrediction]:
    """One-day-ahead predictions for every cell with enough same-region history.

    Presence is fitted per (occupant, region) over the region's prior days;
    thetas come from the estimator's (default level, region) stratum with the
    pooled fallback cascade. ``cfg.n`` is adjusted to the occupant universe
    found in the observations. Per-cell seeds derive from ``seed`` and the
    cell order, so any ``threads`` count gives identical output.
    """
    from dataclasses import replace as _replace

    from .estimation import resolve_thetas

    universe = sorted({occ for obs in observations for occ in obs.votes})
    if not universe:
        raise ValueError("no occupants in observations")
    cfg = _replace(cfg, n=len(universe))
    by_region: dict[str, list] = {}
    for obs in observations:
        if obs.default_level is None:
            raise ValueError(
                f"observation {obs.day}/{obs.region} lacks a default level; segment first"
            )
        by_region.setdefault(obs.region, []).append(obs)
    for cells in by_region.values():
        cells.sort(key=lambda o: o.day)

    targets = []
    for region in sorted(by_region):
        cells = by_region[region]
        for k, obs in enumerate(cells):
            if k >= min_history:
                targets.append((obs, cells[:k]))
    seeds = np.random.SeedSequence(seed).generate_state(max(len(targets), 1))

    def run(job) -> CellPrediction:
        (obs, history), cell_seed = job
        events: dict[str, list[str]] = {occ: [] for occ in universe}
        for prior in history:
            states = observation_states(prior, universe)
            for occ in universe:
                events[occ].append(states[occ])
        presence = fit_presence(events)
        thetas = resolve_thetas(
            universe,
            estimator.stratum(obs.default_level, obs.region),
            estimator.pooled_,
        )
        dist = predict_day(
            presence,
            thetas,
            obs.default_level,
            cfg,
            params=params,
            sample_count=sample_count,
            seed=int(cell_seed),
        )
        return CellPrediction(
            day=obs.day,
            region=obs.region,
            default_level=obs.default_level,
            seed=int(cell_seed),
            dist=dist,
        )

    jobs = list(zip(targets, seeds[: len(targets)]))
    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, jobs))
    return [run(job) for job in jobs]


def cell_implemented(obs) -> float:
    """Ground-truth implemented level of one cell: mean of its votes."""
    if not obs.votes:
        raise ValueError(f"cell {obs.day}/{obs.region} has no votes")
    return sum(v.value for v in obs.votes.values()) / len(obs.votes)


def daily_truth(observations) -> dict:
    """Per-day implemented truth: mean over that day's regions."""
    by_day: dict = {}
    for obs in observations:
        by_day.setdefault(obs.day, []).append(cell_implemented(obs))
    return {day: float(np.mean(vals)) for day, vals in by_day.items()}


def evaluate_mse(
    predictions: Mapping[str, Mapping], truth: Mapping
) -> tuple[dict[str, float], int]:
    """Mean squared error per model over the shared index set.

    Only keys present in the truth and in every model enter, so all models
    are scored on identical targets. Returns ({model: mse}, n_points).
    """
    if not predictions:
        raise ValueError("no models to evaluate")
    common = set(truth)
    for model_preds in predictions.values():
        common &= set(model_preds)
    if not common:
        raise ValueError("no common evaluation points between predictions and truth")
    keys = sorted(common)
    out = {}
    for model, model_preds in predictions.items():
        errs = np.asarray([model_preds[k] - truth[k] for k in keys], dtype=float)
        out[model] = float(np.mean(errs**2))
    return out, len(keys)
