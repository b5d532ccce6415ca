"""Command line front door.

Subcommands cover the full offline pipeline (estimate, predict, evaluate,
savings), one-off equilibrium solves (simulate), and the live service
(serve). Every command that writes an output directory also writes a
``manifest.json`` recording the command, the resolved settings, and the
SHA-256 of each input, with no timestamps, so a rerun on the same inputs
reproduces every output byte for byte.

Exit codes: 0 success, 1 usage or bad arguments, 2 unreadable or malformed
input data, 3 numerical failure (degenerate game, failed sampling, and the
like).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .arima import fit_arima, forecast_arima
from .data import (
    bin_day_regions,
    energy_savings,
    ingest_votes,
    read_periods,
    segment_default_periods,
    write_jsonl,
)
from .equilibrium import SolverParams, solve_nash
from .errors import (
    DataFormatError,
    DegenerateRoundError,
    DomainError,
    InsufficientDataError,
    NumericalError,
    SamplingError,
    UncoveredDateError,
)
from .estimation import ThetaEstimator
from .game import ACTIVE, ROLES, GameConfig, ThetaVector, VoteProfile, points_share
from .prediction import cell_implemented, daily_truth, evaluate_mse, predict_cells
from .service import GameService, ServiceConfig, create_app

USAGE_ERROR = 1
DATA_ERROR = 2
NUMERIC_ERROR = 3

_ARIMA_MIN_HISTORY = 10


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, inputs: dict, settings: dict, outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "package": {"name": "lightgame", "version": __version__},
        "inputs": {name: {"path": str(p), "sha256": _sha256(Path(p))} for name, p in sorted(inputs.items())},
        "settings": settings,
        "outputs": sorted(outputs),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _game_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho", type=float, default=100.0, help="points pool per round")
    p.add_argument("--baseline", type=float, default=90.0, help="baseline light level")
    p.add_argument("--lower", type=float, default=0.0, help="lowest allowed vote")
    p.add_argument("--upper", type=float, default=100.0, help="highest allowed vote")
    p.add_argument("--margin", type=float, default=1.0, help="keep evaluable votes this far below the baseline")


def _game_config(args, n: int) -> GameConfig:
    return GameConfig(
        n=n,
        rho=args.rho,
        x_b=args.baseline,
        lower=args.lower,
        upper=args.upper,
        domain_margin=args.margin,
    )


def _game_settings(args) -> dict:
    return {
        "rho": args.rho,
        "baseline": args.baseline,
        "lower": args.lower,
        "upper": args.upper,
        "margin": args.margin,
    }


def _ingest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--votes", required=True, help="vote log CSV")
    p.add_argument("--periods", required=True, help="default-period CSV")
    p.add_argument("--tz", default="UTC", help="IANA timezone of naive timestamps")
    p.add_argument("--lenient", action="store_true", help="skip bad rows instead of failing")


def _load_observations(args):
    records = ingest_votes(args.votes, tz=args.tz, lenient=args.lenient)
    periods = read_periods(args.periods)
    return segment_default_periods(bin_day_regions(records), periods)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _estimate_rows(scope: str, key, estimate) -> list[dict]:
    level, region = key if key is not None else (None, None)
    rows = []
    for occ in sorted(estimate.occupants):
        entry = estimate.occupants[occ]
        row = {
            "scope": scope,
            "default_level": level,
            "region": region,
            "occupant": occ,
            "theta": entry.theta,
            "n_obs": entry.n_obs,
            "flagged": entry.flagged,
        }
        if entry.boot_mean is not None:
            row["boot_mean"] = entry.boot_mean
            row["boot_std"] = entry.boot_std
        rows.append(row)
    for occ in sorted(estimate.skipped):
        rows.append(
            {
                "scope": scope,
                "default_level": level,
                "region": region,
                "occupant": occ,
                "skipped": estimate.skipped[occ],
            }
        )
    return rows


def _fit_estimator(args, observations) -> ThetaEstimator:
    universe = sorted({occ for obs in observations for occ in obs.votes})
    cfg = _game_config(args, max(len(universe), 1))
    est = ThetaEstimator(
        cfg,
        strata=args.strata,
        n_boot=args.bootstrap,
        seed=args.seed,
        min_obs=args.min_obs,
    ).fit(observations)
    if not est.pooled_.occupants:
        reasons = "; ".join(f"{occ}: {why}" for occ, why in sorted(est.pooled_.skipped.items()))
        raise InsufficientDataError(
            "all", f"no occupant produced an estimate ({reasons or 'no votes at all'})"
        )
    return est


def cmd_estimate(args) -> int:
    observations = _load_observations(args)
    universe = sorted({occ for obs in observations for occ in obs.votes})
    est = _fit_estimator(args, observations)
    rows = []
    for key in sorted(est.by_stratum_):
        rows.extend(_estimate_rows("stratum", key, est.by_stratum_[key]))
    rows.extend(_estimate_rows("pooled", None, est.pooled_))
    out = _out_dir(args)
    write_jsonl(out / "estimates.jsonl", rows)
    settings = {
        **_game_settings(args),
        "tz": args.tz,
        "lenient": args.lenient,
        "strata": args.strata,
        "bootstrap": args.bootstrap,
        "seed": args.seed,
        "min_obs": args.min_obs,
        "n_occupants": len(universe),
    }
    _write_manifest(
        out,
        "estimate",
        {"votes": args.votes, "periods": args.periods},
        settings,
        ["estimates.jsonl"],
    )
    estimated = sum(1 for r in rows if r["scope"] == "pooled" and "theta" in r)
    print(f"estimated {estimated} occupants over {len(observations)} cells -> {out / 'estimates.jsonl'}")
    return 0


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--step-size", type=float, default=0.05)
    p.add_argument("--max-iters", type=int, default=200_000)
    p.add_argument("--tol", type=float, default=1e-9, help="convergence displacement tolerance")
    p.add_argument("--epsilon", type=float, default=1e-3, help="certificate slack")
    p.add_argument("--grid-step", type=float, default=0.1, help="certificate scan resolution")


def _solver_params(args) -> SolverParams:
    return SolverParams(
        step_size=args.step_size,
        max_iters=args.max_iters,
        convergence_tol=args.tol,
        epsilon_check=args.epsilon,
        grid_step=args.grid_step,
    )


def _load_scenario(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON: {exc}") from exc
    if "theta" not in raw:
        raise DataFormatError(f"{path}: scenario needs a 'theta' list")
    return raw


def cmd_simulate(args) -> int:
    raw = _load_scenario(args.scenario)
    theta = ThetaVector(tuple(float(t) for t in raw["theta"]))
    roles = tuple(raw.get("roles", [ACTIVE] * len(theta)))
    bad = [r for r in roles if r not in ROLES]
    if bad:
        raise DataFormatError(f"{args.scenario}: unknown roles {bad}")
    overrides = raw.get("config", {})
    cfg = GameConfig(
        n=len(roles),
        rho=float(overrides.get("rho", args.rho)),
        x_b=float(overrides.get("baseline", args.baseline)),
        lower=float(overrides.get("lower", args.lower)),
        upper=float(overrides.get("upper", args.upper)),
        domain_margin=float(overrides.get("margin", args.margin)),
    )
    if "votes" in raw:
        votes = tuple(float(v) for v in raw["votes"])
    else:
        # No explicit start: defaults sit at the standing default, actives
        # start there too but clipped into the playable interval.
        level = float(raw.get("default_level", args.default_level))
        start = min(max(level, cfg.lower), cfg.effective_upper)
        votes = tuple(start if r == ACTIVE else level for r in roles)
    if len(votes) != len(roles):
        raise DataFormatError(f"{args.scenario}: {len(votes)} votes but {len(roles)} roles")
    result = solve_nash(theta, VoteProfile(votes, roles), cfg, _solver_params(args))
    profile = result.profile
    cert = result.certificate
    try:
        shares = {i: points_share(i, profile, cfg) for i in profile.participants()}
    except (DomainError, DegenerateRoundError):
        shares = {}  # profile at or above the baseline earns nothing to split
    report = {
        "votes": list(profile.votes),
        "roles": list(profile.roles),
        "implemented": sum(profile.votes[i] for i in profile.participants())
        / len(profile.participants()),
        "points": {str(i): s for i, s in shares.items()},
        "iterations": result.iterations,
        "converged": result.converged,
        "certificate": {
            "epsilon": cert.epsilon,
            "grid_step": cert.grid_step,
            "valid": cert.valid,
            "max_gap": max(cert.per_player_gap) if cert.per_player_gap else 0.0,
            "per_player_gap": {str(p): g for p, g in zip(cert.players, cert.per_player_gap)},
        },
        "stability": {
            "applicable": result.stability.applicable,
            "stable": result.stability.stable,
            "note": result.stability.note,
        },
    }
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _prediction_rows(cells) -> list[dict]:
    rows = []
    for cell in cells:
        d = cell.dist
        rows.append(
            {
                "day": cell.day.isoformat(),
                "region": cell.region,
                "default_level": cell.default_level,
                "seed": cell.seed,
                "implemented_mean": d.implemented_mean,
                "implemented_std": d.implemented_std,
                "implemented_samples": list(d.implemented_samples),
                "redraws": d.redraws,
                "occupants": {
                    occ: {
                        "mean": d.occupant_mean[occ],
                        "std": d.occupant_std[occ],
                        "n_present": len(d.occupant_samples[occ]),
                        "samples": list(d.occupant_samples[occ]),
                    }
                    for occ in sorted(d.occupant_mean)
                },
            }
        )
    return rows


def _predict_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", type=int, default=20, help="presence samples per cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-history", type=int, default=1, help="prior same-region days required")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--strata", choices=["period-region", "pooled"], default="period-region")
    p.add_argument("--bootstrap", type=int, default=0, help="bootstrap resamples (0 = off)")
    p.add_argument("--min-obs", type=int, default=3, help="flag estimates below this many observations")


def _fit_and_predict(args, observations):
    universe = sorted({occ for obs in observations for occ in obs.votes})
    cfg = _game_config(args, max(len(universe), 1))
    est = _fit_estimator(args, observations)
    cells = predict_cells(
        observations,
        est,
        cfg,
        sample_count=args.samples,
        seed=args.seed,
        min_history=args.min_history,
        threads=args.threads,
    )
    return cells


def _predict_settings(args) -> dict:
    return {
        **_game_settings(args),
        "tz": args.tz,
        "lenient": args.lenient,
        "samples": args.samples,
        "seed": args.seed,
        "min_history": args.min_history,
        "strata": args.strata,
        "bootstrap": args.bootstrap,
        "min_obs": args.min_obs,
    }


def cmd_predict(args) -> int:
    observations = _load_observations(args)
    cells = _fit_and_predict(args, observations)
    out = _out_dir(args)
    write_jsonl(out / "predictions.jsonl", _prediction_rows(cells))
    _write_manifest(
        out,
        "predict",
        {"votes": args.votes, "periods": args.periods},
        _predict_settings(args),
        ["predictions.jsonl"],
    )
    print(f"predicted {len(cells)} cells -> {out / 'predictions.jsonl'}")
    return 0


def _daily_models(observations, cells):
    """Per-day prediction maps for the four compared models."""
    truth = {day.isoformat(): v for day, v in daily_truth(observations).items()}
    day_default = {}
    by_day: dict[str, list[float]] = {}
    for cell in cells:
        key = cell.day.isoformat()
        by_day.setdefault(key, []).append(cell.dist.implemented_mean)
        day_default[key] = cell.default_level
    nash = {day: float(np.mean(vals)) for day, vals in by_day.items()}

    for obs in observations:
        day_default.setdefault(obs.day.isoformat(), obs.default_level)
    days = sorted(truth)
    constant = {day: day_default[day] for day in days}
    persistent = {}
    arima = {}
    for k, day in enumerate(days):
        history = [truth[d] for d in days[:k]]
        persistent[day] = history[-1] if history else day_default[day]
        if len(history) >= _ARIMA_MIN_HISTORY:
            model = fit_arima(history)
            arima[day] = forecast_arima(model, history)
    return truth, {"nash": nash, "arima": arima, "constant": constant, "persistent": persistent}


def _occupant_models(observations, cells):
    """Per-(cell, occupant) prediction maps keyed 'day|region|occupant'."""
    by_cell = {(obs.day, obs.region): obs for obs in observations}
    running: dict[tuple[str, str], float] = {}
    prior_vote: dict[tuple[str, str, str], float | None] = {}
    for obs in observations:  # observations arrive day-ordered
        for occ, vote in obs.votes.items():
            prior_vote[(obs.day.isoformat(), obs.region, occ)] = running.get((obs.region, occ))
            running[(obs.region, occ)] = vote.value
    truth = {}
    nash = {}
    constant = {}
    persistent = {}
    for cell in cells:
        obs = by_cell[(cell.day, cell.region)]
        for occ in sorted(obs.votes):
            key = f"{cell.day.isoformat()}|{cell.region}|{occ}"
            truth[key] = obs.votes[occ].value
            constant[key] = cell.default_level
            prior = prior_vote.get((cell.day.isoformat(), cell.region, occ))
            persistent[key] = prior if prior is not None else cell.default_level
            if occ in cell.dist.occupant_mean:
                nash[key] = cell.dist.occupant_mean[occ]
    return truth, {"nash": nash, "constant": constant, "persistent": persistent}


def cmd_evaluate(args) -> int:
    observations = _load_observations(args)
    cells = _fit_and_predict(args, observations)
    day_truth, day_models = _daily_models(observations, cells)
    day_mse, n_days = evaluate_mse(day_models, day_truth)
    occ_truth, occ_models = _occupant_models(observations, cells)
    occ_mse, n_points = evaluate_mse(occ_models, occ_truth)

    common = sorted(set(day_truth) & set.intersection(*(set(m) for m in day_models.values())))
    days = [
        {"day": day, "truth": day_truth[day], **{name: day_models[name][day] for name in day_models}}
        for day in common
    ]
    report = {
        "per_day": {"mse": day_mse, "n_days": n_days},
        "per_occupant": {"mse": occ_mse, "n_points": n_points},
        "days": days,
    }
    out = _out_dir(args)
    write_jsonl(out / "predictions.jsonl", _prediction_rows(cells))
    (out / "evaluation.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    _write_manifest(
        out,
        "evaluate",
        {"votes": args.votes, "periods": args.periods},
        _predict_settings(args),
        ["predictions.jsonl", "evaluation.json"],
    )
    ranked = ", ".join(f"{name}={day_mse[name]:.4f}" for name in sorted(day_mse, key=day_mse.get))
    print(f"evaluated {n_days} days, {n_points} occupant points; per-day MSE: {ranked}")
    return 0


def cmd_savings(args) -> int:
    observations = _load_observations(args)
    daily = daily_truth(observations)
    ledger = energy_savings(
        daily,
        baseline=args.baseline,
        power_kw=args.power_kw,
        hours_per_day=args.hours_per_day,
        rate_per_kwh=args.rate,
    )
    report = {
        "baseline": ledger.baseline,
        "power_kw": ledger.power_kw,
        "hours_per_day": ledger.hours_per_day,
        "rate_per_kwh": ledger.rate_per_kwh,
        "total_consumed_kwh": ledger.total_consumed_kwh,
        "total_saved_kwh": ledger.total_saved_kwh,
        "reduction_pct": ledger.reduction_pct,
        "currency_saved": ledger.currency_saved,
        "days": [
            {
                "day": d.day.isoformat(),
                "implemented": d.implemented,
                "kwh_consumed": d.kwh_consumed,
                "kwh_saved": d.kwh_saved,
                "above_baseline": d.above_baseline,
            }
            for d in ledger.days
        ],
    }
    out = _out_dir(args)
    (out / "savings.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    _write_manifest(
        out,
        "savings",
        {"votes": args.votes, "periods": args.periods},
        {
            "tz": args.tz,
            "lenient": args.lenient,
            "baseline": args.baseline,
            "power_kw": args.power_kw,
            "hours_per_day": args.hours_per_day,
            "rate": args.rate,
        },
        ["savings.json"],
    )
    print(
        f"{len(ledger.days)} days: saved {ledger.total_saved_kwh:.2f} kWh "
        f"({ledger.reduction_pct:.1f}% of consumption) -> {out / 'savings.json'}"
    )
    return 0


def load_service(config_path: str | Path, log_path: str | Path, snapshot_every: int = 0) -> GameService:
    """Build a service from a JSON config file (shared by serve and tests)."""
    try:
        raw = json.loads(Path(config_path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{config_path}: not valid JSON: {exc}") from exc
    try:
        occupants = dict(raw["occupants"])
        config = ServiceConfig(
            game=GameConfig(
                n=len(occupants),
                rho=float(raw.get("rho", 100.0)),
                x_b=float(raw.get("baseline", 90.0)),
                lower=float(raw.get("lower", 0.0)),
                upper=float(raw.get("upper", 100.0)),
                domain_margin=float(raw.get("margin", 1.0)),
            ),
            occupant_tokens=occupants,
            admin_token=raw["admin_token"],
            default_level=float(raw["default_level"]),
            tz=raw.get("tz", "UTC"),
            round_cutoff=raw.get("round_cutoff", "23:59"),
            winners_per_draw=int(raw.get("winners_per_draw", 3)),
            lottery_resets_points=bool(raw.get("lottery_resets_points", True)),
        )
    except KeyError as exc:
        raise DataFormatError(f"{config_path}: missing key {exc}") from exc
    return GameService(config, log_path, snapshot_every=snapshot_every)


def cmd_serve(args) -> int:
    import uvicorn

    service = load_service(args.config, args.log, snapshot_every=args.snapshot_every)
    app = create_app(service, static_dir=args.static_dir)
    print(f"serving {len(service.config.occupant_tokens)} occupants on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lightgame",
        description="Shared-light voting game: estimation, prediction, accounting, service.",
    )
    parser.add_argument("--version", action="version", version=f"lightgame {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate per-occupant points weights from a vote log")
    _ingest_flags(p)
    _game_flags(p)
    p.add_argument("--strata", choices=["period-region", "pooled"], default="period-region")
    p.add_argument("--bootstrap", type=int, default=200, help="bootstrap resamples (0 = off)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-obs", type=int, default=3)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="solve one game scenario to equilibrium")
    p.add_argument("--scenario", required=True, help="scenario JSON (theta, votes, roles, config)")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument(
        "--default-level",
        type=float,
        default=90.0,
        help="starting level when the scenario gives no votes",
    )
    _game_flags(p)
    _solver_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict", help="one-day-ahead predictions for every covered cell")
    _ingest_flags(p)
    _game_flags(p)
    _predict_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against the log and reference baselines")
    _ingest_flags(p)
    _game_flags(p)
    _predict_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("savings", help="energy and cost ledger against the baseline level")
    _ingest_flags(p)
    p.add_argument("--baseline", type=float, default=90.0)
    p.add_argument("--power-kw", type=float, required=True, help="installed lighting power")
    p.add_argument("--hours-per-day", type=float, required=True, help="metered hours per day")
    p.add_argument("--rate", type=float, default=0.0, help="currency per kWh")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_savings)

    p = sub.add_parser("serve", help="run the live game service")
    p.add_argument("--config", required=True, help="service config JSON")
    p.add_argument("--log", required=True, help="event log path (created if missing)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static-dir", help="serve this directory at /ui")
    p.add_argument("--snapshot-every", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else USAGE_ERROR
    try:
        return args.func(args)
    except (DataFormatError, UncoveredDateError, InsufficientDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except (
        DomainError,
        DegenerateRoundError,
        SamplingError,
        NumericalError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
