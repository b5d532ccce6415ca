"""Social lighting game toolkit.

A shared office light is set to the mean of the occupants' votes; voting
below a baseline level earns lottery points. This package models that game,
learns each occupant's points weight from logged votes, solves and certifies
the game's equilibria, predicts future voting behavior against reference
baselines, accounts for the saved energy, and runs the live game service the
votes come from.
"""

from .arima import ArimaModel, fit_arima, forecast_arima
from .data import (
    DefaultPeriod,
    EnergyLedger,
    Observation,
    ObservedVote,
    VoteRecord,
    bin_day_regions,
    energy_savings,
    ingest_votes,
    read_observations,
    read_periods,
    region_of,
    segment_default_periods,
    write_observations,
)
from .equilibrium import SolverParams, SolveResult, StabilityReport, solve_nash, stability_check
from .errors import (
    DataFormatError,
    DegenerateRoundError,
    DomainError,
    IndeterminateThetaError,
    InsufficientDataError,
    LightingGameError,
    NoParticipantsError,
    NotAuthorizedError,
    NotPresentError,
    SamplingError,
    UncoveredDateError,
)
from .estimation import (
    OccupantTheta,
    ThetaEstimate,
    ThetaEstimator,
    bootstrap_theta,
    build_residual_columns,
    closed_form_theta,
    estimate_theta,
    resolve_theta,
    resolve_thetas,
)
from .game import (
    ABSENT,
    ACTIVE,
    DEFAULT,
    GameConfig,
    NashCertificate,
    ThetaVector,
    VoteProfile,
    epsilon_nash_check,
    implemented_setting,
    omega,
    omega_jacobian,
    points_share,
    utility,
    utility_gradient,
)
from .prediction import (
    CellPrediction,
    NashDayPredictor,
    PredictionDistribution,
    PresenceModel,
    baseline_constant,
    baseline_persistent,
    evaluate_mse,
    fit_presence,
    predict_cells,
    predict_day,
)
from .service import GameService, ServiceConfig, award_increments, create_app

__version__ = "0.1.0"
