"""Incentive-based demand-response control toolkit."""

from ._core import (
    BehaviorParams,
    Belief,
    CustomerSpec,
    EnvFactors,
    EventConfig,
    EventResult,
    ExogenousSeries,
    FactorScaling,
    FitError,
    GammaSchedule,
    GpConfig,
    GpThermal,
    LinearThermal,
    LocalSolution,
    MeteringHistory,
    Mode,
    OnlineConfig,
    ParseError,
    PopulationFile,
    SolverConfig,
    VariationalResult,
    baseline_power,
    default_prior,
    fit_linear,
    gen_exogenous,
    gen_population,
    jj_l,
    load_population,
    log_sigmoid,
    project_feasible,
    run_campaign,
    run_event,
    save_population,
    sigmoid,
    solve_plan,
    stay_in_prob,
    variational_update,
)

__all__ = [
    "BehaviorParams",
    "Belief",
    "CustomerSpec",
    "EnvFactors",
    "EventConfig",
    "EventResult",
    "ExogenousSeries",
    "FactorScaling",
    "FitError",
    "GammaSchedule",
    "GpConfig",
    "GpThermal",
    "LinearThermal",
    "LocalSolution",
    "MeteringHistory",
    "Mode",
    "OnlineConfig",
    "ParseError",
    "PopulationFile",
    "SolverConfig",
    "VariationalResult",
    "baseline_power",
    "default_prior",
    "fit_linear",
    "gen_exogenous",
    "gen_population",
    "jj_l",
    "load_population",
    "log_sigmoid",
    "project_feasible",
    "run_campaign",
    "run_event",
    "save_population",
    "sigmoid",
    "solve_plan",
    "stay_in_prob",
    "variational_update",
]
