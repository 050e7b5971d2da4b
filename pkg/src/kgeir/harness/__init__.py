"""Replay harness: strategies, sessions, metrics, synthetic data and exports."""

from .metrics import auc, cov_metric, inf_metric
from .pipeline import (
    ModelSettings,
    PreparedPopulation,
    aggregate,
    aggregate_and_export,
    create_model,
    observed_part,
    prepare_population,
    run_manifest,
    run_strategies,
)
from .session import (
    MetricsTrace,
    SessionContext,
    SimulationConfig,
    StepMetrics,
    Strategy,
    StrategyKind,
    heldout_labels,
    run_session,
    strategy_expectimax,
    strategy_random,
)
from .synthetic import SyntheticPopulation, dina_population, synthetic_graph

__all__ = [
    "MetricsTrace",
    "ModelSettings",
    "PreparedPopulation",
    "SessionContext",
    "SimulationConfig",
    "StepMetrics",
    "Strategy",
    "StrategyKind",
    "SyntheticPopulation",
    "aggregate",
    "aggregate_and_export",
    "auc",
    "cov_metric",
    "create_model",
    "dina_population",
    "heldout_labels",
    "inf_metric",
    "observed_part",
    "prepare_population",
    "run_manifest",
    "run_session",
    "run_strategies",
    "strategy_expectimax",
    "strategy_random",
    "synthetic_graph",
]
