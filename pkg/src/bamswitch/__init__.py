"""Per-link bandwidth allocation with cognitive model switching."""

from .bam import (
    AdmissionDecision,
    ConfigurationError,
    LedgerError,
    Link,
    LspRecord,
    MetricCounters,
    Model,
    Outcome,
    SharingMatrix,
    TrafficClass,
    VictimKind,
    make_model_matrix,
)
from .cbr import (
    Case,
    CaseBase,
    CbrEngine,
    ProblemDescriptor,
    ProfileGuard,
    SimilarityConfig,
    Status,
    Verdict,
    adapt,
    arbitrary_solution,
    retain,
    retrieve,
    revise,
    similarity,
    validate_against_rejected,
)
from .config import (
    CbrConfig,
    ConfigValidationError,
    DemandConfig,
    ScenarioConfig,
    ScheduleConfig,
    TrafficPattern,
    load_scenario,
    table_one_schedule,
    validate_scenario,
)
from .measure import Measurements, snapshot_measurements
from .policy import ManagerGoals, PolicyRule, Thresholds, default_policy_set, evaluate_policies
from .sim import SimulationReport, generate_arrivals, run_scenario, simulate

__all__ = [
    "AdmissionDecision", "Case", "CaseBase", "CbrConfig", "CbrEngine",
    "ConfigurationError", "ConfigValidationError", "DemandConfig", "LedgerError",
    "Link", "LspRecord", "ManagerGoals", "Measurements", "MetricCounters", "Model",
    "Outcome", "PolicyRule", "ProblemDescriptor", "ProfileGuard", "ScenarioConfig",
    "ScheduleConfig", "SharingMatrix", "SimilarityConfig", "SimulationReport",
    "Status", "Thresholds", "TrafficClass", "TrafficPattern", "Verdict", "VictimKind",
    "adapt", "arbitrary_solution", "default_policy_set", "evaluate_policies",
    "generate_arrivals", "load_scenario", "make_model_matrix", "retain", "retrieve",
    "revise", "run_scenario", "similarity", "simulate", "snapshot_measurements",
    "table_one_schedule", "validate_against_rejected", "validate_scenario",
]
