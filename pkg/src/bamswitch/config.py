"""Scenario configuration: dataclasses, YAML loading, validation, hashing.

One declarative file describes a whole run: the link and its classes, the
traffic schedule, demand distribution, measurement windows, reasoning
settings, and (optionally) a custom policy set.  Every tunable the engine
uses lives here so the core stays free of magic numbers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .bam import Model
from .policy import Condition, PolicyError, PolicyRule, Thresholds, default_policy_set

LOAD_LEVELS = ("low", "medium", "high")
REGIMES = ("under-ninety", "at-least-ninety")


class ConfigValidationError(ValueError):
    """Carries every offending field found during validation."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in errors))


@dataclass(frozen=True)
class DemandConfig:
    bandwidths: tuple[int, ...] = (10, 25, 50)
    mean_holding: float = 120.0
    levels: dict = field(default_factory=lambda: {"low": 0.3, "medium": 0.7, "high": 1.2})

    @property
    def mean_bandwidth(self) -> float:
        return sum(self.bandwidths) / len(self.bandwidths)


@dataclass(frozen=True)
class TrafficPattern:
    """Per-class load levels for one schedule segment."""

    levels: tuple[str, ...]
    regime: str | None = None


@dataclass(frozen=True)
class ScheduleConfig:
    patterns: tuple[TrafficPattern, ...]
    pattern_seconds: float = 600.0
    repetitions: int = 4

    @property
    def repetition_seconds(self) -> float:
        return len(self.patterns) * self.pattern_seconds

    @property
    def total_seconds(self) -> float:
        return self.repetition_seconds * self.repetitions


@dataclass(frozen=True)
class CbrConfig:
    similarity: str = "nearest_neighbor"
    threshold: float = 0.8
    weights: dict[str, float] | None = None  # None -> equal
    ladder_boundaries: dict[str, tuple[float, ...]] = field(default_factory=dict)
    revision_windows: int = 1
    proactive_windows: int = 3
    guard_tolerance: float = 0.2
    unbroken_drop_tolerance: float = 0.02
    policy_solutions: str = "hint"  # hint | seed | off
    retrieve_k: int = 3


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    label: str = "scenario"
    capacity: int = 1000
    bcs: tuple[int, ...] = (400, 350, 250)
    mode: str = "static"  # static | cognitive
    model: Model = Model.MAM  # static model, or the cognitive starting model
    schedule: ScheduleConfig = field(default_factory=lambda: table_one_schedule())
    demand: DemandConfig = field(default_factory=DemandConfig)
    window_seconds: float = 600.0
    thresholds: Thresholds = field(default_factory=Thresholds)
    cbr: CbrConfig = field(default_factory=CbrConfig)
    policies: tuple[PolicyRule, ...] | None = None  # None -> default set
    injections: tuple[tuple[float, Model], ...] = ()
    debug: bool = False

    def rules(self) -> list[PolicyRule]:
        if self.policies is not None:
            return list(self.policies)
        return default_policy_set(self.thresholds)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "label": self.label,
            "capacity": self.capacity,
            "bcs": list(self.bcs),
            "mode": self.mode,
            "model": self.model.value,
            "schedule": {
                "patterns": [
                    {"levels": list(p.levels), "regime": p.regime} for p in self.schedule.patterns
                ],
                "pattern_seconds": self.schedule.pattern_seconds,
                "repetitions": self.schedule.repetitions,
            },
            "demand": {
                "bandwidths": list(self.demand.bandwidths),
                "mean_holding": self.demand.mean_holding,
                "levels": dict(self.demand.levels),
            },
            "window_seconds": self.window_seconds,
            "thresholds": {
                "util_low": self.thresholds.util_low,
                "util_high": self.thresholds.util_high,
                "blocking_high": self.thresholds.blocking_high,
                "preemption_high": self.thresholds.preemption_high,
                "devolution_high": self.thresholds.devolution_high,
            },
            "cbr": {
                "similarity": self.cbr.similarity,
                "threshold": self.cbr.threshold,
                "weights": self.cbr.weights,
                "ladder_boundaries": {k: list(v) for k, v in self.cbr.ladder_boundaries.items()},
                "revision_windows": self.cbr.revision_windows,
                "proactive_windows": self.cbr.proactive_windows,
                "guard_tolerance": self.cbr.guard_tolerance,
                "unbroken_drop_tolerance": self.cbr.unbroken_drop_tolerance,
                "policy_solutions": self.cbr.policy_solutions,
                "retrieve_k": self.cbr.retrieve_k,
            },
            "policies": None if self.policies is None else [
                {
                    "symptom": r.symptom,
                    "suggest": r.suggestion.value if r.suggestion else None,
                    "when": [
                        {"attribute": c.attribute, "op": c.comparator, "value": c.threshold}
                        for c in r.conditions
                    ],
                }
                for r in self.policies
            ],
            "injections": [[t, m.value] for t, m in self.injections],
            "debug": self.debug,
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def schedule_hash(self) -> str:
        """Hash of everything that shapes the offered traffic, including the seed.

        Two reports are comparable only when these match: same arrival
        stream, same schedule, same link dimensions.
        """
        traffic = {
            "seed": self.seed,
            "capacity": self.capacity,
            "bcs": list(self.bcs),
            "schedule": self.to_dict()["schedule"],
            "demand": self.to_dict()["demand"],
            "window_seconds": self.window_seconds,
        }
        payload = json.dumps(traffic, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def table_one_schedule() -> ScheduleConfig:
    """The six-segment reference schedule: three mixed segments that leave
    room for sharing, then three where every class runs hot."""
    return ScheduleConfig(
        patterns=(
            TrafficPattern(("high", "low", "low"), "under-ninety"),
            TrafficPattern(("medium", "low", "high"), "under-ninety"),
            TrafficPattern(("low", "medium", "high"), "under-ninety"),
            TrafficPattern(("high", "high", "high"), "at-least-ninety"),
            TrafficPattern(("high", "high", "high"), "at-least-ninety"),
            TrafficPattern(("high", "high", "high"), "at-least-ninety"),
        ),
        pattern_seconds=600.0,
        repetitions=4,
    )


def validate_scenario(cfg: ScenarioConfig) -> list[str]:
    """Collect every invariant violation; empty list means the config is sound."""
    errors: list[str] = []
    if cfg.capacity <= 0:
        errors.append(f"link.capacity: must be positive, got {cfg.capacity}")
    if not cfg.bcs:
        errors.append("classes: at least one class is required")
    for i, bc in enumerate(cfg.bcs):
        if bc <= 0:
            errors.append(f"classes[{i}].bc: must be positive, got {bc}")
    if cfg.bcs and sum(cfg.bcs) != cfg.capacity:
        errors.append(
            f"classes: bandwidth constraints sum to {sum(cfg.bcs)}, "
            f"must equal link capacity {cfg.capacity}"
        )
    if cfg.mode not in ("static", "cognitive"):
        errors.append(f"mode: must be 'static' or 'cognitive', got {cfg.mode!r}")
    if cfg.model not in (Model.MAM, Model.RDM, Model.ATCS):
        errors.append(f"model: must be one of MAM/RDM/ATCS, got {cfg.model}")
    if cfg.schedule.repetitions < 1:
        errors.append(f"schedule.repetitions: must be >= 1, got {cfg.schedule.repetitions}")
    if cfg.schedule.patterns and cfg.schedule.pattern_seconds <= 0:
        errors.append("schedule.pattern_seconds: must be positive")
    for p_idx, pattern in enumerate(cfg.schedule.patterns):
        if len(pattern.levels) != len(cfg.bcs):
            errors.append(
                f"schedule.patterns[{p_idx}]: {len(pattern.levels)} levels for "
                f"{len(cfg.bcs)} classes"
            )
        for lvl in pattern.levels:
            if lvl not in LOAD_LEVELS:
                errors.append(f"schedule.patterns[{p_idx}]: unknown load level {lvl!r}")
        if pattern.regime is not None:
            if pattern.regime not in REGIMES:
                errors.append(f"schedule.patterns[{p_idx}]: unknown regime {pattern.regime!r}")
            elif all(l in LOAD_LEVELS for l in pattern.levels) and len(pattern.levels) == len(cfg.bcs):
                offered = sum(
                    cfg.demand.levels.get(lvl, 0.0) * bc
                    for lvl, bc in zip(pattern.levels, cfg.bcs)
                )
                heavy = offered >= 0.9 * cfg.capacity
                if pattern.regime == "at-least-ninety" and not heavy:
                    errors.append(
                        f"schedule.patterns[{p_idx}]: regime 'at-least-ninety' but offered "
                        f"load {offered:.0f} < {0.9 * cfg.capacity:.0f}"
                    )
                if pattern.regime == "under-ninety" and heavy:
                    errors.append(
                        f"schedule.patterns[{p_idx}]: regime 'under-ninety' but offered "
                        f"load {offered:.0f} >= {0.9 * cfg.capacity:.0f}"
                    )
    if not cfg.demand.bandwidths:
        errors.append("demand.bandwidths: must not be empty")
    elif any(b <= 0 for b in cfg.demand.bandwidths):
        errors.append("demand.bandwidths: all demands must be positive integers")
    if cfg.demand.mean_holding <= 0:
        errors.append("demand.mean_holding: must be positive")
    for name in LOAD_LEVELS:
        if cfg.demand.levels.get(name, 0.0) <= 0:
            errors.append(f"demand.levels.{name}: must map to a positive load multiplier")
    if cfg.window_seconds <= 0:
        errors.append("window.seconds: must be positive")
    elif cfg.schedule.patterns and cfg.schedule.pattern_seconds > 0:
        ratio = cfg.schedule.pattern_seconds / cfg.window_seconds
        if abs(ratio - round(ratio)) > 1e-9:
            errors.append(
                f"window.seconds ({cfg.window_seconds}) must divide "
                f"schedule.pattern_seconds ({cfg.schedule.pattern_seconds})"
            )
    t = cfg.thresholds
    if not 0.0 <= t.util_low < t.util_high <= 1.0:
        errors.append(
            f"thresholds: need 0 <= util_low < util_high <= 1, got {t.util_low}/{t.util_high}"
        )
    for name in ("blocking_high", "preemption_high", "devolution_high"):
        v = getattr(t, name)
        if not 0.0 < v <= 1.0:
            errors.append(f"thresholds.{name}: must lie in (0, 1], got {v}")
    c = cfg.cbr
    if c.similarity not in ("linear", "ladder", "nearest_neighbor"):
        errors.append(f"cbr.similarity: unknown function {c.similarity!r}")
    if not 0.0 <= c.threshold <= 1.0:
        errors.append(f"cbr.threshold: must lie in [0, 1], got {c.threshold}")
    if c.revision_windows < 1:
        errors.append("cbr.revision_windows: must be >= 1")
    if c.proactive_windows < 1:
        errors.append("cbr.proactive_windows: must be >= 1")
    if not 0.0 < c.guard_tolerance:
        errors.append("cbr.guard_tolerance: must be positive")
    if not 0.0 <= c.unbroken_drop_tolerance < 1.0:
        errors.append("cbr.unbroken_drop_tolerance: must lie in [0, 1)")
    if c.policy_solutions not in ("hint", "seed", "off"):
        errors.append(f"cbr.policy_solutions: must be hint/seed/off, got {c.policy_solutions!r}")
    if c.retrieve_k < 1:
        errors.append("cbr.retrieve_k: must be >= 1")
    for when, _model in cfg.injections:
        if when < 0:
            errors.append(f"injections: negative injection time {when}")
    return errors


def check_scenario(cfg: ScenarioConfig) -> ScenarioConfig:
    errors = validate_scenario(cfg)
    if errors:
        raise ConfigValidationError(errors)
    return cfg


# -- YAML loading ------------------------------------------------------------


def _parse_policies(raw: list) -> tuple[PolicyRule, ...]:
    rules = []
    for i, entry in enumerate(raw):
        try:
            conditions = tuple(
                Condition(c["attribute"], c["op"], c["value"]) for c in entry.get("when", [])
            )
            suggestion = Model(entry["suggest"]) if entry.get("suggest") else None
            rules.append(PolicyRule(conditions, entry["symptom"], suggestion))
        except (KeyError, TypeError, ValueError, PolicyError) as exc:
            raise ConfigValidationError([f"policies[{i}]: {exc}"]) from exc
    return tuple(rules)


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a parsed config mapping.

    Structural problems (wrong types, unknown keys, missing seed) raise
    ConfigValidationError immediately; semantic problems are collected by
    validate_scenario afterwards.
    """
    errors: list[str] = []
    known = {"seed", "label", "link", "classes", "mode", "model", "schedule",
             "demand", "window", "thresholds", "cbr", "policies", "injections", "debug"}
    for key in data:
        if key not in known:
            errors.append(f"unknown top-level section {key!r}")
    if "seed" not in data:
        errors.append("seed: required (runs must not draw entropy from the clock)")
    if errors:
        raise ConfigValidationError(errors)

    try:
        link = data.get("link", {})
        classes = data.get("classes", [])
        bcs = tuple(int(c["bc"]) for c in classes)
        sched_raw = data.get("schedule", {})
        if "patterns" in sched_raw:
            patterns = tuple(
                TrafficPattern(tuple(p["levels"]), p.get("regime")) for p in sched_raw["patterns"]
            )
        else:
            patterns = table_one_schedule().patterns
        schedule = ScheduleConfig(
            patterns=patterns,
            pattern_seconds=float(sched_raw.get("pattern_seconds", 600.0)),
            repetitions=int(sched_raw.get("repetitions", 4)),
        )
        demand_raw = data.get("demand", {})
        demand = DemandConfig(
            bandwidths=tuple(int(b) for b in demand_raw.get("bandwidths", (10, 25, 50))),
            mean_holding=float(demand_raw.get("mean_holding", 120.0)),
            levels=dict(demand_raw.get("levels", {"low": 0.3, "medium": 0.7, "high": 1.2})),
        )
        thr_raw = data.get("thresholds", {})
        thresholds = Thresholds(
            util_low=float(thr_raw.get("util_low", 0.60)),
            util_high=float(thr_raw.get("util_high", 0.90)),
            blocking_high=float(thr_raw.get("blocking_high", 0.10)),
            preemption_high=float(thr_raw.get("preemption_high", 0.01)),
            devolution_high=float(thr_raw.get("devolution_high", 0.01)),
        )
        cbr_raw = data.get("cbr", {})
        cbr = CbrConfig(
            similarity=cbr_raw.get("similarity", "nearest_neighbor"),
            threshold=float(cbr_raw.get("threshold", 0.8)),
            weights=cbr_raw.get("weights"),
            ladder_boundaries={
                k: tuple(v) for k, v in cbr_raw.get("ladder_boundaries", {}).items()
            },
            revision_windows=int(cbr_raw.get("revision_windows", 1)),
            proactive_windows=int(cbr_raw.get("proactive_windows", 3)),
            guard_tolerance=float(cbr_raw.get("guard_tolerance", 0.2)),
            unbroken_drop_tolerance=float(cbr_raw.get("unbroken_drop_tolerance", 0.02)),
            policy_solutions=cbr_raw.get("policy_solutions", "hint"),
            retrieve_k=int(cbr_raw.get("retrieve_k", 3)),
        )
        policies = _parse_policies(data["policies"]) if data.get("policies") else None
        injections = tuple(
            (float(i["at"]), Model(i["model"])) for i in data.get("injections", [])
        )
        cfg = ScenarioConfig(
            seed=int(data["seed"]),
            label=str(data.get("label", "scenario")),
            capacity=int(link.get("capacity", 1000)),
            bcs=bcs if classes else (400, 350, 250),
            mode=data.get("mode", "static"),
            model=Model(data.get("model", "MAM")),
            schedule=schedule,
            demand=demand,
            window_seconds=float(data.get("window", {}).get("seconds", 600.0)),
            thresholds=thresholds,
            cbr=cbr,
            policies=policies,
            injections=injections,
            debug=bool(data.get("debug", False)),
        )
    except ConfigValidationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigValidationError([f"malformed configuration: {exc}"]) from exc
    return check_scenario(cfg)


def load_scenario(path: str | Path, seed_override: int | None = None) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigValidationError(["configuration file must contain a mapping"])
    if seed_override is not None:
        data["seed"] = seed_override
    cfg = scenario_from_dict(data)
    if data.get("label") is None:
        cfg = replace(cfg, label=Path(path).stem)
    return cfg
