"""Manager policy rules: conditions over measurements that raise symptoms.

A rule is a conjunction of (attribute, comparator, threshold) conditions
over the evaluation attributes derived from one window's measurements plus
the link context.  The first matching rule (declaration order) fires and
yields a symptom tag and, optionally, a suggested replacement model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bam import Model
from .measure import Measurements

LOW = "low"
MEDIUM = "medium"
HIGH = "high"

COMPARATORS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


class PolicyError(ValueError):
    """Raised at load time for rules referencing unknown attributes or comparators."""


@dataclass(frozen=True)
class Thresholds:
    """Level boundaries used both by rules and by problem quantization.

    Utilization below ``util_low`` is low, at or above ``util_high`` is
    high.  Event metrics are high when their count reaches the given
    fraction of the window's arrivals.
    """

    util_low: float = 0.60
    util_high: float = 0.90
    blocking_high: float = 0.10
    preemption_high: float = 0.01
    devolution_high: float = 0.01

    def util_level(self, value: float) -> str:
        if value < self.util_low:
            return LOW
        if value >= self.util_high:
            return HIGH
        return MEDIUM

    def occupancy_level(self, value: float) -> str:
        """Binary loaded/idle split for one class's BC."""
        return HIGH if value >= self.util_low else LOW

    def ratio_level(self, ratio: float, boundary: float) -> str:
        return HIGH if ratio >= boundary else LOW

    def blocking_level(self, m: Measurements) -> str:
        return self.ratio_level(m.blocking_ratio, self.blocking_high)

    def preemption_level(self, m: Measurements) -> str:
        return self.ratio_level(m.preemption_ratio, self.preemption_high)

    def devolution_level(self, m: Measurements) -> str:
        return self.ratio_level(m.devolution_ratio, self.devolution_high)


# Attributes a rule condition may reference, with their value ranges.
RULE_ATTRIBUTES: dict[str, tuple[float, float] | None] = {
    "active_model": None,  # categorical
    "util_total": (0.0, 1.0),
    "blocking_ratio": (0.0, 1.0),
    "preemption_ratio": (0.0, 1.0),
    "devolution_ratio": (0.0, 1.0),
}


@dataclass(frozen=True)
class Condition:
    attribute: str
    comparator: str
    threshold: object

    def holds(self, values: dict) -> bool:
        return COMPARATORS[self.comparator](values[self.attribute], self.threshold)


@dataclass(frozen=True)
class PolicyRule:
    conditions: tuple[Condition, ...]
    symptom: str
    suggestion: Model | None = None

    def __post_init__(self) -> None:
        for cond in self.conditions:
            if cond.attribute not in RULE_ATTRIBUTES:
                raise PolicyError(f"rule {self.symptom!r}: unknown attribute {cond.attribute!r}")
            if cond.comparator not in COMPARATORS:
                raise PolicyError(f"rule {self.symptom!r}: unknown comparator {cond.comparator!r}")
            bounds = RULE_ATTRIBUTES[cond.attribute]
            if bounds is not None:
                lo, hi = bounds
                if not isinstance(cond.threshold, (int, float)) or not lo <= cond.threshold <= hi:
                    raise PolicyError(
                        f"rule {self.symptom!r}: threshold {cond.threshold!r} outside "
                        f"range [{lo}, {hi}] of {cond.attribute!r}"
                    )

    def matches(self, values: dict) -> bool:
        return all(cond.holds(values) for cond in self.conditions)


@dataclass(frozen=True)
class ManagerGoals:
    """What the manager optimizes: event metrics to drive down, yields to drive up."""

    minimize: tuple[str, ...] = ("preempted", "devolved")
    maximize: tuple[str, ...] = ("unbroken",)
    unbroken_drop_tolerance: float = 0.02

    def __post_init__(self) -> None:
        overlap = set(self.minimize) & set(self.maximize)
        if overlap:
            raise PolicyError(f"metrics cannot be both minimized and maximized: {sorted(overlap)}")


def evaluation_values(measurements: Measurements, active_model: Model) -> dict:
    return {
        "active_model": active_model.value,
        "util_total": measurements.util_total,
        "blocking_ratio": measurements.blocking_ratio,
        "preemption_ratio": measurements.preemption_ratio,
        "devolution_ratio": measurements.devolution_ratio,
    }


def evaluate_policies(
    measurements: Measurements,
    active_model: Model,
    rules: list[PolicyRule],
) -> tuple[str, Model | None] | None:
    """First-match evaluation; None means the network is compliant."""
    values = evaluation_values(measurements, active_model)
    for rule in rules:
        if rule.matches(values):
            return rule.symptom, rule.suggestion
    return None


def default_policy_set(thresholds: Thresholds = Thresholds()) -> list[PolicyRule]:
    """The five stock problem/solution rules, in declaration order.

    1. MAM with a lightly loaded link        -> go to ATCS
    2. RDM, light load but heavy blocking    -> go to ATCS
    3. RDM, heavy load and heavy preemption  -> go to MAM
    4. ATCS, heavy load, devolution dominant -> go to RDM
    5. ATCS, heavy load and heavy preemption -> go to MAM
    """
    t = thresholds

    def rule(symptom, suggestion, *conds):
        return PolicyRule(tuple(Condition(*c) for c in conds), symptom, suggestion)

    return [
        rule(
            "mam-low-utilization", Model.ATCS,
            ("active_model", "==", Model.MAM.value),
            ("util_total", "<", t.util_low),
        ),
        rule(
            "rdm-low-utilization-high-blocking", Model.ATCS,
            ("active_model", "==", Model.RDM.value),
            ("util_total", "<", t.util_low),
            ("blocking_ratio", ">=", t.blocking_high),
        ),
        rule(
            "rdm-high-utilization-high-preemption", Model.MAM,
            ("active_model", "==", Model.RDM.value),
            ("util_total", ">=", t.util_high),
            ("preemption_ratio", ">=", t.preemption_high),
        ),
        rule(
            "atcs-high-utilization-high-devolution", Model.RDM,
            ("active_model", "==", Model.ATCS.value),
            ("util_total", ">=", t.util_high),
            ("preemption_ratio", "<", t.preemption_high),
            ("devolution_ratio", ">=", t.devolution_high),
        ),
        rule(
            "atcs-high-utilization-high-preemption", Model.MAM,
            ("active_model", "==", Model.ATCS.value),
            ("util_total", ">=", t.util_high),
            ("preemption_ratio", ">=", t.preemption_high),
        ),
    ]
