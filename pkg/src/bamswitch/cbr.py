"""Case-based reasoning over link reconfiguration decisions.

The reasoning cycle runs in four stages: search the positive case base for
a problem similar to the current one (falling back to an arbitrary
proposal), bind the retrieved solution to the current problem, apply it,
and after a settling timer judge the outcome against the manager's goals
and store the case as positive or negative.  A traffic-profile guard
discards the case instead of learning from a window whose offered load
shifted, since improvement then proves nothing about the solution.
"""

from __future__ import annotations

import json
import random
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .bam import Link, Model
from .measure import Measurements
from .policy import ManagerGoals, PolicyRule, Thresholds, evaluate_policies

SCHEMA_VERSION = 1
SWITCHABLE_MODELS = (Model.MAM, Model.RDM, Model.ATCS)


class CbrError(Exception):
    """Base for recoverable reasoning-cycle failures."""


class SchemaError(CbrError):
    """Descriptors disagree with the declared attribute schema."""


class Status(str, Enum):
    PENDING = "pending"
    POSITIVE = "positive"
    NEGATIVE = "negative"


class Verdict(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    INCONCLUSIVE = "inconclusive"


# -- problem descriptors -----------------------------------------------------


@dataclass(frozen=True)
class AttributeSpec:
    """Declared kind of one descriptor attribute.

    Numeric attributes need a range; ladder similarity additionally needs
    the step boundaries.
    """

    kind: str  # "categorical" | "numeric"
    lo: float = 0.0
    hi: float = 1.0
    ladder: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("categorical", "numeric"):
            raise SchemaError(f"unknown attribute kind {self.kind!r}")
        if self.kind == "numeric" and not self.hi > self.lo:
            raise SchemaError(f"numeric attribute needs hi > lo, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class ProblemDescriptor:
    """The current problem: context, quantized window measurements, symptom."""

    contextual: dict
    measurements: dict
    symptom: str

    def attributes(self) -> dict:
        flat = dict(self.contextual)
        flat.update(self.measurements)
        flat["symptom"] = self.symptom
        return flat

    def as_dict(self) -> dict:
        return {
            "contextual": dict(self.contextual),
            "measurements": dict(self.measurements),
            "symptom": self.symptom,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemDescriptor":
        return cls(dict(data["contextual"]), dict(data["measurements"]), data["symptom"])

    def key(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


@dataclass(frozen=True)
class SimilarityConfig:
    function: str  # "linear" | "ladder" | "nearest_neighbor"
    schema: dict[str, AttributeSpec]
    weights: dict[str, float] | None = None  # None -> equal weights
    threshold: float = 0.8

    def __post_init__(self) -> None:
        if self.function not in ("linear", "ladder", "nearest_neighbor"):
            raise SchemaError(f"unknown similarity function {self.function!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise SchemaError(f"acceptance threshold must lie in [0, 1], got {self.threshold}")
        if self.weights is not None:
            if set(self.weights) != set(self.schema):
                raise SchemaError("weights must cover exactly the schema attributes")
            if any(w < 0 for w in self.weights.values()):
                raise SchemaError("weights must be non-negative")
            total = sum(self.weights.values())
            if abs(total - 1.0) > 1e-9:
                raise SchemaError(f"weights must sum to 1, got {total}")
        if self.function == "ladder":
            for name, spec in self.schema.items():
                if spec.kind == "numeric" and not spec.ladder:
                    raise SchemaError(f"ladder similarity needs step boundaries for {name!r}")

    def weight(self, name: str) -> float:
        if self.weights is None:
            return 1.0 / len(self.schema)
        return self.weights[name]


def _numeric_similarity(x: float, y: float, spec: AttributeSpec, function: str) -> float:
    if function == "ladder":
        steps = len(spec.ladder) + 1
        sx = bisect_right(spec.ladder, x)
        sy = bisect_right(spec.ladder, y)
        if sx == sy:
            return 1.0
        return 1.0 - abs(sx - sy) / steps
    # linear and nearest_neighbor score identically; nearest-neighbor
    # retrieval simply ranks by this aggregate.
    span = spec.hi - spec.lo
    return max(0.0, 1.0 - abs(x - y) / span)


def similarity(a: ProblemDescriptor, b: ProblemDescriptor, cfg: SimilarityConfig) -> float:
    """Weighted per-attribute similarity in [0, 1]."""
    va, vb = a.attributes(), b.attributes()
    if set(va) != set(cfg.schema) or set(vb) != set(cfg.schema):
        raise SchemaError(
            f"descriptor attributes {sorted(set(va) | set(vb))} do not match "
            f"schema {sorted(cfg.schema)}"
        )
    score = 0.0
    for name, spec in cfg.schema.items():
        if spec.kind == "categorical":
            part = 1.0 if va[name] == vb[name] else 0.0
        else:
            for v in (va[name], vb[name]):
                if not isinstance(v, (int, float)) or not spec.lo <= v <= spec.hi:
                    raise SchemaError(f"attribute {name!r}: value {v!r} outside [{spec.lo}, {spec.hi}]")
            part = _numeric_similarity(va[name], vb[name], spec, cfg.function)
        score += cfg.weight(name) * part
    return min(1.0, max(0.0, score))


# -- cases and bases -------------------------------------------------------


@dataclass(frozen=True)
class Case:
    problem: ProblemDescriptor
    solution: Model
    status: Status
    created_at: float
    metrics_before: Measurements | None = None
    metrics_after: Measurements | None = None

    def pair_key(self) -> tuple[str, str]:
        return (self.problem.key(), self.solution.value)

    def as_dict(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "problem": self.problem.as_dict(),
            "solution": self.solution.value,
            "status": self.status.value,
            "created_at": self.created_at,
            "metrics_before": self.metrics_before.as_dict() if self.metrics_before else None,
            "metrics_after": self.metrics_after.as_dict() if self.metrics_after else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Case":
        if data.get("v") != SCHEMA_VERSION:
            raise CbrError(f"unsupported case schema version {data.get('v')!r}")
        return cls(
            problem=ProblemDescriptor.from_dict(data["problem"]),
            solution=Model(data["solution"]),
            status=Status(data["status"]),
            created_at=data["created_at"],
            metrics_before=(
                Measurements.from_dict(data["metrics_before"]) if data["metrics_before"] else None
            ),
            metrics_after=(
                Measurements.from_dict(data["metrics_after"]) if data["metrics_after"] else None
            ),
        )


class CaseBase:
    """Ordered store of finalized cases; (problem, solution) pairs are unique."""

    def __init__(self, kind: Status, entries: list[Case] | None = None):
        if kind not in (Status.POSITIVE, Status.NEGATIVE):
            raise CbrError("a case base holds positive or negative cases")
        self.kind = kind
        self.entries: list[Case] = []
        self._keys: set[tuple[str, str]] = set()
        for case in entries or []:
            self.add(case)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, CaseBase)
            and self.kind == other.kind
            and self.entries == other.entries
        )

    def add(self, case: Case) -> bool:
        """Insert unless the (problem, solution) pair is already present."""
        if case.status is not self.kind:
            raise CbrError(f"cannot store a {case.status.value} case in the {self.kind.value} base")
        key = case.pair_key()
        if key in self._keys:
            return False
        self._keys.add(key)
        self.entries.append(case)
        return True

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for case in self.entries:
                record = case.as_dict()
                record["kind"] = self.kind.value
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path, kind: Status | None = None,
             skipped: list[str] | None = None) -> "CaseBase":
        """Read a base back; corrupt lines are collected in ``skipped`` if given."""
        entries: list[Case] = []
        seen_kind = kind
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    record_kind = Status(record.pop("kind"))
                    case = Case.from_dict(record)
                    if case.status is not record_kind:
                        raise CbrError("record kind disagrees with case status")
                except (json.JSONDecodeError, KeyError, ValueError, CbrError) as exc:
                    if skipped is None:
                        raise CbrError(f"{path}:{lineno}: corrupt case record: {exc}") from exc
                    skipped.append(f"{path}:{lineno}: {exc}")
                    continue
                if seen_kind is None:
                    seen_kind = record_kind
                entries.append(case)
        return cls(seen_kind or Status.POSITIVE, entries)


# -- the four reasoning stages ----------------------------------------------


def retrieve(
    problem: ProblemDescriptor,
    positive: CaseBase,
    cfg: SimilarityConfig,
    k: int = 3,
) -> list[tuple[Case, float]]:
    """Top-k positive cases at or above the acceptance threshold, best first."""
    if k < 1:
        raise ValueError("k must be at least 1")
    scored = []
    for index, case in enumerate(positive.entries):
        score = similarity(problem, case.problem, cfg)
        if score >= cfg.threshold:
            scored.append((case, score, index))
    # ties break toward the older case
    scored.sort(key=lambda item: (-item[1], item[0].created_at, item[2]))
    return [(case, score) for case, score, _ in scored[:k]]


def excluded_models(
    problem: ProblemDescriptor,
    negative: CaseBase,
    cfg: SimilarityConfig,
) -> set[Model]:
    """Solutions already rejected for problems similar to this one."""
    out: set[Model] = set()
    for case in negative.entries:
        if case.solution not in out and similarity(problem, case.problem, cfg) >= cfg.threshold:
            out.add(case.solution)
    return out


def arbitrary_solution(
    problem: ProblemDescriptor,
    negative: CaseBase,
    rng: random.Random,
    cfg: SimilarityConfig,
    active_model: Model,
    suggestion: Model | None = None,
    tried: set[Model] = frozenset(),
) -> Model | None:
    """Propose a model when retrieval finds nothing.

    Uniformly random over the switchable models minus the active one and
    minus solutions rejected for similar problems; a suggestion (when the
    policy hint mode is on) wins if it survives the exclusions.  If the
    exclusions empty the set, any model other than the active one is fair
    game again; ``tried`` keeps this cycle's already-invalidated picks out
    even then.
    """
    rejected = excluded_models(problem, negative, cfg)
    allowed = [m for m in SWITCHABLE_MODELS
               if m is not active_model and m not in rejected and m not in tried]
    if not allowed:
        allowed = [m for m in SWITCHABLE_MODELS if m is not active_model and m not in tried]
    if not allowed:
        return None
    if suggestion is not None and suggestion in allowed:
        return suggestion
    return allowed[rng.randrange(len(allowed))]


def adapt(
    retrieved: Case | Model,
    problem: ProblemDescriptor,
    now: float,
    metrics_before: Measurements | None,
) -> Case:
    """Bind the retrieved solution verbatim to the current problem as a pending case."""
    solution = retrieved.solution if isinstance(retrieved, Case) else retrieved
    return Case(
        problem=problem,
        solution=solution,
        status=Status.PENDING,
        created_at=now,
        metrics_before=metrics_before,
    )


def validate_against_rejected(
    candidate: Case,
    negative: CaseBase,
    cfg: SimilarityConfig,
) -> bool:
    """False when a similar problem already rejected this same solution."""
    if candidate.status is not Status.PENDING:
        raise CbrError("only pending cases are validated")
    for case in negative.entries:
        if case.solution is candidate.solution:
            if similarity(candidate.problem, case.problem, cfg) >= cfg.threshold:
                return False
    return True


@dataclass(frozen=True)
class ProfileGuard:
    """Blocks learning when per-class offered load shifted between windows."""

    tolerance: float = 0.2

    def trips(self, before: Measurements, after: Measurements) -> bool:
        for b, a in zip(before.offered_per_class, after.offered_per_class):
            if b == 0 and a == 0:
                continue
            if b == 0:
                return True
            if abs(a - b) / b > self.tolerance:
                return True
        return False


def revise(
    pending: Case,
    after: Measurements,
    before: Measurements | None,
    goals: ManagerGoals,
    guard: ProfileGuard,
) -> Verdict:
    """Judge an applied solution once the settling timer has run out.

    Positive means the minimized metrics strictly dropped, or stayed equal
    while the kept-LSP yield strictly rose; a yield drop beyond the
    configured tolerance vetoes a positive either way.  A tripped profile
    guard makes the window unjudgeable.
    """
    if before is None:
        raise CbrError("revision needs the pre-solution measurements")
    if guard.trips(before, after):
        return Verdict.INCONCLUSIVE
    cost_before = sum(getattr(before, m) for m in goals.minimize)
    cost_after = sum(getattr(after, m) for m in goals.minimize)
    yield_before = sum(getattr(before, m) for m in goals.maximize)
    yield_after = sum(getattr(after, m) for m in goals.maximize)
    if yield_after < yield_before * (1.0 - goals.unbroken_drop_tolerance):
        return Verdict.NEGATIVE
    if cost_after < cost_before:
        return Verdict.POSITIVE
    if cost_after == cost_before and yield_after > yield_before:
        return Verdict.POSITIVE
    return Verdict.NEGATIVE


def retain(
    case: Case,
    verdict: Verdict,
    positive: CaseBase,
    negative: CaseBase,
    after: Measurements | None = None,
) -> bool:
    """File the judged case in the matching base; duplicates drop silently."""
    if verdict is Verdict.POSITIVE:
        final = replace(case, status=Status.POSITIVE, metrics_after=after)
        return positive.add(final)
    if verdict is Verdict.NEGATIVE:
        final = replace(case, status=Status.NEGATIVE, metrics_after=after)
        return negative.add(final)
    raise CbrError("inconclusive cases are discarded, not retained")


# -- problem construction ---------------------------------------------------


def default_schema(num_classes: int, max_bc: float = 1_000_000.0) -> dict[str, AttributeSpec]:
    """Attribute schema for link problems: context, quantized levels, symptom."""
    schema: dict[str, AttributeSpec] = {
        "active_model": AttributeSpec("categorical"),
        "symptom": AttributeSpec("categorical"),
        "tol_util_low": AttributeSpec("numeric", 0.0, 1.0),
        "tol_util_high": AttributeSpec("numeric", 0.0, 1.0),
        "tol_blocking": AttributeSpec("numeric", 0.0, 1.0),
        "tol_preemption": AttributeSpec("numeric", 0.0, 1.0),
        "tol_devolution": AttributeSpec("numeric", 0.0, 1.0),
        "util_level": AttributeSpec("categorical"),
        "preemption_level": AttributeSpec("categorical"),
        "devolution_level": AttributeSpec("categorical"),
        "blocking_level": AttributeSpec("categorical"),
    }
    for i in range(num_classes):
        schema[f"bc{i}"] = AttributeSpec("numeric", 0.0, max_bc)
        schema[f"util_bc{i}_level"] = AttributeSpec("categorical")
    return schema


def build_problem(
    link: Link,
    measurements: Measurements,
    symptom: str,
    thresholds: Thresholds,
) -> ProblemDescriptor:
    """Quantize one window into a descriptor.

    Measurement attributes are stored as discrete levels (derived from the
    same thresholds the policies use) rather than raw counts, so recurring
    traffic conditions map to identical descriptors and the case base can
    deduplicate what it has already learned.
    """
    contextual = {
        "active_model": link.active_model.value,
        "tol_util_low": thresholds.util_low,
        "tol_util_high": thresholds.util_high,
        "tol_blocking": thresholds.blocking_high,
        "tol_preemption": thresholds.preemption_high,
        "tol_devolution": thresholds.devolution_high,
    }
    for c in link.classes:
        contextual[f"bc{c.index}"] = c.bc
    quantized = {
        "util_level": thresholds.util_level(measurements.util_total),
        "preemption_level": thresholds.preemption_level(measurements),
        "devolution_level": thresholds.devolution_level(measurements),
        "blocking_level": thresholds.blocking_level(measurements),
    }
    for c in link.classes:
        # per-BC occupancy is binary: a three-way split flaps on windows
        # that straddle a load-level change
        quantized[f"util_bc{c.index}_level"] = thresholds.occupancy_level(
            measurements.util_per_class[c.index]
        )
    return ProblemDescriptor(contextual, quantized, symptom)


# -- cycle orchestration -----------------------------------------------------


@dataclass(frozen=True)
class CycleOutcome:
    action: str  # "applied" | "no-action"
    reason: str = ""
    source: str = ""  # "retrieval" | "arbitrary" | "injected"
    model: Model | None = None
    case: Case | None = None
    attempts: int = 0


@dataclass
class CbrEngine:
    """Holds the reasoning configuration and runs cycles against a link.

    The cycle is split across simulated time: ``run_cycle`` covers proposal
    through application and leaves a pending case; ``complete_revision``
    judges and stores it once the harness's timer expires.
    """

    similarity_cfg: SimilarityConfig
    thresholds: Thresholds
    goals: ManagerGoals
    guard: ProfileGuard
    rules: list[PolicyRule]
    rng: random.Random
    retrieve_k: int = 3
    policy_solutions: str = "hint"  # "hint" | "seed" | "off"
    pending: Case | None = None
    retrieval_hits: int = 0
    retrieval_misses: int = 0

    def run_cycle(
        self,
        trigger: str,
        link: Link,
        positive: CaseBase,
        negative: CaseBase,
        measurements: Measurements,
        now: float,
        injected_solution: Model | None = None,
    ) -> CycleOutcome:
        if self.pending is not None:
            return CycleOutcome("no-action", reason="revision-in-flight")
        if injected_solution is not None:
            # manager bypass: skip the compliance gate, keep the rest of the cycle
            symptom, suggestion = "manager-proposal", None
        else:
            finding = evaluate_policies(measurements, link.active_model, self.rules)
            if finding is None:
                return CycleOutcome("no-action", reason="compliant")
            symptom, suggestion = finding
        if self.policy_solutions == "off":
            suggestion = None
        problem = build_problem(link, measurements, symptom, self.thresholds)

        tried: set[Model] = set()
        attempts = 0
        while attempts < len(SWITCHABLE_MODELS):
            attempts += 1
            source = ""
            solution: Model | None = None
            if injected_solution is not None:
                solution, source = injected_solution, "injected"
                injected_solution = None
            else:
                hits = retrieve(problem, positive, self.similarity_cfg, self.retrieve_k)
                for case, _score in hits:
                    if case.solution is not link.active_model and case.solution not in tried:
                        solution, source = case.solution, "retrieval"
                        break
            if solution is None:
                self.retrieval_misses += 1
                hint = suggestion if self.policy_solutions == "hint" else None
                solution = arbitrary_solution(
                    problem, negative, self.rng, self.similarity_cfg,
                    link.active_model, hint, tried,
                )
                source = "arbitrary"
                if solution is None:
                    return CycleOutcome("no-action", reason="no-solution", attempts=attempts)
            elif source == "retrieval":
                self.retrieval_hits += 1

            candidate = adapt(solution, problem, now, metrics_before=measurements)
            if not validate_against_rejected(candidate, negative, self.similarity_cfg):
                # invalid: discard and restart the cycle without this solution
                tried.add(solution)
                continue
            link.reconfigure(solution, now)
            self.pending = candidate
            return CycleOutcome(
                "applied", reason=symptom, source=source,
                model=solution, case=candidate, attempts=attempts,
            )
        return CycleOutcome("no-action", reason="all-solutions-rejected", attempts=attempts)

    def complete_revision(
        self,
        after: Measurements,
        positive: CaseBase,
        negative: CaseBase,
    ) -> tuple[Verdict, bool]:
        """Judge the pending case against the post-switch window and store it."""
        if self.pending is None:
            raise CbrError("no pending case to revise")
        case = self.pending
        self.pending = None
        verdict = revise(case, after, case.metrics_before, self.goals, self.guard)
        if verdict is Verdict.INCONCLUSIVE:
            return verdict, False
        added = retain(case, verdict, positive, negative, after=after)
        return verdict, added

    def seed_from_rules(self, link: Link, positive: CaseBase) -> int:
        """Pre-seed the positive base with the policy rules' own solutions.

        Used by the ``seed`` mode only; it trades the clean-slate learning
        story for instant retrieval hits.
        """
        added = 0
        for rule in self.rules:
            if rule.suggestion is None:
                continue
            values = _representative_measurement_levels(rule, self.thresholds)
            model = values.pop("active_model")
            quantized = {
                "util_level": values["util"],
                "preemption_level": values["preemption"],
                "devolution_level": values["devolution"],
                "blocking_level": values["blocking"],
            }
            for c in link.classes:
                quantized[f"util_bc{c.index}_level"] = values["util"]
            contextual = {
                "active_model": model,
                "tol_util_low": self.thresholds.util_low,
                "tol_util_high": self.thresholds.util_high,
                "tol_blocking": self.thresholds.blocking_high,
                "tol_preemption": self.thresholds.preemption_high,
                "tol_devolution": self.thresholds.devolution_high,
            }
            for c in link.classes:
                contextual[f"bc{c.index}"] = c.bc
            problem = ProblemDescriptor(contextual, quantized, rule.symptom)
            case = Case(problem, rule.suggestion, Status.POSITIVE, created_at=0.0)
            if positive.add(case):
                added += 1
        return added


def _representative_measurement_levels(rule: PolicyRule, thresholds: Thresholds) -> dict:
    from .policy import HIGH, LOW

    values = {"active_model": None, "util": LOW, "preemption": LOW,
              "devolution": LOW, "blocking": LOW}
    for cond in rule.conditions:
        if cond.attribute == "active_model":
            values["active_model"] = cond.threshold
        elif cond.attribute == "util_total":
            values["util"] = LOW if cond.comparator in ("<", "<=") else HIGH
        elif cond.attribute == "blocking_ratio":
            values["blocking"] = HIGH if cond.comparator in (">", ">=") else LOW
        elif cond.attribute == "preemption_ratio":
            values["preemption"] = HIGH if cond.comparator in (">", ">=") else LOW
        elif cond.attribute == "devolution_ratio":
            values["devolution"] = HIGH if cond.comparator in (">", ">=") else LOW
    return values
