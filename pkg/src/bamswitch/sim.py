"""Discrete-event simulation of one link under a traffic schedule.

Arrivals are Poisson per class with exponential holding times and integer
demands drawn from a configured set; the offered load of a class is its
level multiplier times its BC.  The loop admits and releases LSPs through
the allocation engine, closes tumbling measurement windows, and in
cognitive mode drives the reasoning cycle from reactive (policy breach)
and proactive (timer) triggers.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import NamedTuple

from .bam import Link, Model, TrafficClass
from .cbr import CaseBase, CbrEngine, ProfileGuard, SimilarityConfig, Status, Verdict, default_schema
from .config import ScenarioConfig, TrafficPattern, check_scenario
from .measure import WindowAccumulator
from .policy import ManagerGoals, evaluate_policies


class Arrival(NamedTuple):
    time: float
    class_index: int
    bandwidth: int
    holding: float


def generate_arrivals(
    pattern: TrafficPattern,
    bcs: tuple[int, ...],
    demand,
    seed: int,
    duration: float,
    t_start: float = 0.0,
    segment: int = 0,
) -> list[Arrival]:
    """Deterministic time-ordered arrival stream for one schedule segment.

    Each (segment, class) pair draws from its own seeded stream, so the
    traffic is identical no matter what the consuming loop does with it.
    """
    out: list[Arrival] = []
    mean_demand = demand.mean_bandwidth
    for class_index, bc in enumerate(bcs):
        level = pattern.levels[class_index]
        offered = demand.levels[level] * bc  # Mbps
        rate = offered / (mean_demand * demand.mean_holding)  # arrivals per second
        rng = random.Random(f"{seed}:arrivals:{segment}:{class_index}")
        t = t_start
        while True:
            t += rng.expovariate(rate)
            if t >= t_start + duration:
                break
            out.append(Arrival(
                time=t,
                class_index=class_index,
                bandwidth=rng.choice(demand.bandwidths),
                holding=rng.expovariate(1.0 / demand.mean_holding),
            ))
    out.sort(key=lambda a: (a.time, a.class_index))
    return out


def schedule_arrivals(cfg: ScenarioConfig) -> list[Arrival]:
    """Arrivals for the whole schedule (all patterns, all repetitions)."""
    out: list[Arrival] = []
    segment = 0
    t = 0.0
    for _rep in range(cfg.schedule.repetitions):
        for pattern in cfg.schedule.patterns:
            out.extend(generate_arrivals(
                pattern, cfg.bcs, cfg.demand, cfg.seed,
                cfg.schedule.pattern_seconds, t, segment,
            ))
            t += cfg.schedule.pattern_seconds
            segment += 1
    out.sort(key=lambda a: (a.time, a.class_index))
    return out


@dataclass
class TriggerStats:
    reactive_fired: int = 0
    proactive_fired: int = 0
    injected_fired: int = 0
    reactive_suppressed: int = 0
    proactive_suppressed: int = 0
    cycles_applied: int = 0
    cycles_no_action: int = 0
    inconclusive: int = 0
    positive_verdicts: int = 0
    negative_verdicts: int = 0


@dataclass
class SimulationReport:
    label: str
    mode: str
    seed: int
    initial_model: str
    config_hash: str
    schedule_hash: str
    totals: dict
    windows: list[dict]
    timeline: list[tuple[float, str]]
    cbr: dict
    event_counts: dict
    repetitions: int
    repetition_seconds: float

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "mode": self.mode,
            "seed": self.seed,
            "initial_model": self.initial_model,
            "config_hash": self.config_hash,
            "schedule_hash": self.schedule_hash,
            "totals": self.totals,
            "windows": self.windows,
            "timeline": [[t, m] for t, m in self.timeline],
            "cbr": self.cbr,
            "event_counts": self.event_counts,
            "repetitions": self.repetitions,
            "repetition_seconds": self.repetition_seconds,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationReport":
        return cls(
            label=data["label"],
            mode=data["mode"],
            seed=data["seed"],
            initial_model=data["initial_model"],
            config_hash=data["config_hash"],
            schedule_hash=data["schedule_hash"],
            totals=data["totals"],
            windows=data["windows"],
            timeline=[(t, m) for t, m in data["timeline"]],
            cbr=data["cbr"],
            event_counts=data["event_counts"],
            repetitions=data["repetitions"],
            repetition_seconds=data["repetition_seconds"],
        )


@dataclass
class RunResult:
    report: SimulationReport
    link: Link
    positive: CaseBase
    negative: CaseBase


def _build_engine(cfg: ScenarioConfig) -> CbrEngine:
    schema = default_schema(len(cfg.bcs), max_bc=float(cfg.capacity))
    ladder = {name: tuple(b) for name, b in cfg.cbr.ladder_boundaries.items()}
    if ladder:
        schema = {
            name: (spec if name not in ladder else
                   type(spec)(spec.kind, spec.lo, spec.hi, ladder[name]))
            for name, spec in schema.items()
        }
    sim_cfg = SimilarityConfig(
        function=cfg.cbr.similarity,
        schema=schema,
        weights=cfg.cbr.weights,
        threshold=cfg.cbr.threshold,
    )
    return CbrEngine(
        similarity_cfg=sim_cfg,
        thresholds=cfg.thresholds,
        goals=ManagerGoals(unbroken_drop_tolerance=cfg.cbr.unbroken_drop_tolerance),
        guard=ProfileGuard(cfg.cbr.guard_tolerance),
        rules=cfg.rules(),
        rng=random.Random(f"{cfg.seed}:cbr"),
        retrieve_k=cfg.cbr.retrieve_k,
        policy_solutions=cfg.cbr.policy_solutions,
    )


def simulate(cfg: ScenarioConfig) -> RunResult:
    """Run one scenario to completion and assemble its report."""
    check_scenario(cfg)
    arrivals = schedule_arrivals(cfg)
    classes = [TrafficClass(i, bc) for i, bc in enumerate(cfg.bcs)]
    link = Link.for_model(classes, cfg.capacity, cfg.model, debug=cfg.debug)
    total_seconds = cfg.schedule.total_seconds
    cognitive = cfg.mode == "cognitive"
    engine = _build_engine(cfg) if cognitive else None
    positive = CaseBase(Status.POSITIVE)
    negative = CaseBase(Status.NEGATIVE)
    if cognitive and cfg.cbr.policy_solutions == "seed":
        engine.seed_from_rules(link, positive)

    acc = WindowAccumulator(link, cfg.window_seconds, cfg.demand.mean_bandwidth)
    stats = TriggerStats()
    timeline: list[tuple[float, str]] = []
    if total_seconds > 0:
        timeline.append((0.0, link.active_model.value))

    reps = cfg.schedule.repetitions
    rep_seconds = cfg.schedule.repetition_seconds
    retained_by_rep = [0] * reps
    windows: list[dict] = []
    num_windows = round(total_seconds / cfg.window_seconds) if total_seconds else 0
    injections = sorted(cfg.injections)
    injection_idx = 0
    revision_due: int | None = None

    def rep_of(t: float) -> int:
        return min(int(max(t - 1e-9, 0.0) / rep_seconds), reps - 1) if reps else 0

    def pattern_of(t_mid: float) -> tuple[int, int]:
        seg = int(t_mid / cfg.schedule.pattern_seconds)
        return seg % len(cfg.schedule.patterns), seg // len(cfg.schedule.patterns)

    release_heap: list[tuple[float, int, int]] = []  # (time, seq, lsp_id)
    release_seq = 0
    arrival_idx = 0
    window_idx = 0  # completed windows
    arrivals_seen = 0

    def on_window_close(now: float, index: int) -> None:
        """Revision first, then at most one trigger, in a fixed order."""
        nonlocal revision_due, injection_idx
        measurements = acc.close(now)
        t_mid = (measurements.t_start + measurements.t_end) / 2.0
        p_idx, r_idx = pattern_of(t_mid)
        record = measurements.as_dict()
        record["pattern_index"] = p_idx
        record["repetition"] = r_idx
        record["model"] = link.active_model.value
        windows.append(record)
        if not cognitive:
            return

        if engine.pending is not None and revision_due is not None and index >= revision_due:
            verdict, added = engine.complete_revision(measurements, positive, negative)
            revision_due = None
            if verdict is Verdict.INCONCLUSIVE:
                stats.inconclusive += 1
            elif verdict is Verdict.POSITIVE:
                stats.positive_verdicts += 1
            else:
                stats.negative_verdicts += 1
            if added:
                retained_by_rep[rep_of(now)] += 1

        ran_cycle = False
        before_model = link.active_model

        # manager-proposed solution, scripted
        while injection_idx < len(injections) and injections[injection_idx][0] <= now:
            _, injected = injections[injection_idx]
            injection_idx += 1
            if engine.pending is None and not ran_cycle:
                outcome = engine.run_cycle(
                    "injected", link, positive, negative, measurements, now,
                    injected_solution=injected,
                )
                stats.injected_fired += 1
                ran_cycle = True
                _track_outcome(outcome)

        symptom = evaluate_policies(measurements, link.active_model, engine.rules)
        if symptom is not None:
            if engine.pending is not None or ran_cycle:
                stats.reactive_suppressed += 1
            else:
                stats.reactive_fired += 1
                outcome = engine.run_cycle(
                    "reactive", link, positive, negative, measurements, now)
                ran_cycle = True
                _track_outcome(outcome)

        if index % cfg.cbr.proactive_windows == 0:
            if engine.pending is not None or ran_cycle:
                stats.proactive_suppressed += 1
            else:
                stats.proactive_fired += 1
                outcome = engine.run_cycle(
                    "proactive", link, positive, negative, measurements, now)
                ran_cycle = True
                _track_outcome(outcome)

        if link.active_model is not before_model:
            timeline.append((now, link.active_model.value))

        if engine.pending is not None and revision_due is None:
            revision_due = index + cfg.cbr.revision_windows

    def _track_outcome(outcome) -> None:
        if outcome.action == "applied":
            stats.cycles_applied += 1
        else:
            stats.cycles_no_action += 1

    while True:
        next_release = release_heap[0][0] if release_heap else float("inf")
        next_arrival = arrivals[arrival_idx].time if arrival_idx < len(arrivals) else float("inf")
        next_window = (window_idx + 1) * cfg.window_seconds if window_idx < num_windows else float("inf")
        t = min(next_release, next_arrival, next_window)
        if t == float("inf") or t > total_seconds:
            # anything scheduled past the horizon stays active at end of run
            break
        # releases before arrivals before window closes at the same instant
        if next_release <= next_arrival and next_release <= next_window:
            _, _, lsp_id = heapq.heappop(release_heap)
            if link.is_active(lsp_id):
                acc.advance(t)
                link.release(lsp_id, completed=True, now=t)
        elif next_arrival <= next_window:
            arrival = arrivals[arrival_idx]
            arrival_idx += 1
            arrivals_seen += 1
            acc.advance(t)
            acc.record_arrival(arrival.class_index)
            decision, record = link.admit(
                arrival.class_index, arrival.bandwidth, t, arrival.holding)
            if decision.accepted:
                release_seq += 1
                heapq.heappush(release_heap, (t + arrival.holding, release_seq, record.lsp_id))
        else:
            window_idx += 1
            on_window_close(t, window_idx)

    counters = link.counters
    victimized = counters.preempted + counters.devolved
    active_at_end = len(link.active)
    assert arrivals_seen == counters.established + counters.blocked, "arrival conservation broken"
    assert counters.established == counters.unbroken + victimized + active_at_end, \
        "admission conservation broken"
    link.check_ledger()

    per_class = sorted(link.used)
    totals = {
        "arrivals": arrivals_seen,
        "established": counters.established,
        "blocked": counters.blocked,
        "preempted": counters.preempted,
        "devolved": counters.devolved,
        "unbroken": counters.unbroken,
        "active_at_end": active_at_end,
        "unbroken_plus_active": counters.unbroken + active_at_end,
        "established_per_class": [counters.established_per_class.get(i, 0) for i in per_class],
        "blocked_per_class": [counters.blocked_per_class.get(i, 0) for i in per_class],
        "preempted_per_class": [counters.preempted_per_class.get(i, 0) for i in per_class],
        "devolved_per_class": [counters.devolved_per_class.get(i, 0) for i in per_class],
        "unbroken_per_class": [counters.unbroken_per_class.get(i, 0) for i in per_class],
    }
    event_counts: dict[str, int] = {}
    for event in link.events:
        event_counts[event.kind] = event_counts.get(event.kind, 0) + 1
    cbr_stats = {
        "positive_cases": len(positive),
        "negative_cases": len(negative),
        "retrieval_hits": engine.retrieval_hits if engine else 0,
        "retrieval_misses": engine.retrieval_misses if engine else 0,
        "reactive_fired": stats.reactive_fired,
        "proactive_fired": stats.proactive_fired,
        "injected_fired": stats.injected_fired,
        "reactive_suppressed": stats.reactive_suppressed,
        "proactive_suppressed": stats.proactive_suppressed,
        "cycles_applied": stats.cycles_applied,
        "cycles_no_action": stats.cycles_no_action,
        "inconclusive": stats.inconclusive,
        "positive_verdicts": stats.positive_verdicts,
        "negative_verdicts": stats.negative_verdicts,
        "retained_by_repetition": retained_by_rep,
    }
    report = SimulationReport(
        label=cfg.label,
        mode=cfg.mode,
        seed=cfg.seed,
        initial_model=cfg.model.value,
        config_hash=cfg.config_hash(),
        schedule_hash=cfg.schedule_hash(),
        totals=totals,
        windows=windows,
        timeline=timeline,
        cbr=cbr_stats,
        event_counts=event_counts,
        repetitions=reps,
        repetition_seconds=rep_seconds,
    )
    return RunResult(report, link, positive, negative)


def run_scenario(cfg: ScenarioConfig) -> SimulationReport:
    return simulate(cfg).report
