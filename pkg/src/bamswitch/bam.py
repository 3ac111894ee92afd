"""Per-link bandwidth allocation engine.

A link owns a fixed capacity split into per-class bandwidth constraints
(BCs).  A sharing matrix decides which class may occupy spare bandwidth
inside another class's BC, which is enough to express the three classic
allocation models:

* MAM   - no sharing, every class confined to its own BC.
* RDM   - lower-priority classes may borrow unused higher-priority BC
          bandwidth (high-to-low loans); owners reclaim by preemption.
* ATCS  - loans in both directions; reclaiming from a higher-priority
          borrower is a devolution.

Priority convention: higher class index = higher priority rank.
All bandwidth arithmetic is integer Mbps so the ledger stays exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Model(str, Enum):
    MAM = "MAM"
    RDM = "RDM"
    ATCS = "ATCS"
    CUSTOM = "custom"


class VictimKind(str, Enum):
    PREEMPTED = "preempted"
    DEVOLVED = "devolved"


class Outcome(str, Enum):
    ACCEPTED = "accepted"
    BLOCKED = "blocked"


class ConfigurationError(ValueError):
    """Raised for invalid class/matrix/model configuration."""


class LedgerError(AssertionError):
    """Raised when the allocation ledger disagrees with the active LSP set."""


@dataclass(frozen=True)
class TrafficClass:
    """One traffic class: its index doubles as its priority rank."""

    index: int
    bc: int  # bandwidth constraint, Mbps

    @property
    def rank(self) -> int:
        return self.index


def validate_classes(classes: list[TrafficClass], capacity: int) -> None:
    if not classes:
        raise ConfigurationError("at least one traffic class is required")
    indexes = [c.index for c in classes]
    if indexes != list(range(len(classes))):
        raise ConfigurationError(f"class indexes must be 0..{len(classes) - 1}, got {indexes}")
    for c in classes:
        if c.bc <= 0:
            raise ConfigurationError(f"class {c.index}: bc must be positive, got {c.bc}")
    total = sum(c.bc for c in classes)
    if total != capacity:
        raise ConfigurationError(f"sum of bandwidth constraints ({total}) must equal link capacity ({capacity})")


@dataclass(frozen=True)
class SharingMatrix:
    """allow[b][l] is True when class b may occupy spare bandwidth of class l's BC."""

    allow: tuple[tuple[bool, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.allow)
        for row in self.allow:
            if len(row) != n:
                raise ConfigurationError("sharing matrix must be square")
        for c in range(n):
            if not self.allow[c][c]:
                raise ConfigurationError(f"class {c} must always be allowed to use its own BC")

    @property
    def size(self) -> int:
        return len(self.allow)

    def permits(self, borrower: int, lender: int) -> bool:
        return self.allow[borrower][lender]


def make_model_matrix(model: Model | str, classes: list[TrafficClass]) -> SharingMatrix:
    """Build the sharing matrix preset for one of the three base models."""
    if not classes:
        raise ConfigurationError("at least one traffic class is required")
    try:
        model = Model(model)
    except ValueError:
        raise ConfigurationError(f"unknown allocation model {model!r}") from None
    n = len(classes)
    rank = {c.index: c.rank for c in classes}
    if model is Model.MAM:
        rows = [[b == l for l in range(n)] for b in range(n)]
    elif model is Model.RDM:
        # high-to-low only: a class may borrow spare of higher-priority BCs
        rows = [[b == l or rank[l] > rank[b] for l in range(n)] for b in range(n)]
    elif model is Model.ATCS:
        rows = [[True] * n for _ in range(n)]
    else:
        raise ConfigurationError("custom matrices are built directly, not from a model tag")
    return SharingMatrix(tuple(tuple(row) for row in rows))


@dataclass
class LspRecord:
    """An admitted LSP and where its bandwidth lives (lender class -> Mbps)."""

    lsp_id: int
    class_index: int
    bandwidth: int
    arrival_time: float
    holding_time: float
    breakdown: dict[int, int]
    seq: int  # admission order, used for victim recency


@dataclass(frozen=True)
class AdmissionDecision:
    outcome: Outcome
    breakdown: dict[int, int] = field(default_factory=dict)
    victims: tuple[tuple[int, VictimKind], ...] = ()

    @property
    def accepted(self) -> bool:
        return self.outcome is Outcome.ACCEPTED


@dataclass
class MetricCounters:
    """Cumulative event tallies; per-class keyed by the LSP's own class."""

    established: int = 0
    blocked: int = 0
    preempted: int = 0
    devolved: int = 0
    unbroken: int = 0
    established_per_class: dict[int, int] = field(default_factory=dict)
    blocked_per_class: dict[int, int] = field(default_factory=dict)
    preempted_per_class: dict[int, int] = field(default_factory=dict)
    devolved_per_class: dict[int, int] = field(default_factory=dict)
    unbroken_per_class: dict[int, int] = field(default_factory=dict)

    def _bump(self, name: str, class_index: int) -> None:
        setattr(self, name, getattr(self, name) + 1)
        per = getattr(self, f"{name}_per_class")
        per[class_index] = per.get(class_index, 0) + 1

    def copy(self) -> "MetricCounters":
        return MetricCounters(
            self.established,
            self.blocked,
            self.preempted,
            self.devolved,
            self.unbroken,
            dict(self.established_per_class),
            dict(self.blocked_per_class),
            dict(self.preempted_per_class),
            dict(self.devolved_per_class),
            dict(self.unbroken_per_class),
        )


@dataclass(frozen=True)
class Event:
    """Structured record of one ledger-changing (or rejected) operation."""

    time: float
    kind: str  # admit | block | preempt | devolve | release | reconfigure | warning
    lsp_id: int | None = None
    class_index: int | None = None
    bandwidth: int | None = None
    detail: str = ""


class Link:
    """Single-link allocation ledger driven by one simulation loop.

    ``used[l]`` tracks how much of class l's BC is occupied by anyone;
    it always equals the column sum of active LSP breakdowns.
    """

    def __init__(
        self,
        classes: list[TrafficClass],
        capacity: int,
        matrix: SharingMatrix,
        model: Model | str = Model.CUSTOM,
        debug: bool = False,
    ):
        validate_classes(classes, capacity)
        if matrix.size != len(classes):
            raise ConfigurationError("sharing matrix size must match the number of classes")
        self.classes = list(classes)
        self.capacity = capacity
        self.matrix = matrix
        self.active_model = Model(model)
        self.debug = debug
        self.active: dict[int, LspRecord] = {}
        self.used: dict[int, int] = {c.index: 0 for c in classes}
        # lender -> ids of LSPs of another class holding bandwidth there
        self._borrowers: dict[int, set[int]] = {c.index: set() for c in classes}
        self.counters = MetricCounters()
        self.events: list[Event] = []
        self._next_id = 0
        self._next_seq = 0

    # -- construction helpers -------------------------------------------------

    @classmethod
    def for_model(
        cls,
        classes: list[TrafficClass],
        capacity: int,
        model: Model | str,
        debug: bool = False,
    ) -> "Link":
        return cls(classes, capacity, make_model_matrix(model, classes), model, debug)

    # -- queries ---------------------------------------------------------------

    def bc(self, class_index: int) -> int:
        return self.classes[class_index].bc

    def rank(self, class_index: int) -> int:
        return self.classes[class_index].rank

    def spare(self, class_index: int) -> int:
        return self.bc(class_index) - self.used[class_index]

    def total_used(self) -> int:
        return sum(self.used.values())

    def is_active(self, lsp_id: int) -> bool:
        return lsp_id in self.active

    def lender_order(self, class_index: int) -> list[int]:
        """Own BC first, then permitted lenders by priority distance (ties: lower index)."""
        others = [
            l.index
            for l in self.classes
            if l.index != class_index and self.matrix.permits(class_index, l.index)
        ]
        others.sort(key=lambda l: (abs(self.rank(l) - self.rank(class_index)), l))
        return [class_index] + others

    def check_ledger(self) -> None:
        """Recompute the ledger from active LSPs; raise LedgerError on any drift."""
        recomputed = {c.index: 0 for c in self.classes}
        for lsp in self.active.values():
            if sum(lsp.breakdown.values()) != lsp.bandwidth:
                raise LedgerError(f"lsp {lsp.lsp_id}: breakdown does not sum to its bandwidth")
            for lender, amount in lsp.breakdown.items():
                recomputed[lender] += amount
        if recomputed != self.used:
            raise LedgerError(f"ledger drift: recomputed {recomputed} != tracked {self.used}")
        for c in self.classes:
            if self.used[c.index] > c.bc:
                raise LedgerError(f"class {c.index} BC exceeded: {self.used[c.index]} > {c.bc}")
        if self.total_used() > self.capacity:
            raise LedgerError("link capacity exceeded")

    # -- operations --------------------------------------------------------

    def admit(
        self,
        class_index: int,
        bandwidth: int,
        now: float = 0.0,
        holding_time: float = 0.0,
    ) -> tuple[AdmissionDecision, LspRecord | None]:
        """Admit one request, reclaiming own-BC loans ahead of borrowing elsewhere.

        The request fills its own BC first: spare bandwidth, then whatever can
        be reclaimed from borrowers squatting there (whole LSPs, lowest
        priority first, then most recently admitted).  Any remainder comes
        from permitted lenders' spare in lender order.  Blocked requests leave
        the ledger untouched.
        """
        if bandwidth <= 0:
            raise ValueError(f"request bandwidth must be positive, got {bandwidth}")
        if class_index not in self.used:
            raise ValueError(f"unknown traffic class {class_index}")

        order = self.lender_order(class_index)
        spare = {l: self.spare(l) for l in self.used}

        # Borrowers currently squatting in the requesting class's BC, in
        # teardown order.  Tearing one down frees its whole breakdown.
        candidates = sorted(
            (self.active[i] for i in self._borrowers[class_index]),
            key=lambda lsp: (self.rank(lsp.class_index), -lsp.seq),
        )

        reclaimable = sum(lsp.breakdown.get(class_index, 0) for lsp in candidates)
        own_target = min(bandwidth, spare[class_index] + reclaimable)

        victims: list[LspRecord] = []
        freed_own = 0
        for lsp in candidates:
            if spare[class_index] + freed_own >= own_target:
                break
            victims.append(lsp)
            freed_own += lsp.breakdown.get(class_index, 0)

        # Spare per lender after the chosen teardowns (residue above the own
        # target simply stays spare and may cover the remainder too).
        post = dict(spare)
        for lsp in victims:
            for lender, amount in lsp.breakdown.items():
                post[lender] += amount

        available = sum(post[l] for l in order)
        if available < bandwidth:
            self.counters._bump("blocked", class_index)
            self.events.append(Event(now, "block", None, class_index, bandwidth))
            return AdmissionDecision(Outcome.BLOCKED), None

        # Commit: tear down victims, then place the breakdown.
        victim_tags: list[tuple[int, VictimKind]] = []
        for lsp in victims:
            kind = (
                VictimKind.PREEMPTED
                if self.rank(lsp.class_index) < self.rank(class_index)
                else VictimKind.DEVOLVED
            )
            self._remove(lsp)
            self.counters._bump(
                "preempted" if kind is VictimKind.PREEMPTED else "devolved",
                lsp.class_index,
            )
            self.events.append(
                Event(now, kind.value, lsp.lsp_id, lsp.class_index, lsp.bandwidth,
                      detail=f"reclaimed by class {class_index}")
            )
            victim_tags.append((lsp.lsp_id, kind))

        breakdown: dict[int, int] = {}
        remaining = bandwidth
        for lender in order:
            if remaining == 0:
                break
            take = min(remaining, self.bc(lender) - self.used[lender])
            if take > 0:
                breakdown[lender] = take
                self.used[lender] += take
                remaining -= take
        assert remaining == 0

        record = LspRecord(
            lsp_id=self._next_id,
            class_index=class_index,
            bandwidth=bandwidth,
            arrival_time=now,
            holding_time=holding_time,
            breakdown=breakdown,
            seq=self._next_seq,
        )
        self._next_id += 1
        self._next_seq += 1
        self.active[record.lsp_id] = record
        for lender in breakdown:
            if lender != class_index:
                self._borrowers[lender].add(record.lsp_id)
        self.counters._bump("established", class_index)
        self.events.append(Event(now, "admit", record.lsp_id, class_index, bandwidth))
        if self.debug:
            self.check_ledger()
        return AdmissionDecision(Outcome.ACCEPTED, dict(breakdown), tuple(victim_tags)), record

    def release(self, lsp_id: int, completed: bool, now: float = 0.0) -> None:
        """Return an LSP's bandwidth to its lenders; count it unbroken if it completed."""
        lsp = self.active.get(lsp_id)
        if lsp is None:
            self.events.append(Event(now, "warning", lsp_id, detail="release of unknown lsp"))
            return
        self._remove(lsp)
        if completed:
            self.counters._bump("unbroken", lsp.class_index)
        self.events.append(Event(now, "release", lsp_id, lsp.class_index, lsp.bandwidth))
        if self.debug:
            self.check_ledger()

    def reconfigure(self, model: Model | str, now: float = 0.0,
                    matrix: SharingMatrix | None = None) -> None:
        """Swap the sharing matrix; existing LSPs keep their grandfathered breakdowns."""
        model = Model(model)
        if matrix is None:
            matrix = make_model_matrix(model, self.classes)
        if matrix.size != len(self.classes):
            raise ConfigurationError("sharing matrix size must match the number of classes")
        self.matrix = matrix
        self.active_model = model
        self.events.append(Event(now, "reconfigure", detail=model.value))

    def _remove(self, lsp: LspRecord) -> None:
        for lender, amount in lsp.breakdown.items():
            self.used[lender] -= amount
            self._borrowers[lender].discard(lsp.lsp_id)
        del self.active[lsp.lsp_id]

    # -- measurements ------------------------------------------------------

    def utilization(self) -> tuple[float, dict[int, float]]:
        """Instantaneous (total, per-BC) utilization."""
        per_class = {c.index: self.used[c.index] / c.bc for c in self.classes}
        return self.total_used() / self.capacity, per_class
