"""Window-scoped network measurements.

A Measurements value is the per-window snapshot fed to the policy engine,
the reasoning cycle, and reports: utilization (of the link and of each
class's BC), event counts for the window, and the per-class offered-load
estimate used by the traffic-profile guard.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bam import Link, MetricCounters


@dataclass(frozen=True)
class Measurements:
    window_id: int
    t_start: float
    t_end: float
    util_total: float
    util_per_class: tuple[float, ...]
    arrivals: int
    arrivals_per_class: tuple[int, ...]
    established: int
    blocked: int
    preempted: int
    devolved: int
    unbroken: int
    offered_per_class: tuple[float, ...]  # arrival count x mean demand, Mbps

    @property
    def blocking_ratio(self) -> float:
        return self.blocked / self.arrivals if self.arrivals else 0.0

    @property
    def preemption_ratio(self) -> float:
        return self.preempted / self.arrivals if self.arrivals else 0.0

    @property
    def devolution_ratio(self) -> float:
        return self.devolved / self.arrivals if self.arrivals else 0.0

    def as_dict(self) -> dict:
        return {
            "window_id": self.window_id,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "util_total": self.util_total,
            "util_per_class": list(self.util_per_class),
            "arrivals": self.arrivals,
            "arrivals_per_class": list(self.arrivals_per_class),
            "established": self.established,
            "blocked": self.blocked,
            "preempted": self.preempted,
            "devolved": self.devolved,
            "unbroken": self.unbroken,
            "offered_per_class": list(self.offered_per_class),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Measurements":
        return cls(
            window_id=data["window_id"],
            t_start=data["t_start"],
            t_end=data["t_end"],
            util_total=data["util_total"],
            util_per_class=tuple(data["util_per_class"]),
            arrivals=data["arrivals"],
            arrivals_per_class=tuple(data["arrivals_per_class"]),
            established=data["established"],
            blocked=data["blocked"],
            preempted=data["preempted"],
            devolved=data["devolved"],
            unbroken=data["unbroken"],
            offered_per_class=tuple(data["offered_per_class"]),
        )


def snapshot_measurements(link: Link, window_counters: MetricCounters,
                          window_id: int = 0, t_start: float = 0.0,
                          t_end: float = 0.0, arrivals_per_class: tuple[int, ...] = (),
                          mean_demand: float = 0.0) -> Measurements:
    """Pure read of the link's instantaneous state plus current-window tallies."""
    util_total, per_class = link.utilization()
    n = len(link.classes)
    arrivals_per_class = arrivals_per_class or tuple(0 for _ in range(n))
    return Measurements(
        window_id=window_id,
        t_start=t_start,
        t_end=t_end,
        util_total=util_total,
        util_per_class=tuple(per_class[i] for i in range(n)),
        arrivals=sum(arrivals_per_class),
        arrivals_per_class=arrivals_per_class,
        established=window_counters.established,
        blocked=window_counters.blocked,
        preempted=window_counters.preempted,
        devolved=window_counters.devolved,
        unbroken=window_counters.unbroken,
        offered_per_class=tuple(a * mean_demand for a in arrivals_per_class),
    )


@dataclass
class WindowAccumulator:
    """Builds a Measurements per tumbling window from ledger changes.

    Utilization is time-averaged: the integrals advance on every ledger
    change, so the window value reflects the whole interval rather than a
    single instant.
    """

    link: Link
    window_seconds: float
    mean_demand: float
    window_id: int = 0
    t_start: float = 0.0
    _last_t: float = 0.0
    _integral_total: float = 0.0
    _integral_per_class: dict[int, float] = field(default_factory=dict)
    _arrivals: dict[int, int] = field(default_factory=dict)
    _base: MetricCounters = field(default_factory=MetricCounters)

    def __post_init__(self) -> None:
        self._integral_per_class = {c.index: 0.0 for c in self.link.classes}
        self._arrivals = {c.index: 0 for c in self.link.classes}
        self._base = self.link.counters.copy()
        self._last_t = self.t_start

    def advance(self, now: float) -> None:
        dt = now - self._last_t
        if dt > 0:
            self._integral_total += self.link.total_used() * dt
            for c in self.link.classes:
                self._integral_per_class[c.index] += self.link.used[c.index] * dt
            self._last_t = now

    def record_arrival(self, class_index: int) -> None:
        self._arrivals[class_index] += 1

    def close(self, now: float) -> Measurements:
        """Finalize the current window and reset for the next one."""
        self.advance(now)
        span = max(now - self.t_start, 1e-12)
        cur = self.link.counters
        n = len(self.link.classes)
        arrivals = tuple(self._arrivals[i] for i in range(n))
        m = Measurements(
            window_id=self.window_id,
            t_start=self.t_start,
            t_end=now,
            util_total=self._integral_total / span / self.link.capacity,
            util_per_class=tuple(
                self._integral_per_class[i] / span / self.link.bc(i) for i in range(n)
            ),
            arrivals=sum(arrivals),
            arrivals_per_class=arrivals,
            established=cur.established - self._base.established,
            blocked=cur.blocked - self._base.blocked,
            preempted=cur.preempted - self._base.preempted,
            devolved=cur.devolved - self._base.devolved,
            unbroken=cur.unbroken - self._base.unbroken,
            offered_per_class=tuple(a * self.mean_demand for a in arrivals),
        )
        self.window_id += 1
        self.t_start = now
        self._last_t = now
        self._integral_total = 0.0
        self._integral_per_class = {c.index: 0.0 for c in self.link.classes}
        self._arrivals = {c.index: 0 for c in self.link.classes}
        self._base = cur.copy()
        return m
