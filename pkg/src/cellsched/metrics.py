"""Prometheus counters for solver activity."""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock
from typing import Any

from prometheus_client import (
    CollectorRegistry,
    Counter,
    Histogram,
    generate_latest,
    write_to_textfile,
)

SOLVE_DURATION_BUCKETS_S = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 60.0, 300.0)


@dataclass(eq=False)
class MetricsDelta:
    """Increments recorded in one process, shipped back to the parent."""

    counters: dict[str, float] = field(default_factory=dict)
    solves: list[tuple[str, str, float]] = field(default_factory=list)


class SolverMetrics(Mapping[str, Any]):
    """Wrap Prometheus collectors while keeping a readable snapshot for tests."""

    def __init__(self) -> None:
        self.registry = CollectorRegistry()
        self._lock = Lock()
        self._snapshot: dict[str, Any] = {
            "lp_solves_total": 0,
            "pricing_rounds_total": 0,
            "columns_added_total": 0,
            "solve_seconds_sum": 0.0,
            "solve_seconds_count": 0,
            "solves_total": {},
        }
        self._counters = {
            "lp_solves_total": Counter(
                "cellsched_lp_solves",
                "Total dense simplex solves.",
                registry=self.registry,
            ),
            "pricing_rounds_total": Counter(
                "cellsched_pricing_rounds",
                "Total column generation pricing rounds.",
                registry=self.registry,
            ),
            "columns_added_total": Counter(
                "cellsched_columns_added",
                "Total columns appended to restricted master problems.",
                registry=self.registry,
            ),
        }
        self._solve_seconds = Histogram(
            "cellsched_solve_seconds",
            "Wall time of finished algorithm runs in seconds.",
            buckets=SOLVE_DURATION_BUCKETS_S,
            registry=self.registry,
        )
        self._solves = Counter(
            "cellsched_solves",
            "Finished algorithm runs by algorithm and termination reason.",
            labelnames=("algorithm", "termination"),
            registry=self.registry,
        )
        self._recorders: list[MetricsDelta] = []

    def inc(self, key: str, amount: int | float = 1) -> None:
        metric = self._counters[key]
        with self._lock:
            metric.inc(amount)
            self._snapshot[key] += amount
            for delta in self._recorders:
                delta.counters[key] = delta.counters.get(key, 0) + amount

    def record_solve(self, *, algorithm: str, termination: str, seconds: float) -> None:
        key = (algorithm, termination)
        with self._lock:
            self._solves.labels(algorithm=algorithm, termination=termination).inc()
            self._solve_seconds.observe(seconds)
            self._snapshot["solve_seconds_sum"] += seconds
            self._snapshot["solve_seconds_count"] += 1
            solves: dict[tuple[str, str], int] = self._snapshot["solves_total"]
            solves[key] = solves.get(key, 0) + 1
            for delta in self._recorders:
                delta.solves.append((algorithm, termination, seconds))

    @contextmanager
    def recording(self) -> Iterator[MetricsDelta]:
        """Collect every increment made inside the block."""
        delta = MetricsDelta()
        with self._lock:
            self._recorders.append(delta)
        try:
            yield delta
        finally:
            with self._lock:
                self._recorders.remove(delta)

    def merge(self, delta: MetricsDelta) -> None:
        """Apply increments recorded by a worker process."""
        for key, amount in delta.counters.items():
            self.inc(key, amount)
        for algorithm, termination, seconds in delta.solves:
            self.record_solve(algorithm=algorithm, termination=termination, seconds=seconds)

    def render(self) -> str:
        return generate_latest(self.registry).decode("utf-8")

    def write_textfile(self, path: str | Path) -> None:
        """Export in the node-exporter textfile format."""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        write_to_textfile(str(target), self.registry)

    def __getitem__(self, key: str) -> Any:
        value = self._snapshot[key]
        if isinstance(value, dict):
            return dict(value)
        return value

    def __iter__(self) -> Iterator[str]:
        return iter(self._snapshot)

    def __len__(self) -> int:
        return len(self._snapshot)


_metrics: SolverMetrics | None = None
_metrics_lock = Lock()


def get_metrics() -> SolverMetrics:
    global _metrics
    with _metrics_lock:
        if _metrics is None:
            _metrics = SolverMetrics()
        return _metrics
