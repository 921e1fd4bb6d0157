"""
Run monitoring for CLI commands: stage timings, point-status counts and memory.
"""
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterator, Sequence

import psutil

from curvature import PointRecord, status_counts
from logging_config import log_stage

logger = logging.getLogger(__name__)


@dataclass
class RunMetrics:
    """Counters for one CLI invocation."""
    command: str = ""
    points_processed: int = 0
    points_ok: int = 0
    status_counts: Dict[str, int] = field(default_factory=dict)
    stage_durations: Dict[str, float] = field(default_factory=dict)
    peak_rss_mb: float = 0.0
    elapsed_seconds: float = 0.0


class RunMonitor:
    """Collects RunMetrics while a command runs and logs a summary at the end."""

    def __init__(self, command: str):
        self.metrics = RunMetrics(command=command)
        self.start_time = time.perf_counter()
        self._process = psutil.Process(os.getpid())

    def sample_memory(self) -> float:
        """Current resident set size in MB; the peak is kept in the metrics"""
        try:
            rss_mb = self._process.memory_info().rss / 1024 / 1024
        except psutil.Error as e:
            logger.debug(f"Memory sample failed: {e}")
            return self.metrics.peak_rss_mb
        self.metrics.peak_rss_mb = max(self.metrics.peak_rss_mb, rss_mb)
        return rss_mb

    @contextmanager
    def stage(self, name: str, **details: Any) -> Iterator[None]:
        """Time a pipeline stage and log it on exit (also when it raises)"""
        started = time.perf_counter()
        try:
            yield
        finally:
            duration = time.perf_counter() - started
            self.metrics.stage_durations[name] = self.metrics.stage_durations.get(name, 0.0) + duration
            rss_mb = self.sample_memory()
            log_stage(logger, name, duration, command=self.metrics.command,
                      rss_mb=round(rss_mb, 1), **details)

    def record_records(self, records: Sequence[PointRecord]):
        """Accumulate per-point outcomes"""
        self.metrics.points_processed += len(records)
        self.metrics.points_ok += sum(1 for r in records if r.ok)
        for status, count in status_counts(records).items():
            self.metrics.status_counts[status] = self.metrics.status_counts.get(status, 0) + count

    def summary(self) -> Dict[str, Any]:
        self.metrics.elapsed_seconds = time.perf_counter() - self.start_time
        return asdict(self.metrics)

    def log_summary(self):
        """Log the final metrics of the run."""
        summary = self.summary()
        failed = summary["points_processed"] - summary["points_ok"]
        logger.info(
            f"Command {summary['command']} finished: {summary['points_ok']} points ok, {failed} failed",
            extra={
                "command": summary["command"],
                "n_points": summary["points_processed"],
                "duration_ms": round(summary["elapsed_seconds"] * 1000, 3),
                "rss_mb": round(summary["peak_rss_mb"], 1),
            }
        )
