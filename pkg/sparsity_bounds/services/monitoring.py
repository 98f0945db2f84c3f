"""Logging setup and run metrics for bound sweeps and simulations."""

import logging
import sys
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, Optional

import structlog

from sparsity_bounds.config import settings


def configure_logging(level: Optional[str] = None, json: Optional[bool] = None) -> None:
    """Route structlog events to stderr, as console lines or JSON lines."""
    level_name = (level or settings.log_level).upper()
    numeric_level = getattr(logging, level_name, None)
    if not isinstance(numeric_level, int):
        raise ValueError(f"unknown log level {level!r}")
    use_json = settings.log_json if json is None else json

    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=numeric_level, force=True)
    renderer = structlog.processors.JSONRenderer() if use_json else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )


@dataclass
class ExecutionMetrics:
    """Timing and counts of one CLI command."""
    run_id: str
    command: str
    start_time: float
    end_time: Optional[float] = None
    duration_seconds: Optional[float] = None
    stage_metrics: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    failures: int = 0
    error: Optional[str] = None

    def finish(self, error: Optional[str] = None):
        """Mark the run as finished and compute its duration."""
        self.end_time = time.time()
        self.duration_seconds = self.end_time - self.start_time
        self.error = error

    def add_stage_metrics(self, stage: str, duration: float, items: int = 0, failures: int = 0):
        """Record one stage, e.g. a curve or a batch of trials."""
        self.stage_metrics[stage] = {
            "duration_seconds": duration,
            "items": items,
            "failures": failures,
            "timestamp": datetime.now().isoformat(),
        }
        self.failures += failures

    def get_total_items(self) -> int:
        return sum(stage["items"] for stage in self.stage_metrics.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "run_id": self.run_id,
            "command": self.command,
            "duration_seconds": self.duration_seconds,
            "total_items": self.get_total_items(),
            "failures": self.failures,
            "stage_metrics": self.stage_metrics,
            "error": self.error,
        }


class MonitoringService:
    """Tracks active runs and logs their metrics when they finish."""

    def __init__(self):
        self.logger = structlog.get_logger("monitoring")
        self.active_executions: Dict[str, ExecutionMetrics] = {}

    def start_execution(self, command: str, run_id: Optional[str] = None) -> ExecutionMetrics:
        run_id = run_id or uuid.uuid4().hex[:12]
        metrics = ExecutionMetrics(run_id=run_id, command=command, start_time=time.time())
        self.active_executions[run_id] = metrics
        self.logger.info("execution_started", run_id=run_id, command=command)
        return metrics

    def add_stage_metrics(self, run_id: str, stage: str, duration: float, items: int = 0, failures: int = 0):
        if run_id in self.active_executions:
            self.active_executions[run_id].add_stage_metrics(stage, duration, items, failures)

    def finish_execution(self, run_id: str, error: Optional[str] = None) -> Optional[ExecutionMetrics]:
        if run_id not in self.active_executions:
            self.logger.warning("execution_unknown", run_id=run_id)
            return None
        metrics = self.active_executions.pop(run_id)
        metrics.finish(error)
        self._log_execution_metrics(metrics)
        return metrics

    def _log_execution_metrics(self, metrics: ExecutionMetrics):
        if metrics.error:
            self.logger.error("execution_failed", run_id=metrics.run_id, command=metrics.command, error=metrics.error)
        else:
            self.logger.info("execution_completed", run_id=metrics.run_id, command=metrics.command)
        self.logger.info(
            "execution_metrics",
            run_id=metrics.run_id,
            duration_seconds=round(metrics.duration_seconds or 0.0, 3),
            total_items=metrics.get_total_items(),
            failures=metrics.failures,
        )
        for stage, stage_metrics in metrics.stage_metrics.items():
            self.logger.debug("stage_metrics", run_id=metrics.run_id, stage=stage, **stage_metrics)

    def get_execution_summary(self, run_id: str) -> Optional[Dict[str, Any]]:
        if run_id in self.active_executions:
            return self.active_executions[run_id].to_dict()
        return None


class StageTimer:
    """Context manager that reports one stage's duration to the monitoring service."""

    def __init__(self, metrics: ExecutionMetrics, stage: str):
        self.metrics = metrics
        self.stage = stage
        self.items = 0
        self.failures = 0
        self._start = 0.0

    def __enter__(self) -> "StageTimer":
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        monitoring_service.add_stage_metrics(
            self.metrics.run_id, self.stage, time.perf_counter() - self._start, self.items, self.failures
        )
        return False


# Global monitoring service instance
monitoring_service = MonitoringService()
