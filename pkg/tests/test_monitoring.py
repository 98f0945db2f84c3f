import logging

import pytest

from sparsity_bounds.services.monitoring import (
    ExecutionMetrics,
    MonitoringService,
    StageTimer,
    configure_logging,
    monitoring_service,
)


def test_configure_logging_sets_the_level():
    configure_logging(level="warning", json=True)
    assert logging.getLogger().level == logging.WARNING
    configure_logging(level="INFO", json=False)


def test_configure_logging_rejects_unknown_level():
    with pytest.raises(ValueError):
        configure_logging(level="chatty")


class TestExecutionMetrics:
    def test_stage_totals(self):
        metrics = ExecutionMetrics(run_id="r1", command="bounds", start_time=0.0)
        metrics.add_stage_metrics("curves", 0.5, items=10, failures=2)
        metrics.add_stage_metrics("export", 0.1, items=3)
        assert metrics.get_total_items() == 13
        assert metrics.failures == 2
        metrics.finish(error="boom")
        summary = metrics.to_dict()
        assert summary["error"] == "boom"
        assert summary["duration_seconds"] > 0.0
        assert set(summary["stage_metrics"]) == {"curves", "export"}


class TestMonitoringService:
    def test_lifecycle(self):
        service = MonitoringService()
        metrics = service.start_execution("simulate", run_id="abc")
        service.add_stage_metrics("abc", "trials", 1.0, items=5)
        assert service.get_execution_summary("abc")["total_items"] == 5
        finished = service.finish_execution("abc")
        assert finished is metrics
        assert finished.duration_seconds is not None
        assert service.get_execution_summary("abc") is None

    def test_unknown_run(self):
        assert MonitoringService().finish_execution("missing") is None

    def test_stage_timer_reports_to_the_global_service(self):
        metrics = monitoring_service.start_execution("figures")
        with StageTimer(metrics, "fig3") as stage:
            stage.items = 4
            stage.failures = 1
        assert metrics.stage_metrics["fig3"]["items"] == 4
        assert metrics.failures == 1
        monitoring_service.finish_execution(metrics.run_id)
