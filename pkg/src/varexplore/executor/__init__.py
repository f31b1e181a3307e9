"""Workflow graphs, the built-in workflows and performance-metric scraping."""
from .builtins import builtin_workflows
from .graph import Staging, Step, WorkflowGraph, compose, run
from .metrics import (
    METRICS,
    PERF_METRIC_NAMES,
    MetricsSeries,
    aggregate_attrs,
    expected_samples,
    read_metrics_csv,
    scrape_metrics,
    write_metrics_csv,
)
from .registry import WorkflowRegistry, default_registry, lookup, register_workflow

__all__ = [
    "METRICS", "PERF_METRIC_NAMES", "MetricsSeries", "Staging", "Step", "WorkflowGraph",
    "WorkflowRegistry", "aggregate_attrs", "builtin_workflows", "compose", "default_registry",
    "expected_samples", "lookup", "read_metrics_csv", "register_workflow", "run", "scrape_metrics",
    "write_metrics_csv",
]
