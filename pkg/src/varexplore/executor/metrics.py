"""Computational-performance metrics from a range-query monitoring server.

The client speaks the Prometheus HTTP range-query API::

    GET <url>/api/v1/query_range?query=<expr>&start=<t0>&end=<t1>&step=<seconds>

    {"status": "success",
     "data": {"resultType": "matrix",
              "result": [{"metric": {...}, "values": [[<ts>, "<value>"], ...]}]}}

``start`` is placed so that the inclusive range holds exactly
``window / step`` samples (8640 for 24 h at 10 s).

Metrics CSV layout::

    metric,timestamp,value
    cpu,1700000000.0,0.5
    ...
    #agg,metric,min,max,mean,std
    #agg,cpu,0.5,1.5,1.0,0.408...
"""
from __future__ import annotations

import csv
import json
import math
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import MalformedResponse, MonitorUnreachable

METRICS = ("cpu", "memory", "io")

DEFAULT_QUERIES = {
    "cpu": 'sum(rate(container_cpu_usage_seconds_total{{pod=~"{pod}"}}[1m]))',
    "memory": 'sum(container_memory_working_set_bytes{{pod=~"{pod}"}})',
    "io": ('sum(rate(container_fs_reads_bytes_total{{pod=~"{pod}"}}[1m]))'
           ' + sum(rate(container_fs_writes_bytes_total{{pod=~"{pod}"}}[1m]))'),
}

DEFAULT_WINDOW = 24 * 3600.0
DEFAULT_STEP = 10.0

AGG_HEADER = ["#agg", "metric", "min", "max", "mean", "std"]


@dataclass
class MetricsSeries:
    metric: str
    timestamps: list[float]
    values: list[float]

    def __post_init__(self):
        self.timestamps = [float(t) for t in self.timestamps]
        self.values = [float(v) for v in self.values]
        if len(self.timestamps) != len(self.values):
            raise MalformedResponse(f"{self.metric}: timestamp/value length mismatch")
        steps = np.diff(self.timestamps)
        if len(steps) and (np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=0, atol=1e-6)):
            raise MalformedResponse(f"{self.metric}: samples are not on a constant increasing step")

    @property
    def aggregates(self) -> dict[str, float]:
        if not self.values:
            return {k: math.nan for k in ("min", "max", "mean", "std")}
        v = np.asarray(self.values)
        return {"min": float(v.min()), "max": float(v.max()), "mean": float(v.mean()), "std": float(v.std())}


def expected_samples(window: float, step: float) -> int:
    return int(round(window / step))


def range_query_params(query: str, end: float, window: float = DEFAULT_WINDOW,
                       step: float = DEFAULT_STEP) -> dict[str, str]:
    n = expected_samples(window, step)
    start = end - (n - 1) * step
    return {"query": query, "start": repr(float(start)), "end": repr(float(end)), "step": repr(float(step))}


def parse_matrix(doc) -> tuple[list[float], list[float]]:
    try:
        if doc["status"] != "success":
            raise MalformedResponse(f"monitor reported status {doc['status']!r}")
        data = doc["data"]
        if data["resultType"] != "matrix":
            raise MalformedResponse(f"expected a matrix result, got {data['resultType']!r}")
        result = data["result"]
        if not result:
            return [], []
        # queries aggregate with sum(); several series here means a selector mismatch, so add them up
        merged: dict[float, float] = {}
        for series in result:
            for ts, val in series["values"]:
                merged[float(ts)] = merged.get(float(ts), 0.0) + float(val)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedResponse(f"unexpected monitor response shape: {exc!r}") from None
    ts = sorted(merged)
    return ts, [merged[t] for t in ts]


def scrape_metrics(monitor_url: str, window: float = DEFAULT_WINDOW, step: float = DEFAULT_STEP,
                   pod_selector: str = ".*", end: float | None = None,
                   queries: Mapping[str, str] | None = None, timeout: float = 10.0) -> list[MetricsSeries]:
    """Fetch cpu, memory and io series for ``pod_selector`` over the trailing window."""
    import time

    queries = dict(queries or DEFAULT_QUERIES)
    end = time.time() if end is None else float(end)
    out = []
    for metric in METRICS:
        params = range_query_params(queries[metric].format(pod=pod_selector), end, window, step)
        url = f"{monitor_url.rstrip('/')}/api/v1/query_range?{urllib.parse.urlencode(params)}"
        try:
            with urllib.request.urlopen(url, timeout=timeout) as resp:
                doc = json.loads(resp.read())
        except urllib.error.HTTPError as exc:
            raise MalformedResponse(f"monitor answered HTTP {exc.code} for {metric}") from None
        except (urllib.error.URLError, ConnectionError, TimeoutError, OSError) as exc:
            raise MonitorUnreachable(f"monitor at {monitor_url} unreachable: {exc}") from None
        except ValueError as exc:
            raise MalformedResponse(f"monitor sent invalid JSON: {exc}") from None
        ts, vals = parse_matrix(doc)
        out.append(MetricsSeries(metric, ts, vals))
    return out


def write_metrics_csv(series: Sequence[MetricsSeries], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "timestamp", "value"])
        for s in series:
            for t, v in zip(s.timestamps, s.values):
                w.writerow([s.metric, repr(t), repr(v)])
        w.writerow(AGG_HEADER)
        for s in series:
            agg = s.aggregates
            w.writerow(["#agg", s.metric] + [repr(agg[k]) for k in ("min", "max", "mean", "std")])
    return path


def read_metrics_csv(path) -> tuple[list[MetricsSeries], dict[str, dict[str, float]]]:
    samples: dict[str, tuple[list, list]] = {}
    aggregates: dict[str, dict[str, float]] = {}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    for row in rows[1:]:
        if row[0] == "#agg":
            if row == AGG_HEADER:
                continue
            aggregates[row[1]] = dict(zip(("min", "max", "mean", "std"), map(float, row[2:6])))
        else:
            ts, vs = samples.setdefault(row[0], ([], []))
            ts.append(float(row[1]))
            vs.append(float(row[2]))
    for name in aggregates:
        samples.setdefault(name, ([], []))
    return [MetricsSeries(m, ts, vs) for m, (ts, vs) in samples.items()], aggregates


def aggregate_attrs(series: Sequence[MetricsSeries]) -> dict[str, str]:
    """Flat ``<metric>_<agg>`` user attributes, e.g. ``memory_max``."""
    attrs = {}
    for s in series:
        for k, v in s.aggregates.items():
            attrs[f"{s.metric}_{k}"] = repr(v)
    return attrs


PERF_METRIC_NAMES = tuple(f"{m}_{a}" for m in METRICS for a in ("min", "max", "mean", "std"))
