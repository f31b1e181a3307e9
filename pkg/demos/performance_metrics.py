"""
Scraping performance metrics for each trial
===========================================

Trials can be scored on what they cost to run.  After each workflow run the
driver asks a monitoring server for CPU, memory and I/O series, writes them
to ``metrics.csv`` in the trial's staging directory and attaches the
aggregates to the trial.  Here a bundled mock server stands in for the
cluster monitor, and peak memory is minimised next to the model output.
"""

# %%
import sys
import tempfile
from pathlib import Path

from varexplore.driver import run_study
from varexplore.executor.metrics import read_metrics_csv
from varexplore.executor.mockmonitor import MockMonitor
from varexplore.trialstore import MemoryStore

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="metrics-"))

# %% Mock monitor synthesising one sample every 10 s over the requested window
with MockMonitor() as monitor:
    payload = {
        "workflow_type": "sphere",
        "workflow_options": {"x": [-2.0, 2.0], "y": [-2.0, 2.0]},
        "variational_options": {
            "num_studies": 2, "num_episodes": 5, "study_name": "perf",
            "metric_to_optimize": ["value", "memory_max"], "directions": ["minimize", "minimize"],
            "sampler_type": "NSGAIISampler",
            "monitor": {"url": monitor.url, "window": 3600, "step": 10},
        },
    }
    store = MemoryStore()
    [result] = run_study(payload, store, staging_dir=out)
    print(f"{len(monitor.requests)} range queries sent, e.g. {monitor.requests[0]['query']}")

# %% Per-trial attributes and the CSV written next to the artifacts
trial = store.list_trials("perf")[0]
print({k: v for k, v in trial.user_attrs.items() if k.startswith("memory")})
series, aggregates = read_metrics_csv(out / "perf" / "trial-000000" / "metrics.csv")
for s in series:
    print(f"{s.metric:7s} {len(s.values)} samples, max {aggregates[s.metric]['max']:.4g}")
print(f"Pareto set size: {len(result.best)}")
