"""
Locating an emission source from sensor records
===============================================

A reference plume is simulated from a known source; five agents sharing one
study then search the domain for the source location that best reproduces
the 20 sensor series.  Run with ``python demos/source_calibration.py``.
"""

# %%
import sys
import tempfile
from pathlib import Path

import numpy as np

from varexplore import report
from varexplore.driver import run_study
from varexplore.trialstore import MemoryStore

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 60
out = Path(sys.argv[2]) if len(sys.argv) > 2 else Path(tempfile.mkdtemp(prefix="calibration-"))

# %% The payload: two ranges to explore, the rest fixed
payload = {
    "workflow_type": "pompy",
    "workflow_options": {
        "source_x": [0.0, 100.0],
        "source_y": [0.0, 50.0],
        "truth_x": 30.0, "truth_y": 20.0,
        "wind_u": 1.5, "wind_v": 0.3, "wind_noise": 0.0, "diffusion": 2.0,
    },
    "variational_options": {
        "study_kind": "calibration",
        "num_studies": 5,
        "num_episodes": episodes,
        "study_name": "pompy-calibration",
        "sampler_type": "NSGAIISampler",
        "metric_to_optimize": ["rmse"],
        "directions": ["minimize"],
    },
}

# %% Run the agents
store = MemoryStore()
[result] = run_study(payload, store, staging_dir=out / "staging")
best = result.best[0]
print(f"{result.trial_count} trials in {result.wall_time:.1f}s")
print(f"best source estimate: ({best.params['source_x']:.2f}, {best.params['source_y']:.2f})"
      f"  mean RMSE {best.values[0]:.3g}")
print(f"distance to truth: {np.hypot(best.params['source_x'] - 30, best.params['source_y'] - 20):.2f}")

# %% Convergence per agent
study, trials = store.get_study("pompy-calibration"), store.list_trials("pompy-calibration")
rows = report.convergence_rows(study, trials)
for n in (10, 50, 100, 200, len(rows)):
    if n <= len(rows):
        print(f"after {n:4d} completions best RMSE = {rows[n - 1][4]:.4g}")
files = report.export_study(store, result, out)
try:
    files["convergence"] = report.plot_convergence_svg(study, trials, out / "convergence.svg")
except RuntimeError as exc:
    print(exc)
for kind, path in files.items():
    print(f"{kind}: {path}")
