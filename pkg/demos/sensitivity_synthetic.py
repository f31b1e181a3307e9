"""
Which inputs drive peak memory?
===============================

Random sampling of a 13-input synthetic cost model, with first-order fANOVA
importances recomputed after every 20 completed trials.  The final ranking
should put the two location inputs first and the five puff-splitting inputs
near the bottom.
"""

# %%
import sys
import tempfile
from pathlib import Path

from varexplore import report
from varexplore.driver import run_study
from varexplore.executor.builtins import SYNTHETIC_COST_RANGES
from varexplore.trialstore import MemoryStore

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 100
out = Path(sys.argv[2]) if len(sys.argv) > 2 else Path(tempfile.mkdtemp(prefix="sensitivity-"))

payload = {
    "workflow_type": "synthetic-cost-13d",
    "workflow_options": {k: list(v) for k, v in SYNTHETIC_COST_RANGES.items()},
    "variational_options": {
        "study_kind": "sensitivity",
        "num_studies": 4,
        "num_episodes": episodes,
        "study_name": "udm-memory",
        "metric_to_optimize": ["peak_memory"],
        "fanova_config": {"n_trees": 32},
    },
}

# %% Run and watch the importances settle
store = MemoryStore()
[result] = run_study(payload, store, staging_dir=out / "staging")
history = result.importance_reports()
for rep in history[:: max(1, len(history) // 5)] + history[-1:]:
    top = ", ".join(f"{k}={v:.2f}" for k, v in rep.entries[:3])
    print(f"{rep.trial_count:5d} trials: {top}")

# %% Final ranking
print()
for rank, (name, value) in enumerate(history[-1].entries, 1):
    print(f"{rank:2d}. {name:24s} {value:.4f}")

study = store.get_study("udm-memory")
print(report.write_snapshots_csv(study, out / "importances.csv"))
try:
    print(report.plot_importances_svg(study, out / "importances.svg"))
except RuntimeError as exc:
    print(exc)
