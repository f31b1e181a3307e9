"""CSV/JSON exports of studies and their readers, plus optional SVG plots.

Files written for a study:

* trials CSV       ``trial_id,agent_id,state,seq,params_<name>...,values_<metric>...,fail_reason``
* snapshots CSV    ``trial_count,objective_index,metric,degenerate,<param>...`` one row per
                   (snapshot, objective); this is also the ``importances`` report
* convergence CSV  ``seq,trial_id,agent_id,value,best_so_far`` over Complete trials in
                   completion order, for one objective
* pareto CSV       ``trial_id,agent_id,values_<metric>...,params_<name>...`` for the best set
* report JSON      :meth:`StudyResult.to_dict`

Timestamps are left out of the CSVs so that reruns with the same seed
produce identical files.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

from .driver import StudyResult
from .pareto import MAXIMIZE
from .trialstore import StoreBackend, Trial, TrialState, best_trials
from .trialstore.model import Study


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(v: str):
    if v == "":
        return None
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def _write(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _read(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# -- trials -------------------------------------------------------------------

def write_trials_csv(study: Study, trials: Sequence[Trial], path) -> Path:
    names = study.space.names
    header = (["trial_id", "agent_id", "state", "seq"] + [f"params_{n}" for n in names]
              + [f"values_{m}" for m in study.metric_names] + ["fail_reason"])
    rows = []
    for t in sorted(trials, key=lambda t: t.trial_id):
        vals = t.values if t.values is not None else [None] * len(study.metric_names)
        rows.append([t.trial_id, t.agent_id, t.state.value, t.seq] + [t.params.get(n) for n in names]
                    + list(vals) + [t.fail_reason])
    return _write(path, header, rows)


def read_trials_csv(path) -> list[dict]:
    """Rows as dicts with numbers parsed; ``params_*`` and ``values_*`` grouped."""
    out = []
    for row in _read(path):
        out.append({
            "trial_id": row["trial_id"], "agent_id": row["agent_id"], "state": row["state"],
            "seq": row["seq"], "fail_reason": row["fail_reason"],
            "params": {k[7:]: v for k, v in row.items() if k.startswith("params_")},
            "values": {k[7:]: v for k, v in row.items() if k.startswith("values_")},
        })
    return out


# -- snapshots / importances --------------------------------------------------

def write_snapshots_csv(study: Study, path) -> Path:
    names = study.space.names
    header = ["trial_count", "objective_index", "metric", "degenerate"] + names
    rows = []
    for snap in study.attr_snapshots:
        for rep in snap.reports:
            imp = rep["importances"]
            rows.append([snap.trial_count, rep["objective_index"], rep.get("metric"),
                         int(bool(rep.get("degenerate")))] + [float(imp[n]) for n in names])
    return _write(path, header, rows)


def read_snapshots_csv(path) -> list[dict]:
    out = []
    for row in _read(path):
        fixed = {"trial_count", "objective_index", "metric", "degenerate"}
        out.append({
            "trial_count": row["trial_count"], "objective_index": row["objective_index"],
            "metric": row["metric"], "degenerate": bool(row["degenerate"]),
            "importances": {k: float(v) for k, v in row.items() if k not in fixed},
        })
    return out


# -- convergence ----------------------------------------------------------------

def convergence_rows(study: Study, trials: Sequence[Trial], objective_index: int = 0) -> list[list]:
    done = sorted((t for t in trials if t.state is TrialState.COMPLETE), key=lambda t: t.seq)
    maximize = study.directions[objective_index] == MAXIMIZE
    best = -math.inf if maximize else math.inf
    rows = []
    for t in done:
        v = t.values[objective_index]
        best = max(best, v) if maximize else min(best, v)
        rows.append([t.seq, t.trial_id, t.agent_id, v, best])
    return rows


def write_convergence_csv(study: Study, trials: Sequence[Trial], path, objective_index: int = 0) -> Path:
    return _write(path, ["seq", "trial_id", "agent_id", "value", "best_so_far"],
                  convergence_rows(study, trials, objective_index))


def read_convergence_csv(path) -> list[dict]:
    return _read(path)


# -- pareto -------------------------------------------------------------------

def write_pareto_csv(study: Study, trials: Sequence[Trial], path) -> Path:
    names = study.space.names
    front = best_trials(trials, study.directions)
    header = (["trial_id", "agent_id"] + [f"values_{m}" for m in study.metric_names]
              + [f"params_{n}" for n in names])
    rows = [[t.trial_id, t.agent_id] + list(t.values) + [t.params[n] for n in names] for t in front]
    return _write(path, header, rows)


def read_pareto_csv(path) -> list[dict]:
    return _read(path)


# -- report document ----------------------------------------------------------

def write_report_json(result: StudyResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    return path


def read_report_json(path) -> StudyResult:
    return StudyResult.from_dict(json.loads(Path(path).read_text()))


def export_study(store: StoreBackend, result: StudyResult, out_dir) -> dict[str, Path]:
    """Write the report JSON, trial table and snapshot table for one study."""
    out = Path(out_dir)
    study = store.get_study(result.study)
    trials = store.list_trials(result.study)
    stem = safe_stem(result.study)
    return {
        "report": write_report_json(result, out / f"{stem}-report.json"),
        "trials": write_trials_csv(study, trials, out / f"{stem}-trials.csv"),
        "snapshots": write_snapshots_csv(study, out / f"{stem}-snapshots.csv"),
    }


def safe_stem(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


# -- SVG ----------------------------------------------------------------------

def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("SVG output needs matplotlib (pip install 'artifact[plot]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_convergence_svg(study: Study, trials: Sequence[Trial], path, objective_index: int = 0) -> Path:
    """Metric value per completed trial coloured by agent, with the global best-so-far line."""
    plt = _pyplot()
    rows = convergence_rows(study, trials, objective_index)
    fig, ax = plt.subplots(figsize=(7, 4))
    agents = sorted({r[2] for r in rows})
    for aid in agents:
        pts = [(i + 1, r[3]) for i, r in enumerate(rows) if r[2] == aid]
        ax.scatter([p[0] for p in pts], [p[1] for p in pts], s=8, label=f"agent {aid}")
    ax.plot([i + 1 for i in range(len(rows))], [r[4] for r in rows], color="black", lw=1.2, label="best so far")
    ax.set_xlabel("completed trials")
    ax.set_ylabel(study.metric_names[objective_index])
    if rows and all(r[3] > 0 for r in rows):
        ax.set_yscale("log")
    ax.legend(fontsize=7, loc="upper right")
    ax.set_title(study.name)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def plot_importances_svg(study: Study, path, objective_index: int = 0) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    counts = [s.trial_count for s in study.attr_snapshots]
    for name in study.space.names:
        ys = [s.reports[objective_index]["importances"][name] for s in study.attr_snapshots]
        ax.plot(counts, ys, marker="o", ms=3, label=name)
    ax.set_xlabel("completed trials")
    ax.set_ylabel("first-order importance")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=6, ncol=2)
    ax.set_title(study.name)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def plot_pareto_svg(study: Study, trials: Sequence[Trial], path) -> Path:
    plt = _pyplot()
    done = [t for t in trials if t.state is TrialState.COMPLETE]
    front = best_trials(trials, study.directions)
    fig, ax = plt.subplots(figsize=(5, 5))
    if len(study.directions) >= 2:
        ax.scatter([t.values[0] for t in done], [t.values[1] for t in done], s=6, color="0.7", label="trials")
        ax.scatter([t.values[0] for t in front], [t.values[1] for t in front], s=14, color="C3", label="front")
        ax.set_xlabel(study.metric_names[0])
        ax.set_ylabel(study.metric_names[1])
    else:
        ax.scatter([t.trial_id for t in done], [t.values[0] for t in done], s=6, color="0.7", label="trials")
        ax.scatter([t.trial_id for t in front], [t.values[0] for t in front], s=20, color="C3", label="best")
        ax.set_xlabel("trial id")
        ax.set_ylabel(study.metric_names[0])
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)
