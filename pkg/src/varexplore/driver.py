"""Payload validation and the multi-agent study loop.

A payload names a model workflow, its inputs and the study options::

    {
      "workflow_type": "pompy",
      "workflow_options": {"source_x": [0.0, 100.0], "source_y": [0.0, 50.0], "wind_noise": 0.0},
      "variational_options": {
        "study_kind": "calibration",
        "num_studies": 5,
        "num_episodes": 100,
        "study_name": "pompy-calibration",
        "sampler_type": "NSGAIISampler",
        "metric_to_optimize": ["rmse"],
        "directions": ["minimize"]
      }
    }

Each entry of ``metric_to_optimize`` is one of: a registered metric workflow
(appended to the model), a terminal value of the model itself, or a
performance aggregate such as ``memory_max`` (needs a ``monitor`` block).

Every agent is a worker thread that loops ``num_episodes`` times through
suggest, begin, run, complete/fail.  Agents that share a study name see each
other's trials through the store and nothing else.  Whenever the global count
of Complete trials reaches a multiple of ``importance_interval`` an
importance snapshot is computed from exactly that many trials (in completion
order) and offered to the store, which keeps the first one per count.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    InsufficientData,
    MalformedResponse,
    MonitorUnreachable,
    NoCompletedTrials,
    ParamSpaceError,
    PayloadError,
    StoreUnavailable,
    UnknownWorkflow,
    WorkflowError,
)
from .executor import metrics as perf
from .executor.graph import WorkflowGraph, compose, run
from .executor.registry import WorkflowRegistry, default_registry
from .fanova import ForestConfig, ImportanceReport, importances
from .paramspace import ParamSpec, SearchSpace, parse_range
from .pareto import MAXIMIZE, MINIMIZE
from .samplers import SAMPLER_NAMES, config_fields, make_sampler
from .samplers.base import Sampler
from .trialstore import StoreBackend, Trial, TrialState, best_trials
from .trialstore.model import Snapshot

log = logging.getLogger(__name__)

STUDY_KINDS = ("calibration", "sensitivity")
DEFAULT_INTERVAL = 20

_KNOWN_TOP = {"workflow_type", "workflow_options", "variational_options"}
_KNOWN_VARIATIONAL = {
    "study_kind", "study_type", "num_studies", "num_episodes", "study_name", "sampler_type",
    "metric_to_optimize", "directions", "seed", "sampler_config", "fanova_config",
    "importance_interval", "monitor", "step_timeout",
}
_KNOWN_MONITOR = {"url", "window", "step", "pod_selector", "queries", "timeout"}


@dataclass(frozen=True)
class MonitorOptions:
    url: str
    # seconds, or "trial" for the trial's own runtime padded by one step
    window: float | str = perf.DEFAULT_WINDOW
    step: float = perf.DEFAULT_STEP
    pod_selector: str = ".*"
    queries: Mapping[str, str] | None = None
    timeout: float = 10.0


@dataclass(frozen=True)
class VariationalOptions:
    study_kind: str = "calibration"
    num_studies: int = 1
    num_episodes: int = 1
    study_names: tuple[str, ...] = ("study",)
    sampler_types: tuple[str, ...] = ("RandomSampler",)
    metric_to_optimize: tuple[str, ...] = ("value",)
    directions: tuple[str, ...] = (MINIMIZE,)
    seed: int = 0
    sampler_config: Mapping[str, Any] = field(default_factory=dict)
    fanova_config: ForestConfig = field(default_factory=ForestConfig)
    importance_interval: int = DEFAULT_INTERVAL
    monitor: MonitorOptions | None = None
    step_timeout: float | None = None

    def sampler_overrides(self, sampler_type: str) -> dict:
        """Flat overrides plus any block keyed by the sampler's own name."""
        flat = {k: v for k, v in self.sampler_config.items() if k not in SAMPLER_NAMES}
        flat.update(self.sampler_config.get(sampler_type, {}) or {})
        return flat


@dataclass(frozen=True)
class StudyPlan:
    """Validated payload: what to run and how."""

    workflow_type: str
    space: SearchSpace
    options: VariationalOptions
    graph: WorkflowGraph
    # objective name -> ("terminal", graph terminal) or ("perf", aggregate attr)
    objective_sources: tuple[tuple[str, str, str], ...]


# -- validation ---------------------------------------------------------------

def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _as_list(value, n: int, path: str, diags, what: str) -> list | None:
    if isinstance(value, (list, tuple)):
        if len(value) != n:
            diags.append((path, f"{what} list has {len(value)} entries but num_studies is {n}"))
            return None
        return list(value)
    return [value] * n


def _build_graph(model: WorkflowGraph, metrics: Sequence[str], monitor, registry: WorkflowRegistry, diags):
    graph = model
    sources = []
    for i, name in enumerate(metrics):
        path = f"variational_options.metric_to_optimize[{i}]"
        if not isinstance(name, str):
            diags.append((path, f"metric names must be strings, got {name!r}"))
            continue
        if name in graph.terminals:
            sources.append((name, "terminal", name))
            continue
        if name in registry:
            mg = registry.lookup(name)
            if mg.kind == "metric":
                try:
                    graph = compose(graph, mg)
                except WorkflowError as exc:
                    diags.append((path, str(exc)))
                    continue
                sources.append((name, "terminal", name))
                continue
        if name in perf.PERF_METRIC_NAMES:
            if monitor is None:
                diags.append((path, f"performance metric {name!r} needs variational_options.monitor"))
            sources.append((name, "perf", name))
            continue
        diags.append((path, f"{name!r} is neither a metric workflow, a terminal of "
                            f"{model.name!r} ({sorted(model.terminals)}) nor a performance metric"))
    return graph, tuple(sources)


def _parse_monitor(doc, diags) -> MonitorOptions | None:
    if doc is None:
        return None
    path = "variational_options.monitor"
    if isinstance(doc, str):
        doc = {"url": doc}
    if not isinstance(doc, Mapping) or not isinstance(doc.get("url"), str):
        diags.append((path, "expected a monitoring server URL or an object with a 'url' field"))
        return None
    for k in doc:
        if k not in _KNOWN_MONITOR:
            warnings.warn(f"{path}.{k}: unknown field ignored", stacklevel=3)
    kw = {k: doc[k] for k in _KNOWN_MONITOR if k in doc}
    window = kw.get("window", perf.DEFAULT_WINDOW)
    if not (window == "trial" or (isinstance(window, (int, float)) and window > 0)):
        diags.append((f"{path}.window", "must be a positive number of seconds or \"trial\""))
    step = kw.get("step", perf.DEFAULT_STEP)
    if not isinstance(step, (int, float)) or step <= 0:
        diags.append((f"{path}.step", "must be a positive number of seconds"))
    return MonitorOptions(**kw)


def validate_payload(document: Mapping, registry: WorkflowRegistry | None = None) -> StudyPlan:
    """Check a payload and resolve everything needed to run it.

    All problems are collected and raised together as a PayloadError whose
    diagnostics carry dotted paths into the document.  Unknown fields only
    warn.
    """
    registry = registry or default_registry
    diags: list[tuple[str, str]] = []
    if not isinstance(document, Mapping):
        raise PayloadError([("", "payload must be a JSON object")])
    for k in document:
        if k not in _KNOWN_TOP:
            warnings.warn(f"{k}: unknown payload field ignored", stacklevel=2)

    wf = document.get("workflow_type")
    model = None
    if not isinstance(wf, str):
        diags.append(("workflow_type", "required string naming the workflow"))
    else:
        try:
            model = registry.lookup(wf)
            if model.kind != "model":
                diags.append(("workflow_type", f"{wf!r} is a metric workflow, not a model"))
                model = None
        except UnknownWorkflow as exc:
            diags.append(("workflow_type", str(exc)))

    wopts = document.get("workflow_options", {})
    specs, fixed = [], {}
    if not isinstance(wopts, Mapping):
        diags.append(("workflow_options", "must be an object"))
        wopts = {}
    for name, raw in wopts.items():
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                parsed = parse_range(name, raw)
            for w in caught:
                warnings.warn(f"workflow_options.{name}: {w.message}", stacklevel=2)
        except ParamSpaceError as exc:
            diags.append((f"workflow_options.{name}", f"{type(exc).__name__}: {exc}"))
            continue
        if isinstance(parsed, ParamSpec):
            specs.append(parsed)
        else:
            fixed[name] = parsed
    space = SearchSpace(tuple(specs), fixed)
    if model is not None:
        absent = [p for p in model.parameters if p not in wopts]
        if absent:
            diags.append(("workflow_options", f"workflow {model.name!r} needs inputs {absent}"))

    vo = document.get("variational_options", {})
    if not isinstance(vo, Mapping):
        diags.append(("variational_options", "must be an object"))
        vo = {}
    for k in vo:
        if k not in _KNOWN_VARIATIONAL:
            warnings.warn(f"variational_options.{k}: unknown field ignored", stacklevel=2)
    P = "variational_options"

    kind = vo.get("study_kind", vo.get("study_type", "calibration"))
    if kind not in STUDY_KINDS:
        diags.append((f"{P}.study_kind", f"must be one of {list(STUDY_KINDS)}, got {kind!r}"))
        kind = "calibration"

    n = vo.get("num_studies", 1)
    if not _is_int(n) or n < 1:
        diags.append((f"{P}.num_studies", f"must be an integer >= 1, got {n!r}"))
        n = 1
    episodes = vo.get("num_episodes", 1)
    if not _is_int(episodes) or episodes < 1:
        diags.append((f"{P}.num_episodes", f"must be an integer >= 1, got {episodes!r}"))
        episodes = 1

    names = _as_list(vo.get("study_name", wf if isinstance(wf, str) else "study"), n,
                     f"{P}.study_name", diags, "study_name") or [None] * n
    if any(not isinstance(s, str) or not s for s in names if s is not None):
        diags.append((f"{P}.study_name", "study names must be non-empty strings"))

    default_sampler = "RandomSampler"
    samplers = _as_list(vo.get("sampler_type", default_sampler), n, f"{P}.sampler_type",
                        diags, "sampler_type") or [default_sampler] * n
    for i, s in enumerate(samplers):
        if s not in SAMPLER_NAMES:
            p = f"{P}.sampler_type" + (f"[{i}]" if isinstance(vo.get("sampler_type"), list) else "")
            diags.append((p, f"unknown sampler {s!r}; expected one of {list(SAMPLER_NAMES)}"))

    metrics = vo.get("metric_to_optimize")
    if metrics is None:
        # default to the model's own terminal value, e.g. "value" for sphere
        metrics = sorted(model.terminals)[:1] if model is not None else []
        if model is not None and not metrics:
            diags.append((f"{P}.metric_to_optimize", f"required: {model.name!r} has no terminal value"))
    if isinstance(metrics, str):
        metrics = [metrics]
    metrics = list(metrics) if isinstance(metrics, (list, tuple)) else []
    if not metrics and vo.get("metric_to_optimize") is not None:
        diags.append((f"{P}.metric_to_optimize", "must name at least one metric"))
    directions = vo.get("directions", [MINIMIZE] * len(metrics))
    if isinstance(directions, str):
        directions = [directions]
    directions = list(directions)
    if len(directions) != len(metrics):
        diags.append((f"{P}.directions", f"has {len(directions)} entries but metric_to_optimize has {len(metrics)}"))
    for i, d in enumerate(directions):
        if d not in (MINIMIZE, MAXIMIZE):
            diags.append((f"{P}.directions[{i}]", f"must be 'minimize' or 'maximize', got {d!r}"))
    if len(metrics) > 1:
        for i, s in enumerate(samplers):
            if s == "TPESampler":
                diags.append((f"{P}.sampler_type" + (f"[{i}]" if isinstance(vo.get("sampler_type"), list) else ""),
                              "TPESampler supports a single objective only"))

    seed = vo.get("seed", 0)
    if not _is_int(seed):
        diags.append((f"{P}.seed", f"must be an integer, got {seed!r}"))
        seed = 0

    sampler_config = vo.get("sampler_config", {}) or {}
    if not isinstance(sampler_config, Mapping):
        diags.append((f"{P}.sampler_config", "must be an object"))
        sampler_config = {}
    known_fields = set().union(*(config_fields(s) for s in SAMPLER_NAMES))
    for k, v in sampler_config.items():
        if k in SAMPLER_NAMES:
            if not isinstance(v, Mapping):
                diags.append((f"{P}.sampler_config.{k}", "must be an object"))
                continue
            for kk in v:
                if kk not in config_fields(k):
                    diags.append((f"{P}.sampler_config.{k}.{kk}", f"not a {k} setting"))
        elif k not in known_fields:
            diags.append((f"{P}.sampler_config.{k}", "not a setting of any sampler"))
    opts_probe = VariationalOptions(sampler_config=dict(sampler_config))
    # probe every sampler so a bad value is reported even if no agent uses it yet
    for s in SAMPLER_NAMES:
        try:
            make_sampler(s, opts_probe.sampler_overrides(s))
        except (TypeError, ValueError) as exc:
            diags.append((f"{P}.sampler_config", f"{s}: {exc}"))

    fanova_doc = vo.get("fanova_config", {}) or {}
    forest = ForestConfig()
    if not isinstance(fanova_doc, Mapping):
        diags.append((f"{P}.fanova_config", "must be an object"))
    else:
        allowed = {f.name for f in dataclasses.fields(ForestConfig)}
        bad = [k for k in fanova_doc if k not in allowed]
        for k in bad:
            diags.append((f"{P}.fanova_config.{k}", f"not a forest setting; expected one of {sorted(allowed)}"))
        if not bad:
            try:
                forest = ForestConfig(**fanova_doc)
            except (TypeError, ValueError) as exc:
                diags.append((f"{P}.fanova_config", str(exc)))

    interval = vo.get("importance_interval", DEFAULT_INTERVAL)
    if not _is_int(interval) or interval < 0:
        diags.append((f"{P}.importance_interval", f"must be an integer >= 0, got {interval!r}"))
        interval = DEFAULT_INTERVAL

    timeout = vo.get("step_timeout")
    if timeout is not None and (not isinstance(timeout, (int, float)) or timeout <= 0):
        diags.append((f"{P}.step_timeout", "must be a positive number of seconds"))
        timeout = None

    monitor = _parse_monitor(vo.get("monitor"), diags)

    graph, sources = (None, ())
    if model is not None and metrics:
        graph, sources = _build_graph(model, metrics, monitor, registry, diags)
    if not space.specs and not diags:
        diags.append(("workflow_options", "no ranges to explore: give at least one option as a [lo, hi] list"))

    if diags:
        raise PayloadError(diags)
    options = VariationalOptions(
        study_kind=kind, num_studies=n, num_episodes=episodes, study_names=tuple(names),
        sampler_types=tuple(samplers), metric_to_optimize=tuple(metrics), directions=tuple(directions),
        seed=seed, sampler_config=dict(sampler_config), fanova_config=forest,
        importance_interval=interval, monitor=monitor, step_timeout=timeout,
    )
    return StudyPlan(wf, space, options, graph, sources)


# -- environment --------------------------------------------------------------

class Environment:
    """Runs the composed workflow for one parameter point and extracts objectives."""

    def __init__(self, plan: StudyPlan, staging_root: Path):
        self.plan = plan
        self.staging_root = Path(staging_root)

    def staging_dir(self, study: str, trial_id: int) -> Path:
        return self.staging_root / _safe(study) / f"trial-{trial_id:06d}"

    def evaluate(self, study: str, trial_id: int, params: Mapping) -> tuple[list[float], dict[str, str]]:
        inputs = {**self.plan.space.fixed, **params}
        staging = self.staging_dir(study, trial_id)
        started = time.time()
        terminals = run(self.plan.graph, inputs, staging, timeout=self.plan.options.step_timeout)
        attrs: dict[str, str] = {}
        aggregates: dict[str, float] = {}
        mon = self.plan.options.monitor
        if mon is not None:
            window = mon.window
            if window == "trial":
                window = (math.ceil((time.time() - started) / mon.step) + 1) * mon.step
            try:
                series = perf.scrape_metrics(mon.url, window=window, step=mon.step,
                                             pod_selector=mon.pod_selector, queries=mon.queries,
                                             timeout=mon.timeout)
            except (MonitorUnreachable, MalformedResponse) as exc:
                attrs["metrics_status"] = "missing"
                attrs["metrics_error"] = f"{type(exc).__name__}: {exc}"
            else:
                perf.write_metrics_csv(series, staging / "metrics.csv")
                attrs["metrics_status"] = "ok"
                attrs.update(perf.aggregate_attrs(series))
                aggregates = {k: float(v) for k, v in perf.aggregate_attrs(series).items()}
        values = []
        for name, source, key in self.plan.objective_sources:
            if source == "terminal":
                values.append(terminals[key])
            elif key in aggregates:
                values.append(aggregates[key])
            else:
                raise _MissingObjective(name, attrs)
        return values, attrs


class _MissingObjective(Exception):
    def __init__(self, name, attrs):
        super().__init__(f"performance metric {name!r} unavailable")
        self.attrs = attrs


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


# -- snapshots ----------------------------------------------------------------

def compute_snapshot(trials: Sequence[Trial], space: SearchSpace, metric_names: Sequence[str],
                     threshold: int, config: ForestConfig | None = None, seed: int = 0) -> list[dict]:
    """One importance report per objective from the first ``threshold`` completions."""
    done = sorted((t for t in trials if t.state is TrialState.COMPLETE), key=lambda t: t.seq)[:threshold]
    if len(done) < threshold:
        raise InsufficientData(f"only {len(done)} completed trials, snapshot needs {threshold}")
    return [importances(done, space, objective_index=i, config=config, seed=seed, metric=m).to_dict()
            for i, m in enumerate(metric_names)]


def snapshot_importances(store: StoreBackend, study: str, threshold_count: int,
                         config: ForestConfig | None = None, seed: int = 0) -> bool:
    """Offer the snapshot for ``threshold_count``; True if this call stored it."""
    st = store.get_study(study)
    if st.attr_snapshots and st.attr_snapshots[-1].trial_count >= threshold_count:
        return False
    try:
        reports = compute_snapshot(store.list_trials(study, [TrialState.COMPLETE]), st.space,
                                   st.metric_names, threshold_count, config, seed)
    except InsufficientData as exc:
        log.info("%s: snapshot at %d skipped: %s", study, threshold_count, exc)
        return False
    return store.append_snapshot(study, threshold_count, reports)


def catch_up_snapshots(store: StoreBackend, study: str, interval: int,
                       config: ForestConfig | None = None, seed: int = 0) -> list[int]:
    """Append every missing snapshot up to the current Complete count, in order."""
    if interval <= 0:
        return []
    appended = []
    n_complete = len(store.list_trials(study, [TrialState.COMPLETE]))
    st = store.get_study(study)
    last = st.attr_snapshots[-1].trial_count if st.attr_snapshots else 0
    for threshold in range((last // interval + 1) * interval, n_complete + 1, interval):
        if snapshot_importances(store, study, threshold, config, seed):
            appended.append(threshold)
    return appended


# -- results --------------------------------------------------------------------

@dataclass
class StudyResult:
    study: str
    workflow_type: str
    directions: list[str]
    metric_names: list[str]
    best: list[Trial]
    importance_history: list[Snapshot]
    trial_count: int
    wall_time: float
    # agent id -> {"complete": n, "failed": m} for the agents of this run
    agent_counts: dict[int, dict[str, int]]
    samplers: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "study": self.study,
            "workflow_type": self.workflow_type,
            "directions": list(self.directions),
            "metric_names": list(self.metric_names),
            "trial_count": self.trial_count,
            "wall_time": self.wall_time,
            "agent_counts": {str(k): dict(v) for k, v in sorted(self.agent_counts.items())},
            "samplers": {str(k): v for k, v in sorted(self.samplers.items())},
            "best": [t.to_dict() for t in self.best],
            "importance_history": [s.to_dict() for s in self.importance_history],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "StudyResult":
        return cls(
            study=doc["study"], workflow_type=doc["workflow_type"], directions=list(doc["directions"]),
            metric_names=list(doc["metric_names"]), best=[Trial.from_dict(t) for t in doc["best"]],
            importance_history=[Snapshot(int(s["trial_count"]), list(s["reports"]))
                                for s in doc["importance_history"]],
            trial_count=int(doc["trial_count"]), wall_time=float(doc["wall_time"]),
            agent_counts={int(k): dict(v) for k, v in doc["agent_counts"].items()},
            samplers={int(k): v for k, v in doc.get("samplers", {}).items()},
        )

    def importance_reports(self, objective_index: int = 0) -> list[ImportanceReport]:
        return [ImportanceReport.from_dict(s.reports[objective_index]) for s in self.importance_history]


# -- agents -------------------------------------------------------------------

@dataclass
class _Agent:
    agent_id: int
    study: str
    sampler_type: str
    sampler: Sampler
    rng: np.random.Generator


def agent_rng(seed: int, agent_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(agent_id)]))


def _run_agent(agent: _Agent, plan: StudyPlan, store: StoreBackend, env: Environment, seed: int) -> None:
    opts = plan.options
    space, directions = plan.space, list(opts.directions)
    abandoned = store.abandon_running(agent.study, agent.agent_id, reason="abandoned on agent restart")
    if abandoned:
        log.warning("agent %d: marked interrupted trials %s Failed", agent.agent_id, abandoned)
    mine = [t for t in store.list_trials(agent.study) if t.agent_id == agent.agent_id and t.state.is_terminal]
    for _ in range(len(mine), opts.num_episodes):
        history = store.completed_trials(agent.study)
        params = agent.sampler.suggest(space, history, directions, agent.rng)
        trial = store.begin_trial(agent.study, agent.agent_id, params)
        try:
            values, attrs = env.evaluate(agent.study, trial.trial_id, params)
        except StoreUnavailable:
            raise
        except _MissingObjective as exc:
            for k, v in exc.attrs.items():
                store.set_trial_attr(agent.study, trial.trial_id, k, v)
            store.fail_trial(agent.study, trial.trial_id, str(exc))
            continue
        except Exception as exc:  # any workflow failure fails only this trial
            log.warning("agent %d trial %d failed: %s", agent.agent_id, trial.trial_id, exc)
            store.fail_trial(agent.study, trial.trial_id, f"{type(exc).__name__}: {exc}")
            continue
        for k, v in attrs.items():
            store.set_trial_attr(agent.study, trial.trial_id, k, v)
        if not all(math.isfinite(v) for v in values):
            store.fail_trial(agent.study, trial.trial_id, f"non-finite objective values {values}")
            continue
        done = store.complete_trial(agent.study, trial.trial_id, values)
        interval = opts.importance_interval
        if interval and (done.seq + 1) % interval == 0:
            catch_up_snapshots(store, agent.study, interval, opts.fanova_config, seed)


def run_study(payload: Mapping | StudyPlan, store: StoreBackend, registry: WorkflowRegistry | None = None,
              staging_dir=None, parallelism: int | None = None, seed: int | None = None,
              agent_offset: int = 0) -> list[StudyResult]:
    """Run every agent of the payload to its episode budget.

    Returns one StudyResult per distinct study name, in first-use order.
    Agents get ids ``agent_offset .. agent_offset + num_studies - 1``; an
    agent that already has terminal trials in the store (a resumed run)
    only runs the remainder of its budget.
    """
    plan = payload if isinstance(payload, StudyPlan) else validate_payload(payload, registry)
    opts = plan.options
    seed = opts.seed if seed is None else int(seed)
    if staging_dir is None:
        import tempfile
        staging_dir = tempfile.mkdtemp(prefix="varexplore-staging-")
    env = Environment(plan, Path(staging_dir))

    studies = list(dict.fromkeys(opts.study_names))
    for name in studies:
        assigned = [s for s, n in zip(opts.sampler_types, opts.study_names) if n == name]
        store.create_or_open_study(name, plan.space, list(opts.directions),
                                   list(opts.metric_to_optimize), assigned)

    agents = []
    for i in range(opts.num_studies):
        aid = agent_offset + i
        stype = opts.sampler_types[i]
        sampler = make_sampler(stype, opts.sampler_overrides(stype))
        sampler.check_directions(list(opts.directions))
        agents.append(_Agent(aid, opts.study_names[i], stype, sampler, agent_rng(seed, aid)))

    workers = max(1, min(len(agents), parallelism or len(agents)))
    started = time.time()
    errors = []
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="agent") as pool:
        futures = [pool.submit(_run_agent, a, plan, store, env, seed) for a in agents]
        for f in futures:
            exc = f.exception()
            if exc is not None:
                errors.append(exc)
    wall = time.time() - started
    if errors:
        raise errors[0]

    results = []
    for name in studies:
        catch_up_snapshots(store, name, opts.importance_interval, opts.fanova_config, seed)
        results.append(study_result(store, name, plan.workflow_type, wall,
                                    [a for a in agents if a.study == name]))
    return results


def study_result(store: StoreBackend, name: str, workflow_type: str = "", wall_time: float = 0.0,
                 agents: Sequence[_Agent] | None = None) -> StudyResult:
    st = store.get_study(name)
    trials = store.list_trials(name)
    ids = {a.agent_id for a in agents} if agents is not None else {t.agent_id for t in trials}
    counts = {aid: {"complete": 0, "failed": 0} for aid in sorted(ids)}
    for t in trials:
        if t.agent_id in counts and t.state.is_terminal:
            counts[t.agent_id]["complete" if t.state is TrialState.COMPLETE else "failed"] += 1
    try:
        best = best_trials(trials, st.directions)
    except NoCompletedTrials:
        best = []
    return StudyResult(
        study=name, workflow_type=workflow_type, directions=list(st.directions),
        metric_names=list(st.metric_names), best=best, importance_history=list(st.attr_snapshots),
        trial_count=sum(1 for t in trials if t.state.is_terminal), wall_time=wall_time,
        agent_counts=counts, samplers={a.agent_id: a.sampler_type for a in agents or ()},
    )
