"""Workflow graphs, composition and execution.

A workflow is a DAG of steps exchanging named artifacts.  A step either calls
a Python function (``func(params, inputs) -> {output: value}``) or runs an
external command.  Artifacts live in a per-trial staging directory:

    <staging>/params.json          workflow parameters
    <staging>/artifacts/<name>.*   one file (or directory) per artifact
    <staging>/logs/<step>.log      step output / tracebacks

External commands receive the staging path in ``VEM_STAGING``, the parameter
document path in ``VEM_PARAMS`` and every scalar parameter as
``VEM_PARAM_<NAME>``; they must write each declared output as
``artifacts/<name>.json``.
"""
from __future__ import annotations

import graphlib
import json
import os
import subprocess
import threading
import traceback
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ..errors import CycleIntroduced, StepFailed, StepTimeout, UnboundMetricInput, WorkflowError
from ..plume import SensorArray, load_sensor_array, save_sensor_array


@dataclass(frozen=True)
class Step:
    id: str
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    func: Callable[[Mapping, Mapping], Mapping] | None = None
    command: tuple[str, ...] | None = None
    timeout: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if (self.func is None) == (self.command is None):
            raise WorkflowError(f"step {self.id!r} needs exactly one of func or command")
        if self.command is not None:
            object.__setattr__(self, "command", tuple(self.command))

    @property
    def kind(self) -> str:
        return "builtin" if self.func is not None else "command"


@dataclass(frozen=True)
class WorkflowGraph:
    name: str
    steps: tuple[Step, ...]
    parameters: tuple[str, ...] = ()
    # metric name -> artifact holding its scalar value
    terminals: Mapping[str, str] = field(default_factory=dict)
    kind: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "terminals", dict(self.terminals))
        if self.kind not in ("model", "metric"):
            raise WorkflowError(f"{self.name}: kind must be 'model' or 'metric'")
        ids = [s.id for s in self.steps]
        if len(set(ids)) != len(ids):
            raise WorkflowError(f"{self.name}: duplicate step ids")
        produced = [o for s in self.steps for o in s.outputs]
        dup = sorted({o for o in produced if produced.count(o) > 1})
        if dup:
            raise WorkflowError(f"{self.name}: artifacts produced by more than one step: {dup}")
        if self.kind == "model" and self.free_inputs():
            raise WorkflowError(f"{self.name}: inputs with no producer: {sorted(self.free_inputs())}")
        if self.kind == "metric" and len(self.terminals) != 1:
            raise WorkflowError(f"{self.name}: a metric workflow needs exactly one terminal value")
        for art in self.terminals.values():
            if art not in produced:
                raise WorkflowError(f"{self.name}: terminal artifact {art!r} is never produced")
        self.order()

    def producers(self) -> dict[str, str]:
        return {o: s.id for s in self.steps for o in s.outputs}

    @property
    def outputs(self) -> set[str]:
        return set(self.producers())

    def free_inputs(self) -> set[str]:
        prod = self.producers()
        return {i for s in self.steps for i in s.inputs if i not in prod and i not in self.parameters}

    def order(self) -> list[Step]:
        prod = self.producers()
        ts = graphlib.TopologicalSorter()
        for s in self.steps:
            ts.add(s.id, *[prod[i] for i in s.inputs if i in prod])
        try:
            ids = list(ts.static_order())
        except graphlib.CycleError as exc:
            raise CycleIntroduced(f"{self.name}: dependency cycle through {exc.args[1]}") from None
        by_id = {s.id: s for s in self.steps}
        return [by_id[i] for i in ids]


def compose(model: WorkflowGraph, metric: WorkflowGraph) -> WorkflowGraph:
    """Append ``metric`` after ``model``; metric steps read the model's artifacts."""
    unbound = metric.free_inputs() - model.outputs
    if unbound:
        raise UnboundMetricInput(
            f"metric {metric.name!r} needs {sorted(unbound)} which model {model.name!r} does not produce")
    clash = model.outputs & metric.outputs
    if clash:
        raise WorkflowError(f"{model.name} and {metric.name} both produce {sorted(clash)}")
    taken = {s.id for s in model.steps}
    steps = list(model.steps)
    for s in metric.steps:
        steps.append(replace(s, id=f"{metric.name}.{s.id}") if s.id in taken else s)
    params = tuple(dict.fromkeys(model.parameters + metric.parameters))
    terminals = dict(model.terminals)
    if metric.kind == "metric":
        terminals[metric.name] = next(iter(metric.terminals.values()))
    else:
        terminals.update(metric.terminals)
    # a model input satisfied by a metric output closes a loop; let the sorter find it
    params = tuple(p for p in params if p not in metric.outputs)
    return WorkflowGraph(f"{model.name}+{metric.name}", tuple(steps), params, terminals, "model")


class Staging:
    """Artifact exchange directory for one workflow run."""

    def __init__(self, root):
        self.root = Path(root)
        self.artifacts = self.root / "artifacts"
        self.logs = self.root / "logs"
        self.artifacts.mkdir(parents=True, exist_ok=True)
        self.logs.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, Any] = {}

    def put(self, name: str, value) -> None:
        self._cache[name] = value
        if isinstance(value, SensorArray):
            save_sensor_array(value, self.artifacts / name)
        elif isinstance(value, np.ndarray):
            np.save(self.artifacts / f"{name}.npy", value)
        else:
            (self.artifacts / f"{name}.json").write_text(json.dumps(_jsonable(value)))

    def get(self, name: str):
        if name in self._cache:
            return self._cache[name]
        if (self.artifacts / f"{name}.json").exists():
            value = json.loads((self.artifacts / f"{name}.json").read_text())
        elif (self.artifacts / f"{name}.npy").exists():
            value = np.load(self.artifacts / f"{name}.npy")
        elif (self.artifacts / name / "series.csv").exists():
            value = load_sensor_array(self.artifacts / name)
        else:
            raise KeyError(name)
        self._cache[name] = value
        return value

    def has(self, name: str) -> bool:
        try:
            self.get(name)
        except KeyError:
            return False
        return True


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _call_with_timeout(fn, timeout):
    if not timeout:
        return fn()
    box = {}

    def target():
        try:
            box["result"] = fn()
        except BaseException as exc:  # re-raised in the caller
            box["error"] = exc

    th = threading.Thread(target=target, daemon=True)
    th.start()
    th.join(timeout)
    if th.is_alive():
        raise TimeoutError
    if "error" in box:
        raise box["error"]
    return box["result"]


def _run_builtin(step: Step, params, inputs, staging: Staging, timeout):
    log = staging.logs / f"{step.id.replace('/', '_')}.log"
    try:
        out = _call_with_timeout(lambda: step.func(params, inputs), timeout)
    except TimeoutError:
        log.write_text(f"timed out after {timeout}s\n")
        raise StepTimeout(step.id, f"exceeded {timeout}s") from None
    except Exception as exc:
        log.write_text(traceback.format_exc())
        raise StepFailed(step.id, f"{type(exc).__name__}: {exc}") from exc
    out = dict(out or {})
    missing = [o for o in step.outputs if o not in out]
    if missing:
        raise StepFailed(step.id, f"did not produce {missing}")
    log.write_text("ok\n")
    return out


def _run_command(step: Step, params, staging: Staging, timeout):
    log = staging.logs / f"{step.id.replace('/', '_')}.log"
    env = dict(os.environ)
    env["VEM_STAGING"] = str(staging.root)
    env["VEM_PARAMS"] = str(staging.root / "params.json")
    env["VEM_STEP"] = step.id
    for k, v in params.items():
        if isinstance(v, (int, float, str, bool)):
            env[f"VEM_PARAM_{k.upper()}"] = str(v)
    argv = [a.format(staging=staging.root) for a in step.command]
    with open(log, "w") as fh:
        try:
            proc = subprocess.run(argv, cwd=staging.root, env=env, stdout=fh, stderr=subprocess.STDOUT,
                                  timeout=timeout)
        except subprocess.TimeoutExpired:
            raise StepTimeout(step.id, f"exceeded {timeout}s") from None
        except OSError as exc:
            raise StepFailed(step.id, f"could not start {argv[0]!r}: {exc}") from exc
    if proc.returncode != 0:
        raise StepFailed(step.id, f"exit status {proc.returncode}")
    out = {}
    for name in step.outputs:
        path = staging.artifacts / f"{name}.json"
        if not path.exists():
            raise StepFailed(step.id, f"did not write {path.name}")
        out[name] = json.loads(path.read_text())
    return out


def run(graph: WorkflowGraph, params: Mapping[str, Any], staging_dir, timeout: float | None = None,
        on_step: Callable[[str], None] | None = None) -> dict[str, float]:
    """Execute ``graph`` in topological order; return its terminal scalars."""
    missing = [p for p in graph.parameters if p not in params]
    if missing:
        raise WorkflowError(f"{graph.name}: missing parameters {missing}")
    staging = Staging(staging_dir)
    (staging.root / "params.json").write_text(json.dumps(_jsonable(dict(params)), indent=2))
    for step in graph.order():
        if on_step is not None:
            on_step(step.id)
        inputs = {}
        for name in step.inputs:
            if staging.has(name):
                inputs[name] = staging.get(name)
            elif name in params:
                inputs[name] = params[name]
            else:
                raise StepFailed(step.id, f"input {name!r} is unavailable")
        limit = step.timeout if step.timeout is not None else timeout
        if step.func is not None:
            for name, value in _run_builtin(step, params, inputs, staging, limit).items():
                staging.put(name, value)
        else:
            # command outputs are already on disk
            staging._cache.update(_run_command(step, params, staging, limit))
    result = {}
    for metric, art in graph.terminals.items():
        value = staging.get(art)
        try:
            result[metric] = float(value)
        except (TypeError, ValueError):
            raise WorkflowError(f"{graph.name}: terminal {art!r} is not a scalar: {value!r}") from None
    return result
