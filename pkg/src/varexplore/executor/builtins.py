"""Workflows that ship with the package.

* ``sphere``             sum of squares of the numeric parameters
* ``identity``           metric passing the model's ``value`` through
* ``pompy``              puff plume run for a candidate source location
* ``rmse``               mean sensor RMSE against the reference recording
* ``synthetic-cost-13d`` peak-memory stand-in over 13 dispersion-run inputs
"""
from __future__ import annotations

import dataclasses
import math
import threading
import time

from ..plume import PlumeConfig, mean_rmse, simulate
from .graph import Step, WorkflowGraph

# parameters read by built-in steps that are not part of the model maths
CONTROL_OPTIONS = ("delay_s", "seed")


# -- sphere / identity -------------------------------------------------------

def _sphere(params, inputs):
    delay = float(params.get("delay_s", 0.0) or 0.0)
    if delay > 0:
        time.sleep(delay)
    total = 0.0
    for k, v in params.items():
        if k in CONTROL_OPTIONS or isinstance(v, bool) or not isinstance(v, (int, float)):
            continue
        total += float(v) ** 2
    return {"value": total}


def sphere_workflow() -> WorkflowGraph:
    return WorkflowGraph("sphere", (Step("evaluate", (), ("value",), func=_sphere),),
                         terminals={"value": "value"})


def identity_metric() -> WorkflowGraph:
    return WorkflowGraph("identity", (Step("pass", ("value",), ("loss",), func=lambda p, i: {"loss": i["value"]}),),
                         terminals={"loss": "loss"}, kind="metric")


# -- pompy / rmse ------------------------------------------------------------

_PLUME_FIELDS = {f.name for f in dataclasses.fields(PlumeConfig)}
_reference_cache: dict = {}
_reference_lock = threading.Lock()


def plume_config_from_options(params) -> PlumeConfig:
    """Reference (ground-truth) plume configuration from workflow options.

    Recognised keys are the PlumeConfig field names plus ``truth_x``/``truth_y``
    for the true source and ``wind_u``/``wind_v`` for the base wind.
    """
    kw = {k: params[k] for k in _PLUME_FIELDS if k in params and k not in ("source", "wind")}
    base = PlumeConfig()
    kw["source"] = (float(params.get("truth_x", base.source[0])), float(params.get("truth_y", base.source[1])))
    kw["wind"] = (float(params.get("wind_u", base.wind[0])), float(params.get("wind_v", base.wind[1])))
    for k in ("seed", "sensor_seed", "n_sensors"):
        if k in kw:
            kw[k] = int(kw[k])
    return PlumeConfig(**kw)


def reference_recording(config: PlumeConfig):
    with _reference_lock:
        ref = _reference_cache.get(config)
    if ref is None:
        ref = simulate(config)
        with _reference_lock:
            _reference_cache.setdefault(config, ref)
            if len(_reference_cache) > 16:
                _reference_cache.pop(next(iter(_reference_cache)))
    return ref


def _reference_step(params, inputs):
    return {"reference": reference_recording(plume_config_from_options(params))}


def _simulate_step(params, inputs):
    ref = inputs["reference"]
    cfg = ref.config.with_source(inputs["source_x"], inputs["source_y"])
    return {"concentrations": simulate(cfg, ref.positions)}


def pompy_workflow_graph() -> WorkflowGraph:
    return WorkflowGraph(
        "pompy",
        (
            Step("reference", (), ("reference",), func=_reference_step),
            Step("simulate", ("reference", "source_x", "source_y"), ("concentrations",), func=_simulate_step),
        ),
        parameters=("source_x", "source_y"),
    )


def rmse_metric() -> WorkflowGraph:
    step = Step("rmse", ("concentrations", "reference"), ("mean_rmse",),
                func=lambda p, i: {"mean_rmse": mean_rmse(i["reference"], i["concentrations"])})
    return WorkflowGraph("rmse", (step,), terminals={"mean_rmse": "mean_rmse"}, kind="metric")


# -- synthetic 13-parameter cost model ---------------------------------------

# name -> (lo, hi) nominal range, in the order used for the payload
SYNTHETIC_COST_RANGES = {
    "latitude": (54.95, 55.02),
    "longitude": (-1.70, -1.55),
    "windspeed": (0.5, 10.0),
    "density": (0.5, 3.0),
    "wind_direction": (0.0, 360.0),
    "temperature": (260.0, 310.0),
    "deposition_velocity": (0.0, 0.05),
    "mass": (1.0, 100.0),
    "shearFactor2": (0.0, 1.0),
    "windDivSplitAngle": (5.0, 45.0),
    "groundOffsetSplitSize": (0.1, 5.0),
    "groundSplitAspectRatio": (0.5, 4.0),
    "windSplitAspectRatio": (0.5, 4.0),
}
SYNTHETIC_DOMINANT = ("latitude", "longitude")
SYNTHETIC_NEGLIGIBLE = ("shearFactor2", "windDivSplitAngle", "groundOffsetSplitSize",
                        "groundSplitAspectRatio", "windSplitAspectRatio")


def synthetic_peak_memory(params) -> float:
    """Peak memory (GB) of a made-up dispersion run.

    Two location inputs dominate, six physical inputs matter moderately and
    the five puff-splitting inputs barely register.
    """
    u = {k: (float(params[k]) - lo) / (hi - lo) for k, (lo, hi) in SYNTHETIC_COST_RANGES.items()}
    mem = 1.2
    mem += 1.5 * math.exp(-((u["latitude"] - 0.6) / 0.18) ** 2)
    mem += 1.2 * u["longitude"]
    mem += 0.8 * u["windspeed"] ** 2
    mem += 0.7 * u["density"]
    mem += 0.25 * math.sin(2.0 * math.pi * u["wind_direction"])
    mem += 0.6 * u["temperature"]
    mem += 0.5 * u["deposition_velocity"]
    mem += 0.45 * u["mass"]
    mem += 0.006 * sum(u[k] for k in SYNTHETIC_NEGLIGIBLE)
    return mem


def synthetic_cost_workflow() -> WorkflowGraph:
    step = Step("udm", tuple(SYNTHETIC_COST_RANGES), ("peak_memory",),
                func=lambda p, i: {"peak_memory": synthetic_peak_memory(i)})
    return WorkflowGraph("synthetic-cost-13d", (step,), parameters=tuple(SYNTHETIC_COST_RANGES),
                         terminals={"peak_memory": "peak_memory"})


def builtin_workflows() -> dict[str, WorkflowGraph]:
    return {
        "sphere": sphere_workflow(),
        "identity": identity_metric(),
        "pompy": pompy_workflow_graph(),
        "rmse": rmse_metric(),
        "synthetic-cost-13d": synthetic_cost_workflow(),
    }
