import json
import sys
import time

import pytest

from varexplore.errors import CycleIntroduced, StepFailed, StepTimeout, UnboundMetricInput, UnknownWorkflow, WorkflowError
from varexplore.executor import Step, WorkflowGraph, compose, run
from varexplore.executor.builtins import identity_metric, plume_config_from_options
from varexplore.executor.registry import WorkflowRegistry, default_registry, lookup, register_workflow


def py(code):
    return (sys.executable, "-c", code)


def test_sphere(tmp_path):
    assert run(lookup("sphere"), {"x": 1, "y": 2}, tmp_path) == {"value": 5.0}
    assert json.loads((tmp_path / "params.json").read_text()) == {"x": 1, "y": 2}
    assert (tmp_path / "logs" / "evaluate.log").exists()


def test_compose_identity(tmp_path):
    g = compose(lookup("sphere"), identity_metric())
    assert g.name == "sphere+identity"
    assert [s.id for s in g.order()] == ["evaluate", "pass"]
    assert run(g, {"x": 3.0}, tmp_path) == {"value": 9.0, "identity": 9.0}


def test_compose_pompy_rmse_terminal():
    g = compose(lookup("pompy"), lookup("rmse"))
    assert g.name == "pompy+rmse"
    assert list(g.terminals) == ["rmse"]
    assert g.terminals["rmse"] == "mean_rmse"
    assert set(g.parameters) == {"source_x", "source_y"}


def test_unbound_metric_input():
    metric = WorkflowGraph("needs-flux", (Step("m", ("flux",), ("loss",), func=lambda p, i: {"loss": 0.0}),),
                           terminals={"loss": "loss"}, kind="metric")
    with pytest.raises(UnboundMetricInput):
        compose(lookup("sphere"), metric)


def test_cycle_introduced():
    model = WorkflowGraph("m", (Step("a", ("feedback",), ("value",), func=lambda p, i: {"value": 1.0}),),
                          parameters=("feedback",), terminals={"value": "value"})
    metric = WorkflowGraph("back", (Step("b", ("value",), ("feedback",), func=lambda p, i: {"feedback": 1.0}),),
                           terminals={"feedback": "feedback"}, kind="metric")
    with pytest.raises(CycleIntroduced):
        compose(model, metric)


def test_graph_invariants():
    f = lambda p, i: {}  # noqa: E731
    with pytest.raises(WorkflowError):
        WorkflowGraph("g", (Step("a", (), ("x",), func=f), Step("b", (), ("x",), func=f)))
    with pytest.raises(WorkflowError):
        WorkflowGraph("g", (Step("a", ("missing",), ("x",), func=f),))
    with pytest.raises(WorkflowError):
        WorkflowGraph("g", (Step("a", (), ("x",), func=f),), terminals={"a": "x", "b": "x"}, kind="metric")
    with pytest.raises(WorkflowError):
        Step("a", func=f, command=("true",))
    with pytest.raises(CycleIntroduced):
        WorkflowGraph("g", (Step("a", ("y",), ("x",), func=f), Step("b", ("x",), ("y",), func=f)))


def test_topological_order_recorded(tmp_path):
    def emit(name):
        return lambda p, i: {name: sum(i.values()) + 1}

    steps = (
        Step("d", ("b", "c"), ("d",), func=emit("d")),
        Step("c", ("a",), ("c",), func=emit("c")),
        Step("b", ("a",), ("b",), func=emit("b")),
        Step("a", (), ("a",), func=emit("a")),
    )
    g = WorkflowGraph("diamond", steps, terminals={"d": "d"})
    seen = []
    assert run(g, {}, tmp_path, on_step=seen.append) == {"d": 5.0}
    producers = g.producers()
    for step in g.steps:
        for inp in step.inputs:
            assert seen.index(producers[inp]) < seen.index(step.id)


def test_builtin_exception_is_step_failed(tmp_path):
    g = WorkflowGraph("boom", (Step("s", (), ("v",), func=lambda p, i: 1 / 0),), terminals={"v": "v"})
    with pytest.raises(StepFailed) as err:
        run(g, {}, tmp_path)
    assert "ZeroDivisionError" in str(err.value)
    assert "ZeroDivisionError" in (tmp_path / "logs" / "s.log").read_text()


def test_command_step(tmp_path):
    code = ("import json, os; p = json.load(open(os.environ['VEM_PARAMS'])); "
            "json.dump(p['a'] * 2 + float(os.environ['VEM_PARAM_B']), open('artifacts/out.json', 'w'))")
    g = WorkflowGraph("cmd", (Step("run", (), ("out",), command=py(code)),), parameters=("a", "b"),
                      terminals={"out": "out"})
    assert run(g, {"a": 2.0, "b": 0.5}, tmp_path) == {"out": 4.5}


def test_command_exit_one_keeps_partial_artifacts(tmp_path):
    code = ("import json; json.dump([1, 2], open('artifacts/partial.json', 'w')); "
            "print('half done'); raise SystemExit(1)")
    g = WorkflowGraph("bad", (Step("run", (), ("out",), command=py(code)),), terminals={"out": "out"})
    with pytest.raises(StepFailed) as err:
        run(g, {}, tmp_path)
    assert "exit status 1" in str(err.value)
    assert json.loads((tmp_path / "artifacts" / "partial.json").read_text()) == [1, 2]
    assert "half done" in (tmp_path / "logs" / "run.log").read_text()


def test_command_missing_output_and_bad_binary(tmp_path):
    g = WorkflowGraph("quiet", (Step("run", (), ("out",), command=py("pass")),), terminals={"out": "out"})
    with pytest.raises(StepFailed):
        run(g, {}, tmp_path / "a")
    g = WorkflowGraph("nope", (Step("run", (), ("out",), command=("/no/such/binary",)),), terminals={"out": "out"})
    with pytest.raises(StepFailed):
        run(g, {}, tmp_path / "b")


def test_timeouts(tmp_path):
    g = WorkflowGraph("slow", (Step("run", (), ("out",), command=py("import time; time.sleep(5)")),),
                      terminals={"out": "out"})
    t0 = time.monotonic()
    with pytest.raises(StepTimeout):
        run(g, {}, tmp_path / "cmd", timeout=0.3)
    assert time.monotonic() - t0 < 3
    with pytest.raises(StepTimeout):
        run(lookup("sphere"), {"x": 1.0, "delay_s": 2.0}, tmp_path / "builtin", timeout=0.2)
    per_step = WorkflowGraph("slow2", (Step("s", (), ("v",), func=lambda p, i: time.sleep(1) or {"v": 1},
                                            timeout=0.1),), terminals={"v": "v"})
    with pytest.raises(StepTimeout):
        run(per_step, {}, tmp_path / "step")


def test_missing_parameter(tmp_path):
    with pytest.raises(WorkflowError):
        run(compose(lookup("pompy"), lookup("rmse")), {"source_x": 1.0}, tmp_path)


def test_non_scalar_terminal(tmp_path):
    g = WorkflowGraph("vec", (Step("s", (), ("v",), func=lambda p, i: {"v": [1, 2]}),), terminals={"v": "v"})
    with pytest.raises(WorkflowError):
        run(g, {}, tmp_path)


def test_registry():
    reg = WorkflowRegistry()
    assert {"pompy", "rmse", "sphere", "synthetic-cost-13d"} <= set(reg.names())
    with pytest.raises(UnknownWorkflow):
        reg.lookup("nope")
    g = WorkflowGraph("mine", (Step("s", (), ("v",), func=lambda p, i: {"v": 1.0}),), terminals={"v": "v"})
    reg.register("mine", g)
    assert reg.lookup("mine") is g and "mine" in reg
    assert "mine" not in default_registry
    other = WorkflowRegistry(include_builtins=False)
    register_workflow("mine", g, other)
    assert lookup("mine", other) is g
    with pytest.raises(UnknownWorkflow):
        lookup("sphere", other)


def test_pompy_rmse_at_truth_is_zero(tmp_path):
    opts = {"truth_x": 30.0, "truth_y": 20.0, "wind_noise": 0.0, "duration": 10.0}
    g = compose(lookup("pompy"), lookup("rmse"))
    at_truth = run(g, dict(opts, source_x=30.0, source_y=20.0), tmp_path / "a")["rmse"]
    assert at_truth == 0.0
    # staged reference round-trips through the CSV bundle
    assert (tmp_path / "a" / "artifacts" / "reference" / "series.csv").exists()
    elsewhere = run(g, dict(opts, source_x=60.0, source_y=30.0), tmp_path / "b")["rmse"]
    assert elsewhere > 0.0
    assert plume_config_from_options(opts).source == (30.0, 20.0)
