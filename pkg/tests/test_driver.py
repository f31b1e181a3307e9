import threading

import numpy as np
import pytest

from varexplore.driver import (
    StudyResult,
    agent_rng,
    catch_up_snapshots,
    run_study,
    snapshot_importances,
    validate_payload,
)
from varexplore.errors import PayloadError, StoreUnavailable
from varexplore.executor import Step, WorkflowGraph
from varexplore.executor.registry import WorkflowRegistry
from varexplore.paramspace import Continuous, SearchSpace
from varexplore.trialstore import MemoryStore, TrialState

POMPY = {
    "workflow_type": "pompy",
    "workflow_options": {"source_x": [0.0, 100.0], "source_y": [0.0, 50.0], "wind_noise": 0.0},
    "variational_options": {
        "study_kind": "calibration",
        "num_studies": 5,
        "num_episodes": 100,
        "study_name": "pompy-calibration",
        "sampler_type": "NSGAIISampler",
        "metric_to_optimize": ["rmse"],
        "directions": ["minimize"],
    },
}


def sphere(n=1, episodes=1, **vo):
    return {
        "workflow_type": "sphere",
        "workflow_options": {"x": [-5.0, 5.0], "y": [-5.0, 5.0]},
        "variational_options": {"num_studies": n, "num_episodes": episodes, "study_name": "sph", **vo},
    }


def paths(payload):
    with pytest.raises(PayloadError) as err:
        validate_payload(payload)
    return [p for p, _ in err.value.diagnostics]


# -- validation --------------------------------------------------------------------

def test_pompy_payload():
    plan = validate_payload(POMPY)
    assert plan.workflow_type == "pompy"
    assert plan.space.names == ["source_x", "source_y"]
    assert plan.space.fixed == {"wind_noise": 0.0}
    assert plan.options.study_names == ("pompy-calibration",) * 5
    assert plan.options.sampler_types == ("NSGAIISampler",) * 5
    assert plan.graph.name == "pompy+rmse"
    assert plan.objective_sources == (("rmse", "terminal", "rmse"),)


def test_defaults():
    plan = validate_payload({"workflow_type": "sphere", "workflow_options": {"x": [0.0, 1.0]}})
    o = plan.options
    assert (o.num_studies, o.num_episodes, o.study_kind) == (1, 1, "calibration")
    assert o.sampler_types == ("RandomSampler",)
    assert o.metric_to_optimize == ("value",) and o.directions == ("minimize",)
    assert o.study_names == ("sphere",) and o.importance_interval == 20


def test_directions_length_mismatch():
    bad = sphere(metric_to_optimize=["value"], directions=["minimize", "maximize"])
    assert "variational_options.directions" in paths(bad)


def test_sampler_list_wrong_length():
    bad = sphere(n=3, sampler_type=["RandomSampler", "TPESampler"])
    assert "variational_options.sampler_type" in paths(bad)


def test_study_name_list_wrong_length():
    assert "variational_options.study_name" in paths(sphere(n=2, study_name=["a", "b", "c"]))


def test_errors_are_aggregated_with_paths():
    bad = {
        "workflow_type": "sphere",
        "workflow_options": {"x": [5.0, 1.0], "lr": [0.0, 1.0, "log"]},
        "variational_options": {"num_studies": 2, "sampler_type": ["RandomSampler", "Annealer"],
                                "directions": ["up"], "num_episodes": 0},
    }
    got = paths(bad)
    for p in ("workflow_options.x", "workflow_options.lr", "variational_options.sampler_type[1]",
              "variational_options.directions[0]", "variational_options.num_episodes"):
        assert p in got


def test_other_validation_errors():
    assert "workflow_type" in paths({"workflow_type": "nope", "workflow_options": {"x": [0.0, 1.0]}})
    assert "workflow_type" in paths({"workflow_type": "rmse", "workflow_options": {"x": [0.0, 1.0]}})
    assert "workflow_options" in paths({"workflow_type": "pompy", "workflow_options": {"source_x": [0.0, 1.0]}})
    assert "workflow_options" in paths({"workflow_type": "sphere", "workflow_options": {"x": 1.0}})
    tpe_multi = sphere(sampler_type="TPESampler", metric_to_optimize=["value", "value"],
                       directions=["minimize", "minimize"])
    assert "variational_options.sampler_type" in paths(tpe_multi)
    assert "variational_options.metric_to_optimize[0]" in paths(sphere(metric_to_optimize=["flux"]))
    assert "variational_options.metric_to_optimize[0]" in paths(sphere(metric_to_optimize=["memory_max"]))
    assert "variational_options.sampler_config.bogus" in paths(sphere(sampler_config={"bogus": 1}))
    assert "variational_options.sampler_config" in paths(sphere(sampler_config={"population_size": 1}))
    assert "variational_options.fanova_config.trees" in paths(sphere(fanova_config={"trees": 3}))
    assert "variational_options.importance_interval" in paths(sphere(importance_interval=-1))
    assert "variational_options.study_kind" in paths(sphere(study_kind="tuning"))
    assert "variational_options.monitor.step" in paths(sphere(monitor={"url": "http://x", "step": 0}))


def test_unknown_fields_warn_and_alias():
    doc = sphere(study_type="sensitivity", colour="blue")
    doc["extra"] = 1
    with pytest.warns(UserWarning):
        plan = validate_payload(doc)
    assert plan.options.study_kind == "sensitivity"


# -- running -----------------------------------------------------------------------

def test_single_trial_no_snapshots(tmp_path):
    store = MemoryStore()
    [res] = run_study(sphere(), store, staging_dir=tmp_path)
    assert res.trial_count == 1 and len(store.list_trials("sph")) == 1
    assert res.importance_history == []
    assert res.agent_counts == {0: {"complete": 1, "failed": 0}}
    assert (tmp_path / "sph" / "trial-000000" / "params.json").exists()


def test_shared_study_budget_and_snapshots(tmp_path):
    store = MemoryStore()
    [res] = run_study(sphere(n=5, episodes=20, sampler_type="NSGAIISampler"), store, staging_dir=tmp_path)
    trials = store.list_trials("sph")
    assert len(trials) == res.trial_count == 100
    assert sorted(t.trial_id for t in trials) == list(range(100))
    assert {t.agent_id for t in trials} == set(range(5))
    assert all(res.agent_counts[a]["complete"] == 20 for a in range(5))
    assert [s.trial_count for s in res.importance_history] == [20, 40, 60, 80, 100]
    assert res.samplers == {a: "NSGAIISampler" for a in range(5)}


def test_isolated_studies(tmp_path):
    store = MemoryStore()
    names = [f"iso-{i}" for i in range(5)]
    results = run_study(sphere(n=5, episodes=8, study_name=names, importance_interval=0), store,
                        staging_dir=tmp_path)
    assert [r.study for r in results] == names
    assert sorted(store.list_studies()) == names
    for i, name in enumerate(names):
        trials = store.list_trials(name)
        assert len(trials) == 8 and {t.agent_id for t in trials} == {i}
        assert [t.trial_id for t in sorted(trials, key=lambda t: t.trial_id)] == list(range(8))


def test_mixed_sampler_ensemble(tmp_path):
    store = MemoryStore()
    samplers = ["NSGAIISampler", "TPESampler", "RandomSampler"]
    [res] = run_study(sphere(n=3, episodes=10, sampler_type=samplers), store, staging_dir=tmp_path)
    assert res.samplers == dict(enumerate(samplers))
    assert store.get_study("sph").sampler_assignments == samplers


def test_failures_do_not_abort(tmp_path):
    reg = WorkflowRegistry()

    def flaky(params, inputs):
        if params["x"] > 0:
            raise RuntimeError("positive x unsupported")
        return {"value": params["x"] ** 2}

    reg.register("flaky", WorkflowGraph("flaky", (Step("s", (), ("value",), func=flaky),),
                                        terminals={"value": "value"}))
    reg.register("nanny", WorkflowGraph("nanny", (Step("s", (), ("value",), func=lambda p, i: {"value": float("nan")}),),
                                        terminals={"value": "value"}))
    store = MemoryStore()
    payload = {"workflow_type": "flaky", "workflow_options": {"x": [-1.0, 1.0]},
               "variational_options": {"num_studies": 2, "num_episodes": 15, "study_name": "f"}}
    [res] = run_study(payload, store, registry=reg, staging_dir=tmp_path)
    trials = store.list_trials("f")
    failed = [t for t in trials if t.state is TrialState.FAILED]
    assert len(trials) == 30 and failed
    assert all(t.params["x"] > 0 and "positive x" in t.fail_reason for t in failed)
    assert res.trial_count == 30
    payload["workflow_type"] = "nanny"
    payload["variational_options"]["study_name"] = "n"
    run_study(payload, store, registry=reg, staging_dir=tmp_path)
    assert all(t.state is TrialState.FAILED and "non-finite" in t.fail_reason for t in store.list_trials("n"))


def test_store_unavailable_aborts(tmp_path):
    class Down(MemoryStore):
        def begin_trial(self, *a, **k):
            raise StoreUnavailable("gone")

    with pytest.raises(StoreUnavailable):
        run_study(sphere(n=2, episodes=3), Down(), staging_dir=tmp_path)


def test_resume_reaches_full_budget(tmp_path):
    store = MemoryStore()
    plan = validate_payload(sphere(n=3, episodes=10))
    store.create_or_open_study("sph", plan.space, ["minimize"], ["value"])
    # agent 1 died mid-trial after finishing two
    for _ in range(2):
        t = store.begin_trial("sph", 1, {"x": 0.0, "y": 0.0})
        store.complete_trial("sph", t.trial_id, [0.0])
    stuck = store.begin_trial("sph", 1, {"x": 1.0, "y": 1.0})
    [res] = run_study(plan, store, staging_dir=tmp_path)
    trials = store.list_trials("sph")
    assert len(trials) == 30 and res.trial_count == 30
    assert store.get_trial("sph", stuck.trial_id).state is TrialState.FAILED
    assert sum(t.agent_id == 1 for t in trials) == 10
    # re-running a finished study adds nothing
    run_study(plan, store, staging_dir=tmp_path)
    assert len(store.list_trials("sph")) == 30


def test_best_so_far_non_increasing(tmp_path):
    store = MemoryStore()
    run_study(sphere(n=1, episodes=60, sampler_type="TPESampler"), store, staging_dir=tmp_path)
    values = [t.values[0] for t in store.completed_trials("sph")]
    best = np.minimum.accumulate(values)
    assert np.all(np.diff(best) <= 0)
    assert best[-1] < best[0]


def test_constant_objective_degenerate_snapshot(tmp_path):
    reg = WorkflowRegistry()
    reg.register("flat", WorkflowGraph("flat", (Step("s", (), ("value",), func=lambda p, i: {"value": 1.0}),),
                                       terminals={"value": "value"}))
    payload = {"workflow_type": "flat", "workflow_options": {"a": [0.0, 1.0], "b": [0.0, 1.0]},
               "variational_options": {"num_episodes": 20, "study_kind": "sensitivity", "study_name": "flat"}}
    [res] = run_study(payload, MemoryStore(), registry=reg, staging_dir=tmp_path)
    [report] = res.importance_reports()
    assert report.degenerate and report.as_dict() == {"a": 0.0, "b": 0.0} and report.trial_count == 20


def test_multi_objective_snapshots_and_best(tmp_path):
    reg = WorkflowRegistry()
    reg.register("two", WorkflowGraph(
        "two", (Step("s", (), ("f1", "f2"), func=lambda p, i: {"f1": p["a"], "f2": (1 - p["a"]) + p["b"]}),),
        terminals={"f1": "f1", "f2": "f2"}))
    payload = {"workflow_type": "two", "workflow_options": {"a": [0.0, 1.0], "b": [0.0, 1.0]},
               "variational_options": {"num_studies": 2, "num_episodes": 20, "study_name": "mo",
                                       "sampler_type": "NSGAIISampler", "metric_to_optimize": ["f1", "f2"],
                                       "directions": ["minimize", "minimize"]}}
    [res] = run_study(payload, MemoryStore(), registry=reg, staging_dir=tmp_path)
    assert len(res.best) >= 1
    assert [r.metric for r in res.importance_reports(1)] == ["f2", "f2"]
    assert res.importance_reports(0)[0].entries[0][0] == "a"


def test_snapshot_race_one_winner():
    store = MemoryStore()
    space = SearchSpace((Continuous("x", 0.0, 1.0), Continuous("y", 0.0, 1.0)))
    store.create_or_open_study("s", space, ["minimize"], ["value"])
    rng = np.random.default_rng(0)
    for _ in range(45):
        p = {"x": float(rng.random()), "y": float(rng.random())}
        t = store.begin_trial("s", 0, p)
        store.complete_trial("s", t.trial_id, [p["x"]])
    barrier = threading.Barrier(4)
    wins = []

    def race():
        barrier.wait()
        wins.append(snapshot_importances(store, "s", 20))

    threads = [threading.Thread(target=race) for _ in range(4)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert sum(wins) == 1
    assert catch_up_snapshots(store, "s", 20) == [40]
    assert [s.trial_count for s in store.get_study("s").attr_snapshots] == [20, 40]
    assert catch_up_snapshots(store, "s", 20) == []


def test_snapshot_uses_first_completions_only():
    store = MemoryStore()
    space = SearchSpace((Continuous("x", 0.0, 1.0), Continuous("y", 0.0, 1.0)))
    store.create_or_open_study("s", space, ["minimize"], ["value"])
    rng = np.random.default_rng(1)
    for i in range(30):
        p = {"x": float(rng.random()), "y": float(rng.random())}
        t = store.begin_trial("s", 0, p)
        # the first 20 depend on x only, later ones on y only
        store.complete_trial("s", t.trial_id, [p["x"] if i < 20 else 5 * p["y"]])
    assert snapshot_importances(store, "s", 20)
    [report] = store.get_study("s").attr_snapshots[0].reports
    assert report["trial_count"] == 20
    assert report["importances"]["x"] > report["importances"]["y"]


def test_result_round_trip(tmp_path):
    [res] = run_study(sphere(n=2, episodes=10), MemoryStore(), staging_dir=tmp_path)
    assert StudyResult.from_dict(res.to_dict()) == res


def test_agent_rng_streams():
    a = agent_rng(7, 0).random(3)
    assert np.array_equal(a, agent_rng(7, 0).random(3))
    assert not np.array_equal(a, agent_rng(7, 1).random(3))
    assert not np.array_equal(a, agent_rng(8, 0).random(3))


def test_seed_determinism_single_agent(tmp_path):
    runs = []
    for k in range(2):
        store = MemoryStore()
        run_study(sphere(episodes=30, sampler_type="TPESampler", seed=11), store, staging_dir=tmp_path / str(k))
        runs.append([(t.params, t.values) for t in store.list_trials("sph")])
    assert runs[0] == runs[1]
