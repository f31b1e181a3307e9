import json
import math
import multiprocessing as mp
import random
import threading

import pytest

from varexplore.errors import (
    CorruptLog,
    IllegalTransition,
    NoCompletedTrials,
    NonFiniteValue,
    PointSpaceMismatch,
    StoreError,
    StudyConfigMismatch,
    StudyNotFound,
    UnknownTrial,
)
from varexplore.paramspace import Continuous, SearchSpace
from varexplore.trialstore import FileStore, MemoryStore, TrialState, best_trials, open_store
from varexplore.trialstore.model import Trial

SPACE = SearchSpace((Continuous("x", 0.0, 1.0),))
SPACE2 = SearchSpace((Continuous("x", 0.0, 2.0),))


@pytest.fixture(params=["memory", "file"])
def store(request, tmp_path):
    s = MemoryStore() if request.param == "memory" else FileStore(tmp_path / "log.jsonl")
    yield s
    s.close()


def test_first_trial_id_is_zero(store):
    store.create_or_open_study("s", SPACE, ["minimize"])
    assert store.begin_trial("s", 0, {"x": 0.5}).trial_id == 0
    assert store.begin_trial("s", 0, {"x": 0.5}).trial_id == 1


def test_begin_checks_params(store):
    store.create_or_open_study("s", SPACE, ["minimize"])
    with pytest.raises(PointSpaceMismatch):
        store.begin_trial("s", 0, {})
    with pytest.raises(PointSpaceMismatch):
        store.begin_trial("s", 0, {"x": 3.0})


def test_complete_and_illegal_transitions(store):
    store.create_or_open_study("s", SPACE, ["minimize"])
    t = store.begin_trial("s", 0, {"x": 0.1})
    done = store.complete_trial("s", t.trial_id, [0.3])
    assert done.state is TrialState.COMPLETE and done.values == [0.3] and done.seq == 0
    with pytest.raises(IllegalTransition):
        store.complete_trial("s", t.trial_id, [0.4])
    with pytest.raises(IllegalTransition):
        store.fail_trial("s", t.trial_id, "late")
    with pytest.raises(UnknownTrial):
        store.complete_trial("s", 99, [1.0])


def test_non_finite_rejected_then_fail_allowed(store):
    store.create_or_open_study("s", SPACE, ["minimize"])
    t = store.begin_trial("s", 0, {"x": 0.1})
    with pytest.raises(NonFiniteValue):
        store.complete_trial("s", t.trial_id, [math.nan])
    with pytest.raises(NonFiniteValue):
        store.complete_trial("s", t.trial_id, [math.inf])
    failed = store.fail_trial("s", t.trial_id, "nan objective")
    assert failed.state is TrialState.FAILED and failed.values is None


def test_value_count_must_match_directions(store):
    store.create_or_open_study("s", SPACE, ["minimize", "maximize"])
    t = store.begin_trial("s", 0, {"x": 0.1})
    with pytest.raises(StoreError):
        store.complete_trial("s", t.trial_id, [1.0])


def test_open_twice_returns_history(store):
    store.create_or_open_study("s", SPACE, ["minimize"])
    t = store.begin_trial("s", 0, {"x": 0.1})
    store.complete_trial("s", t.trial_id, [1.0])
    again = store.create_or_open_study("s", SPACE, ["minimize"])
    assert again.name == "s"
    assert len(store.list_trials("s")) == 1


def test_config_mismatch_and_bad_directions(store):
    store.create_or_open_study("s", SPACE, ["minimize"])
    with pytest.raises(StudyConfigMismatch):
        store.create_or_open_study("s", SPACE2, ["minimize"])
    with pytest.raises(StudyConfigMismatch):
        store.create_or_open_study("s", SPACE, ["maximize"])
    with pytest.raises(StudyConfigMismatch):
        store.create_or_open_study("t", SPACE, [])
    with pytest.raises(StudyConfigMismatch):
        store.create_or_open_study("t", SPACE, ["upward"])


def test_unknown_study(store):
    with pytest.raises(StudyNotFound):
        store.get_study("nope")
    with pytest.raises(StudyNotFound):
        store.list_trials("nope")


def test_request_id_makes_calls_idempotent(store):
    store.create_or_open_study("s", SPACE, ["minimize"])
    a = store.begin_trial("s", 0, {"x": 0.1}, request_id="r1")
    b = store.begin_trial("s", 0, {"x": 0.1}, request_id="r1")
    assert a.trial_id == b.trial_id
    assert len(store.list_trials("s")) == 1
    store.complete_trial("s", a.trial_id, [1.0], request_id="r2")
    assert store.complete_trial("s", a.trial_id, [1.0], request_id="r2").state is TrialState.COMPLETE


def test_attrs_and_state_filter(store):
    store.create_or_open_study("s", SPACE, ["minimize"])
    a = store.begin_trial("s", 0, {"x": 0.1})
    b = store.begin_trial("s", 1, {"x": 0.2})
    store.set_trial_attr("s", a.trial_id, "memory_max", 3e9)
    store.complete_trial("s", a.trial_id, [1.0])
    assert store.get_trial("s", a.trial_id).user_attrs == {"memory_max": "3000000000.0"}
    assert [t.trial_id for t in store.list_trials("s", [TrialState.RUNNING])] == [b.trial_id]
    assert [t.trial_id for t in store.completed_trials("s")] == [a.trial_id]


def test_abandon_running_per_agent(store):
    store.create_or_open_study("s", SPACE, ["minimize"])
    a = store.begin_trial("s", 0, {"x": 0.1})
    b = store.begin_trial("s", 1, {"x": 0.2})
    assert store.abandon_running("s", agent_id=1) == [b.trial_id]
    assert store.get_trial("s", a.trial_id).state is TrialState.RUNNING
    assert store.get_trial("s", b.trial_id).state is TrialState.FAILED


def test_snapshot_compare_and_append(store):
    store.create_or_open_study("s", SPACE, ["minimize"])
    assert store.append_snapshot("s", 20, [{"importances": {"x": 1.0}}])
    assert not store.append_snapshot("s", 20, [{"importances": {"x": 0.5}}])
    assert not store.append_snapshot("s", 10, [])
    assert store.append_snapshot("s", 40, [])
    snaps = store.get_study("s").attr_snapshots
    assert [s.trial_count for s in snaps] == [20, 40]
    assert snaps[0].reports[0]["importances"]["x"] == 1.0


# -- best trials --------------------------------------------------------------------

def _trials(values):
    return [Trial("s", i, 0, {"x": 0.0}, TrialState.COMPLETE, list(v), seq=i) for i, v in enumerate(values)]


def test_best_single_objective():
    assert [t.trial_id for t in best_trials(_trials([[3], [1], [2]]), ["minimize"])] == [1]
    assert [t.trial_id for t in best_trials(_trials([[3], [3]]), ["maximize"])] == [0]


def test_best_pareto_set():
    best = best_trials(_trials([(1, 2), (2, 1), (2, 2)]), ["minimize", "minimize"])
    assert sorted(t.trial_id for t in best) == [0, 1]


def test_best_ignores_failed_and_requires_completion():
    ts = _trials([[5.0]])
    ts.append(Trial("s", 1, 0, {"x": 0.0}, TrialState.FAILED))
    assert [t.trial_id for t in best_trials(ts, ["minimize"])] == [0]
    with pytest.raises(NoCompletedTrials):
        best_trials([Trial("s", 0, 0, {"x": 0.0})], ["minimize"])


def test_best_invariant_under_insertion_order():
    rng = random.Random(0)
    values = [(rng.randint(0, 9), rng.randint(0, 9)) for _ in range(60)]
    ref = sorted(t.trial_id for t in best_trials(_trials(values), ["minimize", "maximize"]))
    for _ in range(20):
        ts = _trials(values)
        rng.shuffle(ts)
        assert sorted(t.trial_id for t in best_trials(ts, ["minimize", "maximize"])) == ref


# -- concurrency --------------------------------------------------------------------

def _thread_agents(store, n_agents=5, n_each=50):
    store.create_or_open_study("s", SPACE, ["minimize"])

    def agent(aid):
        for k in range(n_each):
            t = store.begin_trial("s", aid, {"x": (aid * n_each + k) / (n_agents * n_each)})
            store.complete_trial("s", t.trial_id, [float(k)])

    threads = [threading.Thread(target=agent, args=(a,)) for a in range(n_agents)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


def test_threaded_agents_dense_ids(store):
    _thread_agents(store)
    trials = store.list_trials("s")
    assert sorted(t.trial_id for t in trials) == list(range(250))
    assert sorted(t.seq for t in trials) == list(range(250))
    assert all(t.state is TrialState.COMPLETE for t in trials)


def _process_agent(path, aid, n_each, barrier):
    store = FileStore(path)
    barrier.wait()
    store.create_or_open_study("s", SPACE, ["minimize"])
    for k in range(n_each):
        t = store.begin_trial("s", aid, {"x": 0.5})
        store.complete_trial("s", t.trial_id, [float(k)])
    store.close()


def test_processes_share_file_log(tmp_path):
    path = tmp_path / "log.jsonl"
    ctx = mp.get_context("fork")
    barrier = ctx.Barrier(5)
    procs = [ctx.Process(target=_process_agent, args=(path, a, 50, barrier)) for a in range(5)]
    for p in procs:
        p.start()
    for p in procs:
        p.join(60)
        assert p.exitcode == 0
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert sum(r["op"] == "create_study" for r in records) == 1
    store = FileStore(path)
    trials = store.list_trials("s")
    assert sorted(t.trial_id for t in trials) == list(range(250))
    assert all(t.state is TrialState.COMPLETE for t in trials)
    assert {t.agent_id for t in trials} == set(range(5))


# -- durability -----------------------------------------------------------------------

def _populate(path):
    s = FileStore(path)
    s.create_or_open_study("a", SPACE, ["minimize"])
    s.create_or_open_study("b", SPACE, ["minimize", "maximize"])
    for i in range(12):
        t = s.begin_trial("a", i % 3, {"x": i / 12})
        if i % 4 == 3:
            s.fail_trial("a", t.trial_id, "boom")
        elif i % 5 != 4:
            s.complete_trial("a", t.trial_id, [float(i)])
        s.set_trial_attr("a", t.trial_id, "note", i)
        if i in (5, 10):
            s.append_snapshot("a", i, [{"importances": {"x": 1.0}}])
        u = s.begin_trial("b", 0, {"x": 0.5})
        s.complete_trial("b", u.trial_id, [1.0, float(i)])
    s.close()


def _assert_consistent(store):
    for name in store.list_studies():
        trials = store.list_trials(name)
        assert [t.trial_id for t in trials] == list(range(len(trials)))
        done = [t for t in trials if t.state is TrialState.COMPLETE]
        assert sorted(t.seq for t in done) == list(range(len(done)))
        for t in trials:
            assert (t.values is not None) == (t.state is TrialState.COMPLETE)
        counts = [s.trial_count for s in store.get_study(name).attr_snapshots]
        assert counts == sorted(set(counts))


def test_reopen_after_every_record_prefix(tmp_path):
    full = tmp_path / "full.jsonl"
    _populate(full)
    lines = full.read_bytes().splitlines(keepends=True)
    for k in range(len(lines) + 1):
        part = tmp_path / f"prefix-{k}.jsonl"
        part.write_bytes(b"".join(lines[:k]))
        s = FileStore(part)
        _assert_consistent(s)
        s.close()


def test_partial_tail_is_cut_and_store_stays_writable(tmp_path):
    full = tmp_path / "full.jsonl"
    _populate(full)
    data = full.read_bytes()
    lines = data.splitlines(keepends=True)
    cut = sum(len(x) for x in lines[:20]) + len(lines[20]) // 2
    part = tmp_path / "cut.jsonl"
    part.write_bytes(data[:cut])
    s = FileStore(part)
    _assert_consistent(s)
    n_before = len(s.list_trials("a"))
    t = s.begin_trial("a", 9, {"x": 0.5})
    assert t.trial_id == n_before
    s.close()
    assert all(line.strip() for line in part.read_bytes().split(b"\n")[:-1])
    s = FileStore(part)
    assert len(s.list_trials("a")) == n_before + 1


def test_garbage_in_the_middle_is_reported(tmp_path):
    path = tmp_path / "bad.jsonl"
    _populate(path)
    lines = path.read_bytes().splitlines(keepends=True)
    lines.insert(3, b"{not json\n")
    path.write_bytes(b"".join(lines))
    with pytest.raises(CorruptLog):
        FileStore(path)


def test_resume_counts_add_up(tmp_path):
    path = tmp_path / "log.jsonl"
    s = FileStore(path)
    s.create_or_open_study("s", SPACE, ["minimize"])
    for _ in range(7):
        t = s.begin_trial("s", 0, {"x": 0.2})
        s.complete_trial("s", t.trial_id, [1.0])
    s.close()
    s = FileStore(path)
    s.create_or_open_study("s", SPACE, ["minimize"])
    for _ in range(5):
        t = s.begin_trial("s", 0, {"x": 0.2})
        s.complete_trial("s", t.trial_id, [1.0])
    assert len(s.list_trials("s")) == 12


def test_two_handles_see_each_other(tmp_path):
    path = tmp_path / "log.jsonl"
    a, b = FileStore(path), FileStore(path)
    a.create_or_open_study("s", SPACE, ["minimize"])
    t = b.begin_trial("s", 1, {"x": 0.3})
    a.complete_trial("s", t.trial_id, [2.0])
    assert b.get_trial("s", t.trial_id).values == [2.0]


def test_open_store_dispatch(tmp_path):
    assert isinstance(open_store(":memory:"), MemoryStore)
    assert isinstance(open_store(str(tmp_path / "x.jsonl")), FileStore)
