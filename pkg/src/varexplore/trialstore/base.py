"""Store interface and the record-driven local implementation.

Every mutation is expressed as a self-describing record (a plain dict).  The
local store validates a request against the current state, turns it into a
record, hands the record to ``_persist`` and then applies it.  Replaying the
same records in order rebuilds the same state, which is what the file log
relies on.
"""
from __future__ import annotations

import abc
import copy
import math
import threading
import time
from typing import Iterable, Sequence

from ..errors import (
    CorruptLog,
    IllegalTransition,
    NoCompletedTrials,
    NonFiniteValue,
    StoreError,
    StudyConfigMismatch,
    StudyNotFound,
    UnknownTrial,
)
from ..paramspace import SearchSpace
from ..pareto import MAXIMIZE, MINIMIZE, nondominated_sort
from .model import Snapshot, Study, Trial, TrialState

SCHEMA_VERSION = 1


def best_trials(trials: Iterable[Trial], directions: Sequence[str]) -> list[Trial]:
    """Pareto set of the Complete trials; the single best one for one objective."""
    done = sorted((t for t in trials if t.state is TrialState.COMPLETE), key=lambda t: t.trial_id)
    if not done:
        raise NoCompletedTrials("study has no completed trials")
    if len(directions) == 1:
        sign = 1.0 if directions[0] == MINIMIZE else -1.0
        # min() keeps the first of equal keys, i.e. the lowest id
        return [min(done, key=lambda t: sign * t.values[0])]
    front = nondominated_sort([t.values for t in done], directions)[0]
    return [done[i] for i in front]


class StoreBackend(abc.ABC):
    """Operations every trial store offers, local or remote."""

    @abc.abstractmethod
    def create_or_open_study(self, name: str, space: SearchSpace, directions: Sequence[str],
                             metric_names: Sequence[str] | None = None,
                             sampler_assignments: Sequence[str] | None = None) -> Study: ...

    @abc.abstractmethod
    def get_study(self, name: str) -> Study: ...

    @abc.abstractmethod
    def list_studies(self) -> list[str]: ...

    @abc.abstractmethod
    def begin_trial(self, study: str, agent_id: int, params: dict, request_id: str | None = None) -> Trial: ...

    @abc.abstractmethod
    def complete_trial(self, study: str, trial_id: int, values: Sequence[float],
                       request_id: str | None = None) -> Trial: ...

    @abc.abstractmethod
    def fail_trial(self, study: str, trial_id: int, reason: str = "",
                   request_id: str | None = None) -> Trial: ...

    @abc.abstractmethod
    def set_trial_attr(self, study: str, trial_id: int, key: str, value) -> None: ...

    @abc.abstractmethod
    def list_trials(self, study: str, states: Sequence[TrialState] | None = None) -> list[Trial]: ...

    @abc.abstractmethod
    def append_snapshot(self, study: str, trial_count: int, reports: list[dict]) -> bool:
        """Append unless a snapshot at ``trial_count`` or later exists; True if appended."""

    @abc.abstractmethod
    def abandon_running(self, study: str, agent_id: int | None = None,
                        reason: str = "abandoned") -> list[int]:
        """Mark Running trials (optionally of one agent) Failed; returns their ids."""

    def get_trial(self, study: str, trial_id: int) -> Trial:
        for t in self.list_trials(study):
            if t.trial_id == trial_id:
                return t
        raise UnknownTrial(f"{study}: no trial {trial_id}")

    def completed_trials(self, study: str) -> list[Trial]:
        """Complete trials in completion order."""
        trials = self.list_trials(study, states=[TrialState.COMPLETE])
        return sorted(trials, key=lambda t: t.seq)

    def best_trials(self, study: str) -> list[Trial]:
        return best_trials(self.list_trials(study), self.get_study(study).directions)

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class _StudyState:
    def __init__(self, study: Study):
        self.study = study
        self.trials: list[Trial] = []
        self.n_complete = 0


class LocalStore(StoreBackend):
    """In-process store; the base for the file-backed one."""

    def __init__(self):
        self._lock = threading.RLock()
        self._studies: dict[str, _StudyState] = {}
        self._requests: dict[str, tuple[str, int]] = {}

    # -- hooks for subclasses ------------------------------------------------

    def _sync(self) -> None:
        """Bring in-memory state up to date with the durable medium."""

    def _persist(self, record: dict) -> None:
        """Make ``record`` durable before it is applied."""

    def _locked(self):
        return self._lock

    # -- record application ------------------------------------------------

    def _state(self, name: str) -> _StudyState:
        try:
            return self._studies[name]
        except KeyError:
            raise StudyNotFound(f"no study named {name!r}") from None

    def _trial(self, name: str, trial_id: int) -> Trial:
        st = self._state(name)
        if not isinstance(trial_id, int) or not 0 <= trial_id < len(st.trials):
            raise UnknownTrial(f"{name}: no trial {trial_id}")
        return st.trials[trial_id]

    def _apply(self, rec: dict):
        op = rec["op"]
        if op == "create_study":
            study = Study(
                name=rec["study"],
                space=SearchSpace.from_dict(rec["space"]),
                directions=list(rec["directions"]),
                metric_names=list(rec["metric_names"]),
                sampler_assignments=list(rec.get("sampler_assignments", [])),
            )
            self._studies[study.name] = _StudyState(study)
            return study
        st = self._state(rec["study"])
        if op == "begin_trial":
            if rec["trial_id"] != len(st.trials):
                raise CorruptLog(f"trial id {rec['trial_id']} out of sequence")
            t = Trial(study=rec["study"], trial_id=rec["trial_id"], agent_id=rec["agent_id"],
                      params=dict(rec["params"]), created_at=rec.get("ts", 0.0))
            st.trials.append(t)
            if rec.get("request_id"):
                self._requests[rec["request_id"]] = (rec["study"], t.trial_id)
            return t
        if op in ("complete_trial", "fail_trial"):
            t = self._trial(rec["study"], rec["trial_id"])
            if t.state.is_terminal:
                raise CorruptLog(f"trial {t.trial_id} finished twice")
            t.finished_at = rec.get("ts")
            if op == "complete_trial":
                t.state = TrialState.COMPLETE
                t.values = [float(v) for v in rec["values"]]
                t.seq = st.n_complete
                st.n_complete += 1
            else:
                t.state = TrialState.FAILED
                t.fail_reason = rec.get("reason", "")
            if rec.get("request_id"):
                self._requests[rec["request_id"]] = (rec["study"], t.trial_id)
            return t
        if op == "set_trial_attr":
            self._trial(rec["study"], rec["trial_id"]).user_attrs[rec["key"]] = rec["value"]
            return None
        if op == "append_snapshot":
            st.study.attr_snapshots.append(Snapshot(rec["trial_count"], rec["reports"]))
            return True
        raise CorruptLog(f"unknown record op {op!r}")

    def _commit(self, rec: dict):
        rec = {"v": SCHEMA_VERSION, **rec}
        self._persist(rec)
        return self._apply(rec)

    # -- public API ------------------------------------------------------------

    def create_or_open_study(self, name, space, directions, metric_names=None, sampler_assignments=None):
        directions = list(directions)
        if not directions:
            raise StudyConfigMismatch("a study needs at least one objective direction")
        for d in directions:
            if d not in (MINIMIZE, MAXIMIZE):
                raise StudyConfigMismatch(f"unknown direction {d!r}")
        metric_names = list(metric_names) if metric_names else [f"objective_{i}" for i in range(len(directions))]
        if len(metric_names) != len(directions):
            raise StudyConfigMismatch("metric_names and directions differ in length")
        with self._locked():
            self._sync()
            if name in self._studies:
                existing = self._studies[name].study
                if existing.space.to_dict() != space.to_dict():
                    raise StudyConfigMismatch(f"study {name!r} exists with a different search space")
                if existing.directions != directions:
                    raise StudyConfigMismatch(
                        f"study {name!r} exists with directions {existing.directions}, requested {directions}")
                return copy.deepcopy(existing)
            study = self._commit({
                "op": "create_study", "study": name, "space": space.to_dict(),
                "directions": directions, "metric_names": metric_names,
                "sampler_assignments": list(sampler_assignments or []),
            })
            return copy.deepcopy(study)

    def get_study(self, name):
        with self._locked():
            self._sync()
            return copy.deepcopy(self._state(name).study)

    def list_studies(self):
        with self._locked():
            self._sync()
            return list(self._studies)

    def begin_trial(self, study, agent_id, params, request_id=None):
        with self._locked():
            self._sync()
            st = self._state(study)
            if request_id and request_id in self._requests:
                s, tid = self._requests[request_id]
                return copy.deepcopy(self._trial(s, tid))
            st.study.space.check(params)
            t = self._commit({
                "op": "begin_trial", "study": study, "trial_id": len(st.trials),
                "agent_id": int(agent_id), "params": dict(params), "ts": time.time(),
                "request_id": request_id,
            })
            return copy.deepcopy(t)

    def _finish(self, study, trial_id, request_id, rec):
        with self._locked():
            self._sync()
            t = self._trial(study, trial_id)
            if request_id and self._requests.get(request_id) == (study, trial_id):
                return copy.deepcopy(t)
            if t.state.is_terminal:
                raise IllegalTransition(f"{study}: trial {trial_id} is already {t.state.value}")
            return copy.deepcopy(self._commit(rec))

    def complete_trial(self, study, trial_id, values, request_id=None):
        values = [float(v) for v in values]
        with self._locked():
            self._sync()
            n_obj = len(self._state(study).study.directions)
        if len(values) != n_obj:
            raise StoreError(f"{study}: expected {n_obj} objective values, got {len(values)}")
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteValue(f"{study}: trial {trial_id} values {values} are not all finite")
        return self._finish(study, trial_id, request_id, {
            "op": "complete_trial", "study": study, "trial_id": trial_id,
            "values": values, "ts": time.time(), "request_id": request_id,
        })

    def fail_trial(self, study, trial_id, reason="", request_id=None):
        return self._finish(study, trial_id, request_id, {
            "op": "fail_trial", "study": study, "trial_id": trial_id,
            "reason": str(reason), "ts": time.time(), "request_id": request_id,
        })

    def set_trial_attr(self, study, trial_id, key, value):
        with self._locked():
            self._sync()
            self._trial(study, trial_id)
            self._commit({"op": "set_trial_attr", "study": study, "trial_id": trial_id,
                          "key": str(key), "value": str(value)})

    def list_trials(self, study, states=None):
        with self._locked():
            self._sync()
            trials = self._state(study).trials
            if states is not None:
                wanted = {TrialState(s) for s in states}
                trials = [t for t in trials if t.state in wanted]
            return copy.deepcopy(trials)

    def get_trial(self, study, trial_id):
        with self._locked():
            self._sync()
            return copy.deepcopy(self._trial(study, trial_id))

    def append_snapshot(self, study, trial_count, reports):
        with self._locked():
            self._sync()
            snaps = self._state(study).study.attr_snapshots
            if snaps and snaps[-1].trial_count >= trial_count:
                return False
            self._commit({"op": "append_snapshot", "study": study,
                          "trial_count": int(trial_count), "reports": reports})
            return True

    def abandon_running(self, study, agent_id=None, reason="abandoned"):
        with self._locked():
            self._sync()
            ids = [t.trial_id for t in self._state(study).trials
                   if t.state is TrialState.RUNNING and (agent_id is None or t.agent_id == agent_id)]
            for tid in ids:
                self._commit({"op": "fail_trial", "study": study, "trial_id": tid,
                              "reason": reason, "ts": time.time(), "request_id": None})
            return ids


class MemoryStore(LocalStore):
    """Thread-safe store living only in this process."""
