from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

from ..paramspace import SearchSpace


class TrialState(str, enum.Enum):
    RUNNING = "RUNNING"
    COMPLETE = "COMPLETE"
    FAILED = "FAILED"

    @property
    def is_terminal(self) -> bool:
        return self is not TrialState.RUNNING


@dataclass
class Trial:
    study: str
    trial_id: int
    agent_id: int
    params: dict[str, Any]
    state: TrialState = TrialState.RUNNING
    values: list[float] | None = None
    # position of this trial in the study's completion order (Complete only)
    seq: int | None = None
    created_at: float = 0.0
    finished_at: float | None = None
    fail_reason: str | None = None
    user_attrs: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "study": self.study,
            "trial_id": self.trial_id,
            "agent_id": self.agent_id,
            "params": dict(self.params),
            "state": self.state.value,
            "values": None if self.values is None else list(self.values),
            "seq": self.seq,
            "created_at": self.created_at,
            "finished_at": self.finished_at,
            "fail_reason": self.fail_reason,
            "user_attrs": dict(self.user_attrs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trial":
        return cls(
            study=d["study"],
            trial_id=int(d["trial_id"]),
            agent_id=int(d["agent_id"]),
            params=dict(d["params"]),
            state=TrialState(d["state"]),
            values=None if d.get("values") is None else [float(v) for v in d["values"]],
            seq=d.get("seq"),
            created_at=d.get("created_at", 0.0),
            finished_at=d.get("finished_at"),
            fail_reason=d.get("fail_reason"),
            user_attrs=dict(d.get("user_attrs", {})),
        )


@dataclass
class Snapshot:
    trial_count: int
    reports: list[dict]

    def to_dict(self):
        return {"trial_count": self.trial_count, "reports": self.reports}


@dataclass
class Study:
    name: str
    space: SearchSpace
    directions: list[str]
    metric_names: list[str]
    sampler_assignments: list[str] = field(default_factory=list)
    attr_snapshots: list[Snapshot] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "space": self.space.to_dict(),
            "directions": list(self.directions),
            "metric_names": list(self.metric_names),
            "sampler_assignments": list(self.sampler_assignments),
            "snapshots": [s.to_dict() for s in self.attr_snapshots],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Study":
        return cls(
            name=d["name"],
            space=SearchSpace.from_dict(d["space"]),
            directions=list(d["directions"]),
            metric_names=list(d["metric_names"]),
            sampler_assignments=list(d.get("sampler_assignments", [])),
            attr_snapshots=[Snapshot(s["trial_count"], s["reports"]) for s in d.get("snapshots", [])],
        )
