"""Search-space declaration, range parsing and unit-cube encoding.

Ranges come from the ``workflow_options`` block of a payload::

    [0.0, 10.0]            continuous
    [1, 5]                 discrete (inclusive at both ends)
    [0.001, 1.0, "log"]    logarithmic
    ["fast", "slow"]       categorical

Anything that is not a list is a fixed (non-varied) workflow input.

Sampled values are plain Python scalars: ``float`` for continuous and
logarithmic dimensions, ``int`` for discrete ones and ``str`` for categories.
"""
from __future__ import annotations

import math
import numbers
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    InvertedBounds,
    MalformedRange,
    NonPositiveLogBound,
    PointSpaceMismatch,
)

__all__ = [
    "ParamSpec",
    "Continuous",
    "Discrete",
    "Logarithmic",
    "Categorical",
    "SearchSpace",
    "parse_range",
    "parse_space",
    "contains",
    "to_unit_cube",
    "from_unit_cube",
    "spec_from_dict",
]


def _is_int(v) -> bool:
    return isinstance(v, numbers.Integral) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return isinstance(v, numbers.Real) and not isinstance(v, bool)


@dataclass(frozen=True)
class ParamSpec:
    name: str

    kind = "abstract"

    def contains(self, value) -> bool:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator):
        raise NotImplementedError

    def to_unit(self, value) -> float:
        raise NotImplementedError

    def from_unit(self, u: float):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Continuous(ParamSpec):
    lo: float = 0.0
    hi: float = 1.0

    kind = "continuous"

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise InvertedBounds(f"{self.name}: lower bound {self.lo} must be < upper bound {self.hi}")

    def contains(self, value) -> bool:
        return _is_real(value) and math.isfinite(value) and self.lo <= value <= self.hi

    def sample(self, rng):
        return float(rng.uniform(self.lo, self.hi))

    def to_unit(self, value):
        return (float(value) - self.lo) / (self.hi - self.lo)

    def from_unit(self, u):
        v = self.lo + float(u) * (self.hi - self.lo)
        return float(min(max(v, self.lo), self.hi))

    def to_dict(self):
        return {"name": self.name, "kind": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Logarithmic(ParamSpec):
    lo: float = 1e-3
    hi: float = 1.0

    kind = "logarithmic"

    def __post_init__(self):
        if self.lo <= 0:
            raise NonPositiveLogBound(f"{self.name}: log range needs a positive lower bound, got {self.lo}")
        if not (self.lo < self.hi):
            raise InvertedBounds(f"{self.name}: lower bound {self.lo} must be < upper bound {self.hi}")

    def contains(self, value) -> bool:
        return _is_real(value) and math.isfinite(value) and self.lo <= value <= self.hi

    def sample(self, rng):
        # uniform in log space; clamp guards against exp/log rounding at the ends
        v = math.exp(rng.uniform(math.log(self.lo), math.log(self.hi)))
        return float(min(max(v, self.lo), self.hi))

    def to_unit(self, value):
        a, b = math.log10(self.lo), math.log10(self.hi)
        return (math.log10(float(value)) - a) / (b - a)

    def from_unit(self, u):
        a, b = math.log10(self.lo), math.log10(self.hi)
        v = 10.0 ** (a + float(u) * (b - a))
        return float(min(max(v, self.lo), self.hi))

    def to_dict(self):
        return {"name": self.name, "kind": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Discrete(ParamSpec):
    lo: int = 0
    hi: int = 1

    kind = "discrete"

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise InvertedBounds(f"{self.name}: lower bound {self.lo} must be < upper bound {self.hi}")

    def contains(self, value) -> bool:
        return _is_int(value) and self.lo <= value <= self.hi

    def sample(self, rng):
        return int(rng.integers(self.lo, self.hi + 1))

    def to_unit(self, value):
        return (int(value) - self.lo) / (self.hi - self.lo)

    def from_unit(self, u):
        v = int(round(self.lo + float(u) * (self.hi - self.lo)))
        return min(max(v, self.lo), self.hi)

    def to_dict(self):
        return {"name": self.name, "kind": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Categorical(ParamSpec):
    choices: tuple[str, ...] = ()

    kind = "categorical"

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(self.choices))
        if not self.choices:
            raise MalformedRange(f"{self.name}: categorical range needs at least one choice")
        if len(set(self.choices)) != len(self.choices):
            raise MalformedRange(f"{self.name}: categorical choices must be distinct")

    def contains(self, value) -> bool:
        return isinstance(value, str) and value in self.choices

    def sample(self, rng):
        return self.choices[int(rng.integers(len(self.choices)))]

    def index(self, value) -> int:
        return self.choices.index(value)

    def to_unit(self, value):
        k = len(self.choices)
        if k == 1:
            return 0.5
        return self.index(value) / (k - 1)

    def from_unit(self, u):
        k = len(self.choices)
        i = 0 if k == 1 else int(round(float(u) * (k - 1)))
        return self.choices[min(max(i, 0), k - 1)]

    def to_dict(self):
        return {"name": self.name, "kind": self.kind, "choices": list(self.choices)}


def spec_from_dict(doc: Mapping) -> ParamSpec:
    kind = doc["kind"]
    if kind == "continuous":
        return Continuous(doc["name"], float(doc["lo"]), float(doc["hi"]))
    if kind == "logarithmic":
        return Logarithmic(doc["name"], float(doc["lo"]), float(doc["hi"]))
    if kind == "discrete":
        return Discrete(doc["name"], int(doc["lo"]), int(doc["hi"]))
    if kind == "categorical":
        return Categorical(doc["name"], tuple(doc["choices"]))
    raise MalformedRange(f"unknown parameter kind {kind!r}")


@dataclass(frozen=True)
class SearchSpace:
    """Ordered varied dimensions plus fixed workflow inputs."""

    specs: tuple[ParamSpec, ...] = ()
    fixed: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "fixed", dict(self.fixed))
        names = [s.name for s in self.specs] + list(self.fixed)
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise MalformedRange(f"duplicate parameter names: {dup}")

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    def __len__(self):
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)

    def __getitem__(self, name: str) -> ParamSpec:
        for s in self.specs:
            if s.name == name:
                return s
        raise KeyError(name)

    def check(self, point: Mapping[str, Any]) -> None:
        """Raise PointSpaceMismatch unless ``point`` assigns every dimension a valid value."""
        missing = [n for n in self.names if n not in point]
        extra = [n for n in point if n not in self.names]
        if missing or extra:
            raise PointSpaceMismatch(f"point keys differ from space: missing={missing} extra={extra}")
        bad = [s.name for s in self.specs if not s.contains(point[s.name])]
        if bad:
            raise PointSpaceMismatch(
                "values out of range or of wrong type: "
                + ", ".join(f"{n}={point[n]!r}" for n in bad)
            )

    def sample(self, rng: np.random.Generator) -> dict:
        return {s.name: s.sample(rng) for s in self.specs}

    def to_dict(self) -> dict:
        return {"specs": [s.to_dict() for s in self.specs], "fixed": dict(self.fixed)}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SearchSpace":
        return cls(tuple(spec_from_dict(d) for d in doc.get("specs", ())), dict(doc.get("fixed", {})))


def parse_range(name: str, raw):
    """Turn one ``workflow_options`` entry into a ParamSpec or a fixed value.

    Lists are ranges; anything else is returned unchanged as a fixed input.
    """
    if not isinstance(raw, (list, tuple)):
        return raw
    items = list(raw)
    if not items:
        raise MalformedRange(f"{name}: empty range")

    if len(items) == 3 and isinstance(items[2], str):
        lo, hi, tag = items
        if tag != "log" or not (_is_real(lo) and _is_real(hi)):
            raise MalformedRange(f"{name}: expected [float1, float2, \"log\"], got {raw!r}")
        return Logarithmic(name, float(lo), float(hi))

    if all(isinstance(v, str) for v in items):
        return Categorical(name, tuple(items))

    if len(items) == 2 and all(_is_real(v) for v in items):
        lo, hi = items
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise MalformedRange(f"{name}: bounds must be finite, got {raw!r}")
        if _is_int(lo) and _is_int(hi):
            return Discrete(name, int(lo), int(hi))
        if _is_int(lo) != _is_int(hi):
            warnings.warn(f"{name}: mixed int/float range {raw!r} treated as continuous", stacklevel=2)
        return Continuous(name, float(lo), float(hi))

    raise MalformedRange(f"{name}: unrecognised range form {raw!r}")


def parse_space(options: Mapping[str, Any]) -> SearchSpace:
    specs, fixed = [], {}
    for name, raw in options.items():
        parsed = parse_range(name, raw)
        if isinstance(parsed, ParamSpec):
            specs.append(parsed)
        else:
            fixed[name] = parsed
    return SearchSpace(tuple(specs), fixed)


def contains(spec: ParamSpec, value) -> bool:
    return spec.contains(value)


def to_unit_cube(space: SearchSpace, point: Mapping[str, Any]) -> np.ndarray:
    space.check(point)
    return np.array([s.to_unit(point[s.name]) for s in space.specs], dtype=float)


def from_unit_cube(space: SearchSpace, u: Sequence[float]) -> dict:
    u = np.asarray(u, dtype=float)
    if u.shape != (len(space.specs),):
        raise PointSpaceMismatch(f"expected {len(space.specs)} coordinates, got shape {u.shape}")
    return {s.name: s.from_unit(x) for s, x in zip(space.specs, u)}


def encode_many(space: SearchSpace, points: Sequence[Mapping[str, Any]]) -> np.ndarray:
    """Unit-cube matrix for a batch of points (no validation, for hot paths)."""
    out = np.empty((len(points), len(space.specs)))
    for i, p in enumerate(points):
        for j, s in enumerate(space.specs):
            out[i, j] = s.to_unit(p[s.name])
    return out
