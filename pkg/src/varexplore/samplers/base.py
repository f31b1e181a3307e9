from __future__ import annotations

import abc
import dataclasses
from typing import Mapping, Sequence

import numpy as np

from ..errors import UnknownSampler
from ..paramspace import SearchSpace
from ..trialstore.model import Trial


class Sampler(abc.ABC):
    """Maps a study's shared history to the next point to evaluate.

    Samplers keep no state between calls: everything they learn comes from
    ``history`` (Complete trials in completion order) and ``rng``.
    """

    name = "Sampler"
    multi_objective = True

    @abc.abstractmethod
    def suggest(self, space: SearchSpace, history: Sequence[Trial], directions: Sequence[str],
                rng: np.random.Generator) -> dict: ...

    def check_directions(self, directions: Sequence[str]) -> None:
        pass

    def __repr__(self):
        cfg = getattr(self, "config", None)
        return f"{type(self).__name__}({cfg!r})" if cfg is not None else f"{type(self).__name__}()"


def random_suggest(space: SearchSpace, rng: np.random.Generator) -> dict:
    return space.sample(rng)


class RandomSampler(Sampler):
    name = "RandomSampler"

    def suggest(self, space, history, directions, rng):
        return random_suggest(space, rng)


def _registry():
    from .nsga2 import NSGAIISampler
    from .tpe import TPESampler

    return {
        "RandomSampler": RandomSampler,
        "TPESampler": TPESampler,
        "NSGAIISampler": NSGAIISampler,
    }


SAMPLER_NAMES = ("RandomSampler", "TPESampler", "NSGAIISampler")


def config_fields(identifier: str) -> set[str]:
    cls = _registry()[identifier]
    cfg = getattr(cls, "config_class", None)
    return {f.name for f in dataclasses.fields(cfg)} if cfg else set()


def make_sampler(identifier: str, overrides: Mapping | None = None) -> Sampler:
    """Build a sampler from its payload name.

    ``overrides`` may carry config keys for any sampler; keys the chosen
    sampler does not know are ignored.
    """
    reg = _registry()
    if identifier not in reg:
        raise UnknownSampler(f"unknown sampler {identifier!r}; expected one of {', '.join(SAMPLER_NAMES)}")
    cls = reg[identifier]
    cfg_cls = getattr(cls, "config_class", None)
    if cfg_cls is None:
        return cls()
    known = {f.name for f in dataclasses.fields(cfg_cls)}
    kwargs = {k: v for k, v in (overrides or {}).items() if k in known}
    return cls(cfg_cls(**kwargs))
