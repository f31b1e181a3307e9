"""Strategies proposing the next parameter point from shared history."""
from .base import SAMPLER_NAMES, RandomSampler, Sampler, config_fields, make_sampler, random_suggest
from .nsga2 import NsgaConfig, NSGAIISampler, nsga2_suggest
from .tpe import TpeConfig, TPESampler, tpe_suggest
from ..pareto import crowding_distance, nondominated_sort

__all__ = [
    "SAMPLER_NAMES", "NSGAIISampler", "NsgaConfig", "RandomSampler", "Sampler", "TPESampler",
    "TpeConfig", "config_fields", "crowding_distance", "make_sampler", "nondominated_sort",
    "nsga2_suggest", "random_suggest", "tpe_suggest",
]
