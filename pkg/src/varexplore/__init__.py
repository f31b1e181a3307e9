"""Multi-agent black-box calibration and sensitivity analysis of workflows."""
from .driver import StudyResult, run_study, validate_payload
from .fanova import ForestConfig, ImportanceReport, importances
from .paramspace import Categorical, Continuous, Discrete, Logarithmic, SearchSpace, parse_range, parse_space
from .samplers import make_sampler
from .trialstore import FileStore, MemoryStore, RemoteStore, open_store

__version__ = "0.1.0"

__all__ = [
    "Categorical", "Continuous", "Discrete", "FileStore", "ForestConfig", "ImportanceReport",
    "Logarithmic", "MemoryStore", "RemoteStore", "SearchSpace", "StudyResult", "importances",
    "make_sampler", "open_store", "parse_range", "parse_space", "run_study", "validate_payload",
]
