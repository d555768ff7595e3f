"""Trace-driven instruction-cache lab: ACIC admission control, baselines and oracles."""

from .analysis import (
    FIRST_ACCESS,
    MarkovMatrix,
    ReuseDistanceTransformer,
    histogram,
    markov,
    mpki,
    mpki_reduction,
    opt_fraction,
    stack_distance,
    stack_distances,
)
from .cache import CacheGeometry, SetAssociativeCache, VictimCache, victim_cache_cycle
from .cshr import Cshr, CshrConfig, Resolution, partial_tag_of
from .engine import (
    ACICEngine,
    CacheOnlyEngine,
    IFilterEngine,
    InvariantError,
    RunStats,
    VictimCacheEngine,
)
from .experiment import ConfigError, ExperimentConfig, ReportBundle, load_config, run_experiment, sweep
from .ifilter import IFilter
from .oracle import (
    INFINITE,
    NextUseIndex,
    OPTBypassEngine,
    OPTEngine,
    build_next_use,
    replacement_accuracy,
    run_opt,
    score_decisions,
)
from .predictor import AdmissionPredictor, Outcome, PredictorConfig, hash_tag
from .registry import ENGINE_KINDS, make_engine, run
from .storage import storage_overhead, storage_summary
from .trace import SyntheticKind, SyntheticSpec, TraceFormat, generate, read_trace, write_trace

__version__ = "0.1.0"

__all__ = [
    "ACICEngine", "AdmissionPredictor", "CacheGeometry", "CacheOnlyEngine", "ConfigError", "Cshr",
    "CshrConfig", "ENGINE_KINDS", "ExperimentConfig", "FIRST_ACCESS", "IFilter", "IFilterEngine",
    "INFINITE", "InvariantError", "MarkovMatrix", "NextUseIndex", "OPTBypassEngine", "OPTEngine",
    "Outcome", "PredictorConfig", "ReportBundle", "Resolution", "ReuseDistanceTransformer",
    "RunStats", "SetAssociativeCache", "SyntheticKind", "SyntheticSpec", "TraceFormat",
    "VictimCache", "VictimCacheEngine", "build_next_use", "generate", "hash_tag", "histogram",
    "load_config", "make_engine", "markov", "mpki", "mpki_reduction", "opt_fraction",
    "partial_tag_of", "read_trace", "replacement_accuracy", "run", "run_experiment", "run_opt",
    "score_decisions", "stack_distance", "stack_distances", "storage_overhead", "storage_summary",
    "sweep", "victim_cache_cycle", "write_trace",
]
