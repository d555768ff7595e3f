"""Engine kinds by name, and the ``run(kind, trace, config)`` entry point."""

from .cache import LRU, RANDOM, SRRIP
from .engine import ACCESS_COUNT, ALWAYS, ACICEngine, CacheOnlyEngine, IFilterEngine, VictimCacheEngine
from .oracle import OPTBypassEngine, OPTEngine

# kind -> (estimator class, fixed constructor params)
ENGINE_KINDS = {
    "lru_only": (CacheOnlyEngine, {"policy": LRU}),
    "srrip_only": (CacheOnlyEngine, {"policy": SRRIP}),
    "random_only": (CacheOnlyEngine, {"policy": RANDOM}),
    "ifilter_always_insert": (IFilterEngine, {"admission": ALWAYS}),
    "access_count_bypass": (IFilterEngine, {"admission": ACCESS_COUNT}),
    "victim_cache_lru": (VictimCacheEngine, {}),
    "acic": (ACICEngine, {}),
    "opt": (OPTEngine, {}),
    "opt_bypass": (OPTBypassEngine, {}),
}

ORACLE_KINDS = ("opt", "opt_bypass")


def engine_params(kind):
    """Names of the tunable constructor parameters of an engine kind."""
    cls, fixed = _lookup(kind)
    return sorted(set(cls().get_params()) - set(fixed))


def _lookup(kind):
    try:
        return ENGINE_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown engine kind {kind!r}; choose from {sorted(ENGINE_KINDS)}") from None


def make_engine(kind, **params):
    cls, fixed = _lookup(kind)
    clash = set(params) & set(fixed)
    if clash:
        raise ValueError(f"{kind}: parameter(s) {sorted(clash)} are fixed by the engine kind")
    unknown = set(params) - set(cls().get_params())
    if unknown:
        raise ValueError(f"{kind}: unknown parameter(s) {sorted(unknown)}")
    return cls(**fixed, **params)


def run(kind, trace, config=None):
    """Simulate ``trace`` on a fresh engine of ``kind``; returns its ``RunStats``."""
    return make_engine(kind, **(config or {})).fit(trace).stats_
