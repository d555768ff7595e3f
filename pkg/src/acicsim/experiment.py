"""Experiment configs, the engine matrix runner, sweeps and report files.

A config names one trace source, a cache geometry shared by every engine,
and a list of engines. Running it yields a ``ReportBundle`` whose rows carry
the full parameter set of the engine that produced them.
"""

import csv
import io
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from sklearn.model_selection import ParameterGrid

from . import analysis
from .engine import RunStats
from .oracle import (
    NextUseIndex,
    annotate_decisions,
    replacement_accuracy,
    run_opt,
    score_decisions,
)
from .registry import ENGINE_KINDS, engine_params, make_engine
from .storage import acic_storage_params, storage_summary
from .trace import SyntheticKind, SyntheticSpec, TraceFormat, generate, read_trace

BASELINE_PREFERENCE = ("ifilter_always_insert", "lru_only")
GEOMETRY_KEYS = ("size_bytes", "ways", "block_bits")
RESULT_COLUMNS = (
    ["name", "kind"] + RunStats.field_names()
    + ["mpki", "insert_rate", "mpki_reduction", "opt_fraction", "replacement_accuracy", "storage_kb", "config"]
)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TraceFileConfig(_Strict):
    path: str
    format: TraceFormat = TraceFormat.TEXT_HEX


class SyntheticConfig(_Strict):
    kind: SyntheticKind
    block_count: int = Field(ge=1)
    burst_length: int = Field(default=1, ge=1)
    repetitions: int = Field(default=1, ge=1)
    seed: Optional[int] = Field(default=None, ge=0, lt=1 << 64)
    oneshot_ratio: float = Field(default=1.0, ge=0)

    def spec(self, seed, block_bits):
        return SyntheticSpec(self.kind, self.block_count, self.burst_length, self.repetitions,
                             seed if self.seed is None else self.seed, self.oneshot_ratio, block_bits)


class TraceConfig(_Strict):
    file: Optional[TraceFileConfig] = None
    synthetic: Optional[SyntheticConfig] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.file is None) == (self.synthetic is None):
            raise ValueError("give exactly one of 'file' or 'synthetic'")
        return self


class GeometryConfig(_Strict):
    size_bytes: int = Field(default=32768, ge=1)
    ways: int = Field(default=8, ge=1)
    block_bits: int = Field(default=6, ge=0, le=32)


class EngineConfig(_Strict):
    kind: str
    name: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("kind")
    @classmethod
    def _known_kind(cls, kind):
        if kind not in ENGINE_KINDS:
            raise ValueError(f"unknown engine kind {kind!r}; choose from {sorted(ENGINE_KINDS)}")
        return kind

    @model_validator(mode="after")
    def _known_params(self):
        allowed = set(engine_params(self.kind))
        unknown = set(self.params) - allowed
        if unknown:
            raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {self.kind}; "
                             f"allowed: {sorted(allowed)}")
        clash = set(self.params) & set(GEOMETRY_KEYS)
        if clash:
            raise ValueError(f"{sorted(clash)} belong in the top-level 'geometry' block")
        return self

    @property
    def label(self):
        return self.name or self.kind


class OracleConfig(_Strict):
    opt_reference: bool = True
    decision_accuracy: bool = False
    replacement_accuracy: bool = False


class AnalysisConfig(_Strict):
    histogram: bool = False
    markov: bool = False


class ExperimentConfig(_Strict):
    trace: TraceConfig
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    engines: List[EngineConfig] = Field(min_length=1)
    baseline: Optional[str] = None
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    output_dir: str = "reports"
    seed: int = Field(default=0, ge=0, lt=1 << 64)
    warmup: int = Field(default=0, ge=0)
    jobs: int = Field(default=1, ge=1)
    sweep: Optional[Dict[str, List[Any]]] = None

    @model_validator(mode="after")
    def _names(self):
        labels = [e.label for e in self.engines]
        dup = sorted({x for x in labels if labels.count(x) > 1})
        if dup:
            raise ValueError(f"duplicate engine name(s) {dup}; set 'name' to tell them apart")
        if self.baseline is not None and self.baseline not in labels:
            raise ValueError(f"baseline {self.baseline!r} is not one of the engines {labels}")
        return self


def _format_validation_error(err):
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def load_config(source, overrides=None):
    """Validate a config from a dict, a JSON string path, or a ``Path``.

    ``overrides`` (e.g. ``{"seed": 3}``) replace top-level fields before
    validation. Raises ``ConfigError`` naming the failing field path.
    """
    if isinstance(source, ExperimentConfig):
        data = source.model_dump(mode="json")
    elif isinstance(source, dict):
        data = dict(source)
    else:
        try:
            data = json.loads(Path(source).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from None


def load_trace(config):
    """Addresses of the configured trace as a uint64 array."""
    src, bits = config.trace, config.geometry.block_bits
    if src.file is not None:
        return read_trace(src.file.path, src.file.format)
    return generate(src.synthetic.spec(config.seed, bits))


@dataclass
class _Job:
    name: str
    kind: str
    params: dict


def _engine_params(config, engine, extra=None):
    """Full constructor parameters for one engine, geometry and run settings included."""
    allowed = set(engine_params(engine.kind))
    params = {k: getattr(config.geometry, k) for k in GEOMETRY_KEYS if k in allowed}
    if "warmup" in allowed:
        params["warmup"] = config.warmup
    if "seed" in allowed:
        params["seed"] = config.seed
    if config.oracle.decision_accuracy and "record_decisions" in allowed:
        params["record_decisions"] = True
    if config.oracle.replacement_accuracy and "record_evictions" in allowed:
        params["record_evictions"] = True
    params.update(engine.params)
    params.update(extra or {})
    return params


def _make_job(name, kind, params):
    """Build a job, surfacing constructor-level parameter errors as ``ConfigError``."""
    try:
        probe = make_engine(kind, **params).fit(np.zeros(0, dtype=np.uint64))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"engines.{name}: {exc}") from None
    # record defaults too, so each row names every parameter it ran with
    tunable = set(engine_params(kind))
    full = {k: v for k, v in probe.get_params().items() if k in tunable}
    return _Job(name, kind, full)


def _run_job(job, trace):
    est = make_engine(job.kind, **job.params).fit(trace)
    return {
        "stats": est.stats_,
        "decisions": list(getattr(est, "decisions_", []) or []),
        "evictions": list(getattr(est, "evictions_", []) or []),
    }


@dataclass
class ReportBundle:
    """Everything one experiment produced; ``write`` turns it into files."""

    config: dict
    rows: List[dict]
    histogram: Optional[dict] = None
    markov: Optional[analysis.MarkovMatrix] = None
    decision_accuracy: Dict[str, list] = field(default_factory=dict)
    storage: Optional[dict] = None
    sweep: Optional[dict] = None

    def row(self, name):
        for r in self.rows:
            if r["name"] == name:
                return r
        raise KeyError(name)

    def files(self):
        """``{filename: text}`` for every report file, in a fixed order."""
        out = {"results.csv": _csv(RESULT_COLUMNS, [
            {**r, "config": json.dumps(r["config"], sort_keys=True)} for r in self.rows
        ])}
        if self.histogram is not None:
            out["histogram.csv"] = _csv(["bucket", "count"],
                                        [{"bucket": k, "count": v} for k, v in self.histogram.items()])
        if self.markov is not None:
            out["markov.csv"] = _csv(["from", "to", "count", "probability"], [
                dict(zip(("from", "to", "count", "probability"), r)) for r in self.markov.rows()
            ])
        if self.decision_accuracy:
            rows = [
                {"engine": name, "bucket": b, "correct": c, "total": n, "accuracy": _num(a)}
                for name, table in self.decision_accuracy.items()
                for b, c, n, a in table
            ]
            out["decision_accuracy.csv"] = _csv(["engine", "bucket", "correct", "total", "accuracy"], rows)
        if self.storage is not None:
            out["storage.csv"] = _csv(list(self.storage["items"][0]), self.storage["items"])
        manifest = {
            "config": self.config,
            "engines": [r["name"] for r in self.rows],
            "storage_total_kb": None if self.storage is None else self.storage["total_kb"],
            "sweep": self.sweep,
            "files": sorted(out) + ["manifest.json"],
        }
        out["manifest.json"] = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        return out

    def write(self, output_dir=None):
        """Write every report file atomically; returns the written paths."""
        target = Path(output_dir or self.config["output_dir"])
        target.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, text in self.files().items():
            paths.append(atomic_write(target / name, text))
        return paths


def _num(x):
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return round(float(x), 6)


def _csv(columns, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
    return buf.getvalue()


def atomic_write(path, text):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _pick_baseline(config, names_by_kind):
    if config.baseline is not None:
        return config.baseline
    for kind in BASELINE_PREFERENCE:
        if kind in names_by_kind:
            return names_by_kind[kind]
    return None


def _execute(jobs, trace, n_jobs):
    if n_jobs <= 1 or len(jobs) <= 1:
        return [_run_job(j, trace) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(n_jobs, len(jobs))) as pool:
        futures = [pool.submit(_run_job, j, trace) for j in jobs]
        return [f.result() for f in futures]


def _assemble(config, jobs, trace, sweep_info=None):
    results = _execute(jobs, trace, config.jobs)
    need_index = config.oracle.decision_accuracy or config.oracle.replacement_accuracy
    frames = None
    if need_index or config.oracle.opt_reference or config.analysis.histogram or config.analysis.markov:
        frames = trace >> np.uint64(config.geometry.block_bits)
    index = NextUseIndex(frames) if need_index else None

    opt_stats = None
    for j, res in zip(jobs, results):
        if j.kind == "opt":
            opt_stats = res["stats"]
            break
    if opt_stats is None and config.oracle.opt_reference:
        from .cache import CacheGeometry

        geometry = CacheGeometry(**config.geometry.model_dump())
        opt_stats = run_opt(frames.tolist(), geometry, warmup=config.warmup)

    names_by_kind = {}
    for j in jobs:
        names_by_kind.setdefault(j.kind, j.name)
    base_name = _pick_baseline(config, names_by_kind)
    stats_by_name = {j.name: res["stats"] for j, res in zip(jobs, results)}
    base = stats_by_name.get(base_name)

    rows, accuracy = [], {}
    for j, res in zip(jobs, results):
        st = res["stats"]
        row = {"name": j.name, "kind": j.kind, **st.to_dict()}
        row["mpki"] = _num(st.mpki) if st.instructions else None
        row["insert_rate"] = _num(st.insert_rate)
        row["mpki_reduction"] = _num(analysis.mpki_reduction(st, base)) if base and base.misses else None
        frac = analysis.opt_fraction(st, base, opt_stats) if base and opt_stats else None
        row["opt_fraction"] = _num(frac)
        row["replacement_accuracy"] = None
        if index is not None and res["evictions"]:
            row["replacement_accuracy"] = _num(replacement_accuracy(res["evictions"], index))
        if index is not None and res["decisions"] and config.oracle.decision_accuracy:
            accuracy[j.name] = score_decisions(annotate_decisions(res["decisions"], index)).rows()
        row["storage_kb"] = None
        if j.kind == "acic":
            row["storage_kb"] = storage_summary(**acic_storage_params(j.params))["total_kb"]
        row["config"] = dict(sorted(j.params.items()))
        rows.append(row)

    bundle = ReportBundle(config=config.model_dump(mode="json"), rows=rows,
                          decision_accuracy=accuracy, sweep=sweep_info)
    if config.analysis.histogram or config.analysis.markov:
        d = analysis.stack_distances(frames)
        if config.analysis.histogram:
            bundle.histogram = analysis.histogram(frames, d)
        if config.analysis.markov:
            bundle.markov = analysis.markov(frames, d)
    acic = [e for e in config.engines if e.kind == "acic"]
    params = _engine_params(config, acic[0]) if acic else {"block_bits": config.geometry.block_bits}
    bundle.storage = storage_summary(**acic_storage_params(params))
    return bundle


def run_experiment(config, trace=None, write=True):
    """Run every configured engine over the trace and build the report.

    ``trace`` (an address array) skips loading from the config. Files are
    written to ``config.output_dir`` unless ``write`` is false.
    """
    config = load_config(config)
    if config.sweep is not None:
        return sweep(config, config.sweep, trace=trace, write=write)
    trace = load_trace(config) if trace is None else trace
    jobs = [_make_job(e.label, e.kind, _engine_params(config, e)) for e in config.engines]
    bundle = _assemble(config, jobs, trace)
    if write:
        bundle.write()
    return bundle


def sweep(config, grid, trace=None, write=True):
    """Cross-product of ``grid`` over every ACIC engine; other engines run once.

    ``grid`` maps ACIC parameter names to value lists. Rows from a grid
    point are named ``<engine>[k=v,...]`` unless the grid has one point.
    """
    config = load_config(config)
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ConfigError("sweep: parameter grid is empty")
    allowed = set(engine_params("acic"))
    unknown = set(grid) - allowed
    if unknown:
        raise ConfigError(f"sweep: unknown ACIC parameter(s) {sorted(unknown)}")
    points = list(ParameterGrid({k: list(v) for k, v in grid.items()}))
    trace = load_trace(config) if trace is None else trace
    jobs = []
    for e in config.engines:
        if e.kind != "acic":
            jobs.append(_make_job(e.label, e.kind, _engine_params(config, e)))
            continue
        for p in points:
            name = e.label if len(points) == 1 else e.label + "[" + ",".join(
                f"{k}={p[k]}" for k in sorted(p)) + "]"
            jobs.append(_make_job(name, e.kind, _engine_params(config, e, p)))
    info = {"grid": {k: list(v) for k, v in sorted(grid.items())}, "points": len(points)}
    bundle = _assemble(config, jobs, trace, sweep_info=info)
    if write:
        bundle.write()
    return bundle
