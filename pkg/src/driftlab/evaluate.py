"""Experiment harness: config, alarm scoring, prequential runs, report files.

A config names a dataset (optionally confounded), a learner, a detector, a
method (exstream or ebc), and seeds; ``run_experiment`` executes every seed
deterministically and scores the alarm trace against the dataset's gold drift
schedule with a greedy matcher under an acceptable-delay window.

Outputs: ``summary.json`` (config echo + per-seed and aggregate numbers),
``trace_<seed>.csv`` (one row per stream step), ``events_<seed>.json``
(alarms and queries with payloads). Re-running an identical config produces
bitwise-identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from driftlab._core import BACKEND
from driftlab.detectors import ADWIN, DDM, Detector, PageHinkley
from driftlab.ebc import EbcConfig, ExperimentSession
from driftlab.explain import Background
from driftlab.exstream import ExstreamConfig, ExstreamMonitor
from driftlab.learners import make_learner
from driftlab.streams import (
    ConfoundSpec,
    FeatureSchema,
    Instance,
    StreamSpec,
    apply_confound,
    c_electricity_confound,
    c_stagger_confound,
    electricity_schema,
    gold_drifts,
    load_csv_stream,
    stagger_schema,
    stagger_stream,
    synth_electricity_stream,
)


class ConfigError(ValueError):
    """Invalid experiment config; message carries the offending field path."""


# ---------------------------------------------------------------------------
# config


def _require(mapping: dict, path: str, key: str, kind, default=None, required=False):
    if key not in mapping or mapping[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}: required field is missing")
        return default
    value = mapping[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(
            f"{path}.{key}: expected {getattr(kind, '__name__', kind)}, got {value!r}"
        )
    return value


def _reject_unknown(mapping: dict, path: str, allowed: set[str]) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown field (valid: {sorted(allowed)})")


@dataclass
class DatasetConfig:
    id: str = "stagger"
    confounded: bool = False
    total: int = 40000
    segment_len: int = 10000
    concepts: tuple[str, ...] = ("phi1", "phi2", "phi3", "phi1")
    drift_times: tuple[int, ...] = ()  # synthetic only
    csv_path: str | None = None
    label_column: str = "class"
    normalize: bool = False

    KNOWN_IDS = ("stagger", "electricity", "synthetic")

    @classmethod
    def from_dict(cls, raw: dict, path: str = "dataset") -> "DatasetConfig":
        _reject_unknown(
            raw,
            path,
            {
                "id",
                "confounded",
                "total",
                "segment_len",
                "concepts",
                "drift_times",
                "csv_path",
                "label_column",
                "normalize",
            },
        )
        dataset_id = _require(raw, path, "id", str, required=True)
        if dataset_id not in cls.KNOWN_IDS:
            raise ConfigError(f"{path}.id: unknown dataset {dataset_id!r} (valid: {list(cls.KNOWN_IDS)})")
        cfg = cls(
            id=dataset_id,
            confounded=_require(raw, path, "confounded", bool, default=False),
            total=_require(raw, path, "total", int, default=40000),
            segment_len=_require(raw, path, "segment_len", int, default=10000),
            concepts=tuple(_require(raw, path, "concepts", list, default=["phi1", "phi2", "phi3", "phi1"])),
            drift_times=tuple(_require(raw, path, "drift_times", list, default=[])),
            csv_path=_require(raw, path, "csv_path", str, default=None),
            label_column=_require(raw, path, "label_column", str, default="class"),
            normalize=_require(raw, path, "normalize", bool, default=False),
        )
        if cfg.id == "electricity" and cfg.csv_path is None:
            raise ConfigError(f"{path}.csv_path: required for the electricity dataset")
        if cfg.id == "stagger" and cfg.total != cfg.segment_len * len(cfg.concepts):
            raise ConfigError(
                f"{path}.total: must equal segment_len*len(concepts)"
                f"={cfg.segment_len * len(cfg.concepts)}, got {cfg.total}"
            )
        for d in cfg.drift_times:
            if not 0 <= d < cfg.total:
                raise ConfigError(f"{path}.drift_times: {d} outside [0, {cfg.total})")
        return cfg


@dataclass
class LearnerConfig:
    kind: str = "nb"
    alpha: float = 1.0
    decay: float = 0.999  # NB effective memory ~1000 instances
    learning_rate: float = 0.05
    lam: float = 1e-4

    @classmethod
    def from_dict(cls, raw: dict, path: str = "learner") -> "LearnerConfig":
        _reject_unknown(raw, path, {"kind", "alpha", "decay", "learning_rate", "lam"})
        kind = _require(raw, path, "kind", str, default="nb")
        if kind not in ("nb", "lr", "svm"):
            raise ConfigError(f"{path}.kind: unknown learner {kind!r} (valid: ['nb', 'lr', 'svm'])")
        return cls(
            kind=kind,
            alpha=_require(raw, path, "alpha", float, default=1.0),
            decay=_require(raw, path, "decay", float, default=0.999),
            learning_rate=_require(raw, path, "learning_rate", float, default=0.05),
            lam=_require(raw, path, "lam", float, default=1e-4),
        )

    def build(self, schema: FeatureSchema):
        if self.kind == "nb":
            return make_learner("nb", schema, alpha=self.alpha, decay=self.decay)
        if self.kind == "lr":
            return make_learner("lr", schema, learning_rate=self.learning_rate)
        return make_learner("svm", schema, lam=self.lam)


@dataclass
class DetectorConfig:
    kind: str = "ddm"
    warmup: int = 30
    delta: float = 0.002
    max_buckets: int = 5
    ph_delta: float = 0.005
    ph_lambda: float = 3.0

    @classmethod
    def from_dict(cls, raw: dict, path: str = "detector") -> "DetectorConfig":
        _reject_unknown(raw, path, {"kind", "warmup", "delta", "max_buckets", "ph_delta", "ph_lambda"})
        kind = _require(raw, path, "kind", str, default="ddm")
        if kind not in ("ddm", "adwin", "ph"):
            raise ConfigError(f"{path}.kind: unknown detector {kind!r} (valid: ['ddm', 'adwin', 'ph'])")
        return cls(
            kind=kind,
            warmup=_require(raw, path, "warmup", int, default=30),  # cadence-point scale
            delta=_require(raw, path, "delta", float, default=0.002),
            max_buckets=_require(raw, path, "max_buckets", int, default=5),
            ph_delta=_require(raw, path, "ph_delta", float, default=0.005),
            ph_lambda=_require(raw, path, "ph_lambda", float, default=3.0),
        )

    def build(self) -> Detector:
        if self.kind == "ddm":
            return DDM(warmup=self.warmup)
        if self.kind == "adwin":
            return ADWIN(delta=self.delta, max_buckets=self.max_buckets)
        return PageHinkley(delta=self.ph_delta, lam=self.ph_lambda)


@dataclass
class OracleConfig:
    kind: str = "simulated"
    gt_spurious: tuple[str, ...] | None = None  # None: derive from the confound
    top_m: int = 3
    replay_path: str | None = None

    @classmethod
    def from_dict(cls, raw: dict, path: str = "oracle") -> "OracleConfig":
        _reject_unknown(raw, path, {"kind", "gt_spurious", "top_m", "replay_path"})
        kind = _require(raw, path, "kind", str, default="simulated")
        if kind not in ("simulated", "human", "replay"):
            raise ConfigError(
                f"{path}.kind: unknown oracle {kind!r} (valid: ['simulated', 'human', 'replay'])"
            )
        gt = raw.get("gt_spurious")
        if gt is not None and not isinstance(gt, list):
            raise ConfigError(f"{path}.gt_spurious: expected list of feature names")
        return cls(
            kind=kind,
            gt_spurious=None if gt is None else tuple(gt),
            top_m=_require(raw, path, "top_m", int, default=3),
            replay_path=_require(raw, path, "replay_path", str, default=None),
        )


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig
    learner: LearnerConfig
    detector: DetectorConfig
    method: str
    exstream: ExstreamConfig
    ebc: EbcConfig
    oracle: OracleConfig
    background_capacity: int = 100
    delay_window: int = 1000
    seeds: tuple[int, ...] = (1,)
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config: expected a JSON/TOML object at top level")
        _reject_unknown(
            raw,
            "config",
            {
                "dataset",
                "learner",
                "detector",
                "method",
                "exstream",
                "ebc",
                "oracle",
                "background_capacity",
                "delay_window",
                "seeds",
                "output_dir",
            },
        )
        method = raw.get("method", "exstream")
        if method not in ("exstream", "ebc"):
            raise ConfigError(f"config.method: unknown method {method!r} (valid: ['exstream', 'ebc'])")
        exstream_raw = dict(raw.get("exstream", {}))
        _reject_unknown(
            exstream_raw,
            "exstream",
            {"cadence", "ref_window", "ref_mode", "agg_points", "theta", "dissimilarity", "n_perms", "explain_mode", "top_k"},
        )
        try:
            exstream_cfg = ExstreamConfig(**exstream_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"exstream: {exc}") from exc
        ebc_raw = dict(raw.get("ebc", {}))
        _reject_unknown(
            ebc_raw,
            "ebc",
            {"tau", "tau_ratio", "top_m", "k_copies", "q", "cooldown", "buffer_capacity"},
        )
        try:
            ebc_cfg = EbcConfig(**ebc_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"ebc: {exc}") from exc
        seeds = raw.get("seeds", [1])
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
            raise ConfigError("config.seeds: expected a non-empty list of integers")
        delay_window = _require(raw, "config", "delay_window", int, default=1000)
        if delay_window < 0:
            raise ConfigError("config.delay_window: must be >= 0")
        background = _require(raw, "config", "background_capacity", int, default=100)
        if background < 1:
            raise ConfigError("config.background_capacity: must be >= 1")
        cfg = cls(
            dataset=DatasetConfig.from_dict(dict(raw.get("dataset", {}))),
            learner=LearnerConfig.from_dict(dict(raw.get("learner", {}))),
            detector=DetectorConfig.from_dict(dict(raw.get("detector", {}))),
            method=method,
            exstream=exstream_cfg,
            ebc=ebc_cfg,
            oracle=OracleConfig.from_dict(dict(raw.get("oracle", {}))),
            background_capacity=background,
            delay_window=delay_window,
            seeds=tuple(seeds),
            output_dir=_require(raw, "config", "output_dir", str, default="out"),
        )
        return cfg

    def to_dict(self) -> dict:
        return {
            "dataset": {
                "id": self.dataset.id,
                "confounded": self.dataset.confounded,
                "total": self.dataset.total,
                "segment_len": self.dataset.segment_len,
                "concepts": list(self.dataset.concepts),
                "drift_times": list(self.dataset.drift_times),
                "csv_path": self.dataset.csv_path,
                "label_column": self.dataset.label_column,
                "normalize": self.dataset.normalize,
            },
            "learner": {
                "kind": self.learner.kind,
                "alpha": self.learner.alpha,
                "decay": self.learner.decay,
                "learning_rate": self.learner.learning_rate,
                "lam": self.learner.lam,
            },
            "detector": {
                "kind": self.detector.kind,
                "warmup": self.detector.warmup,
                "delta": self.detector.delta,
                "max_buckets": self.detector.max_buckets,
                "ph_delta": self.detector.ph_delta,
                "ph_lambda": self.detector.ph_lambda,
            },
            "method": self.method,
            "exstream": {
                "cadence": self.exstream.cadence,
                "ref_window": self.exstream.ref_window,
                "ref_mode": self.exstream.ref_mode,
                "agg_points": self.exstream.agg_points,
                "theta": self.exstream.theta,
                "dissimilarity": self.exstream.dissimilarity,
                "n_perms": self.exstream.n_perms,
                "explain_mode": self.exstream.explain_mode,
                "top_k": self.exstream.top_k,
            },
            "ebc": {
                "tau": self.ebc.tau,
                "tau_ratio": self.ebc.tau_ratio,
                "top_m": self.ebc.top_m,
                "k_copies": self.ebc.k_copies,
                "q": self.ebc.q,
                "cooldown": self.ebc.cooldown,
                "buffer_capacity": self.ebc.buffer_capacity,
            },
            "oracle": {
                "kind": self.oracle.kind,
                "gt_spurious": None if self.oracle.gt_spurious is None else list(self.oracle.gt_spurious),
                "top_m": self.oracle.top_m,
                "replay_path": self.oracle.replay_path,
            },
            "background_capacity": self.background_capacity,
            "delay_window": self.delay_window,
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
        }


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a JSON or TOML experiment config file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config: file not found: {p}")
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".toml":
        try:
            import tomllib  # py311+
        except ImportError:
            import tomli as tomllib  # type: ignore[no-redef]
        raw = tomllib.loads(text)
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(raw)


def apply_overrides(raw: dict, overrides: dict[str, Any]) -> dict:
    """Apply dotted-path overrides (e.g. {"exstream.theta": 0.2}) to a raw
    config dict; returns a deep-enough copy."""
    out = json.loads(json.dumps(raw))
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = out
        for key in parts[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r}: {key} is not an object")
        node[parts[-1]] = value
    return out


# ---------------------------------------------------------------------------
# stream construction


def confound_for(dataset_id: str) -> ConfoundSpec:
    if dataset_id == "stagger":
        return c_stagger_confound()
    return c_electricity_confound()


def gold_for(cfg: DatasetConfig) -> set[int]:
    """Gold drift schedule implied by the dataset config (no stream needed)."""
    if cfg.id == "stagger":
        return {cfg.segment_len * k for k in range(1, len(cfg.concepts))}
    if cfg.id == "synthetic":
        return set(cfg.drift_times)
    return gold_drifts("electricity")


def build_stream(cfg: DatasetConfig, seed: int) -> tuple[list[Instance], FeatureSchema, set[int]]:
    """Materialize the configured stream; returns (instances, schema, gold drifts)."""
    if cfg.id == "stagger":
        schema = stagger_schema()
        spec = StreamSpec(total=cfg.total, segment_len=cfg.segment_len, concepts=cfg.concepts, seed=seed)
        stream = stagger_stream(spec)
        gold = set(spec.drift_times)
    elif cfg.id == "synthetic":
        schema = electricity_schema()
        stream = synth_electricity_stream(cfg.total, cfg.drift_times, seed)
        gold = gold_drifts("synthetic", cfg.drift_times)
    else:  # electricity CSV
        schema = electricity_schema()
        result = load_csv_stream(
            cfg.csv_path, schema, cfg.label_column, normalize=cfg.normalize, on_error="raise"
        )
        stream = result.instances
        gold = gold_drifts("electricity")
    if cfg.confounded:
        stream = apply_confound(stream, confound_for(cfg.id), schema)
    return stream, schema, gold


def build_session(config: ExperimentConfig, seed: int,
                  replay_responses: Sequence[Sequence[str]] | None = None) -> tuple[ExperimentSession, set[int]]:
    """Construct one fully wired prequential session for a seed."""
    stream, schema, gold = build_stream(config.dataset, seed)
    seq = np.random.SeedSequence(seed)
    bg_seed, explainer_seed, session_seed = seq.spawn(3)
    model = config.learner.build(schema)
    monitor = ExstreamMonitor(
        config.exstream,
        config.detector.build(),
        explainer_seed=explainer_seed,
    )
    background = Background(config.background_capacity, seed=bg_seed)
    gt_spurious: tuple[str, ...]
    if config.oracle.gt_spurious is not None:
        gt_spurious = config.oracle.gt_spurious
    elif config.dataset.confounded:
        gt_spurious = confound_for(config.dataset.id).features
    else:
        gt_spurious = ()
    ebc_cfg = EbcConfig(
        tau=config.ebc.tau,
        tau_ratio=config.ebc.tau_ratio,
        top_m=config.oracle.top_m,
        k_copies=config.ebc.k_copies,
        q=config.ebc.q,
        cooldown=config.ebc.cooldown,
        buffer_capacity=config.ebc.buffer_capacity,
    )
    session = ExperimentSession(
        stream,
        schema,
        model,
        monitor,
        background,
        method=config.method,
        ebc_config=ebc_cfg,
        oracle_kind=config.oracle.kind,
        gt_spurious=gt_spurious,
        replay_responses=replay_responses,
        seed=int(session_seed.generate_state(1)[0]),
    )
    return session, gold


# ---------------------------------------------------------------------------
# alarm matching


@dataclass
class MatchReport:
    detected: int
    missed: int
    false_alarms: int
    duplicates: int
    delays: list[int]

    def to_dict(self) -> dict:
        return {
            "detected": self.detected,
            "missed": self.missed,
            "false_alarms": self.false_alarms,
            "duplicates": self.duplicates,
            "delays": list(self.delays),
        }


def match_alarms(alarms: Sequence[int], gold: Sequence[int], delay_window: int) -> MatchReport:
    """Greedy left-to-right matching of alarms to gold drifts.

    An alarm detects the earliest unmatched gold g with g <= a <= g+window;
    alarms landing in an already-detected window count as duplicates; the rest
    are false alarms. Same-step duplicate input alarms are deduped first.
    """
    if delay_window < 0:
        raise ValueError("delay_window must be >= 0")
    alarm_list = sorted(set(int(a) for a in alarms))
    gold_list = sorted(set(int(g) for g in gold))
    matched: dict[int, int] = {}
    false_alarms = 0
    duplicates = 0
    for a in alarm_list:
        target = None
        for g in gold_list:
            if g <= a <= g + delay_window and g not in matched:
                target = g
                break
        if target is not None:
            matched[target] = a - target
            continue
        if any(g <= a <= g + delay_window for g in gold_list):
            duplicates += 1
        else:
            false_alarms += 1
    delays = [matched[g] for g in gold_list if g in matched]
    return MatchReport(
        detected=len(matched),
        missed=len(gold_list) - len(matched),
        false_alarms=false_alarms,
        duplicates=duplicates,
        delays=delays,
    )


# ---------------------------------------------------------------------------
# experiment execution


@dataclass
class RunResult:
    """Everything one (config, seed) run produced."""

    seed: int
    report: MatchReport
    query_count: int
    accuracy: float
    alarm_steps: list[int]
    query_steps: list[int]
    error_bits: list[int]
    cadence_steps: list[int]
    dissimilarities: list[float]
    entropies: list[float]
    verdicts: list[int]
    events: list[dict]
    spurious: list[str]

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            **self.report.to_dict(),
            "query_count": self.query_count,
            "accuracy": round(self.accuracy, 6),
            "alarms": list(self.alarm_steps),
            "queries": list(self.query_steps),
            "spurious": list(self.spurious),
        }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    gold: list[int]
    runs: list[RunResult]

    def aggregate(self) -> dict:
        n = len(self.runs)
        mean = lambda xs: sum(xs) / n if n else 0.0
        return {
            "n_seeds": n,
            "gold": list(self.gold),
            "mean_detected": mean([r.report.detected for r in self.runs]),
            "mean_false_alarms": mean([r.report.false_alarms for r in self.runs]),
            "mean_duplicates": mean([r.report.duplicates for r in self.runs]),
            "mean_query_count": mean([r.query_count for r in self.runs]),
            "mean_accuracy": round(mean([r.accuracy for r in self.runs]), 6),
        }

    def summary_dict(self) -> dict:
        return {
            "backend": BACKEND,
            "config": self.config.to_dict(),
            "per_seed": [r.summary() for r in self.runs],
            "aggregate": self.aggregate(),
        }


def run_single(config: ExperimentConfig, seed: int,
               replay_responses: Sequence[Sequence[str]] | None = None) -> RunResult:
    if config.oracle.kind == "human" and replay_responses is None:
        raise ConfigError(
            "oracle.kind: human sessions run through the service API; "
            "use kind=simulated or kind=replay here"
        )
    session, gold = build_session(config, seed, replay_responses=replay_responses)
    state = session.run()
    assert state == "finished"
    alarm_steps = [a.t for a in session.alarms]
    report = match_alarms(alarm_steps, sorted(gold), config.delay_window)
    errors = session.error_bits
    accuracy = 1.0 - (sum(errors) / len(errors) if errors else 0.0)
    return RunResult(
        seed=seed,
        report=report,
        query_count=len(session.queries),
        accuracy=accuracy,
        alarm_steps=alarm_steps,
        query_steps=[q.t for q in session.queries],
        error_bits=errors,
        cadence_steps=[p.t for p in session.cadence_trace],
        dissimilarities=[p.dissimilarity for p in session.cadence_trace],
        entropies=[p.entropy for p in session.cadence_trace],
        verdicts=[int(p.verdict) for p in session.cadence_trace],
        events=session.events_since(0),
        spurious=session.spurious_names,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute every configured seed; deterministic per (config, seed)."""
    if config.oracle.kind == "human":
        raise ConfigError(
            "oracle.kind: human sessions run through the service API; "
            "use kind=simulated or kind=replay here"
        )
    replay = None
    if config.oracle.kind == "replay":
        if not config.oracle.replay_path:
            raise ConfigError("oracle.replay_path: required when oracle.kind is replay")
        with open(config.oracle.replay_path, encoding="utf-8") as fh:
            replay = json.load(fh)
    runs = [run_single(config, seed, replay_responses=replay) for seed in config.seeds]
    return ExperimentResult(config=config, gold=sorted(gold_for(config.dataset)), runs=runs)


# ---------------------------------------------------------------------------
# report emission


TRACE_COLUMNS = ["step", "error", "dissimilarity", "entropy", "verdict", "alarm", "query"]


def emit_report(result: ExperimentResult, output_dir: str | Path, formats: Sequence[str] = ("json", "csv")) -> list[Path]:
    """Write summary.json plus per-seed trace CSVs and event JSONs."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "json" in formats:
        summary_path = out / "summary.json"
        summary_path.write_text(
            json.dumps(result.summary_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        written.append(summary_path)
        for run in result.runs:
            events_path = out / f"events_{run.seed}.json"
            events_path.write_text(
                json.dumps(run.events, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            written.append(events_path)
    if "csv" in formats:
        for run in result.runs:
            trace_path = out / f"trace_{run.seed}.csv"
            cadence_index = {t: i for i, t in enumerate(run.cadence_steps)}
            alarm_steps = set(run.alarm_steps)
            query_steps = set(run.query_steps)
            with open(trace_path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(TRACE_COLUMNS)
                for step, err in enumerate(run.error_bits):
                    ci = cadence_index.get(step)
                    writer.writerow(
                        [
                            step,
                            err,
                            "" if ci is None else repr(run.dissimilarities[ci]),
                            "" if ci is None else repr(run.entropies[ci]),
                            "" if ci is None else run.verdicts[ci],
                            1 if step in alarm_steps else "",
                            1 if step in query_steps else "",
                        ]
                    )
            written.append(trace_path)
    return written
