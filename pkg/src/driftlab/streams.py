"""Drifting stream generation, spurious-correlation injection, and CSV ingestion.

Ground-truth streams come from the STAGGER generator (three rotating boolean
concepts over categorical attributes) or from a synthetic surrogate in the
electricity layout (six numeric features, piecewise-stationary labeling rule).
A ConfoundSpec overrides labels wherever its predicate holds, which is how the
confounded variants (c-stagger, c-electricity) are produced.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

STAGGER_CONCEPTS = ("phi1", "phi2", "phi3")

STAGGER_GOLD_DRIFTS = frozenset({10000, 20000, 30000})
ELECTRICITY_GOLD_DRIFTS = frozenset({3109, 18712, 37187})


class StreamError(ValueError):
    """Invalid stream spec, schema violation, or malformed input row."""


@dataclass(frozen=True, slots=True)
class Categorical:
    name: str
    values: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise StreamError(f"categorical feature {self.name!r} has no values")


@dataclass(frozen=True, slots=True)
class Numeric:
    name: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise StreamError(f"numeric feature {self.name!r} needs lo < hi")


Feature = Categorical | Numeric


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature declarations shared by generators, learners, explainers."""

    features: tuple[Feature, ...]

    def __post_init__(self) -> None:
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise StreamError(f"duplicate feature names: {names}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def arity(self) -> int:
        return len(self.features)

    def index_of(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise StreamError(f"unknown feature {name!r}; valid: {list(self.names)}")

    def validate_values(self, x: Sequence) -> None:
        if len(x) != self.arity:
            raise StreamError(f"expected {self.arity} values, got {len(x)}")
        for f, v in zip(self.features, x):
            if isinstance(f, Categorical):
                if v not in f.values:
                    raise StreamError(f"{f.name}={v!r} not in {list(f.values)}")
            else:
                if not (f.lo <= float(v) <= f.hi):
                    raise StreamError(f"{f.name}={v!r} outside [{f.lo}, {f.hi}]")

    def unit(self) -> "FeatureSchema":
        """Same schema with every numeric range replaced by [0, 1]."""
        feats: list[Feature] = []
        for f in self.features:
            feats.append(Numeric(f.name, 0.0, 1.0) if isinstance(f, Numeric) else f)
        return FeatureSchema(tuple(feats))


@dataclass(frozen=True, slots=True)
class Instance:
    """One timestamped observation: feature values aligned with a schema."""

    t: int
    x: tuple
    y: int


@dataclass(frozen=True)
class StreamSpec:
    """Piecewise-stationary stream layout: one concept per equal-length segment."""

    total: int
    segment_len: int
    concepts: tuple[str, ...]
    seed: int

    def __post_init__(self) -> None:
        if self.total != self.segment_len * len(self.concepts):
            raise StreamError(
                f"total={self.total} must equal segment_len*len(concepts)"
                f"={self.segment_len * len(self.concepts)}"
            )

    @property
    def drift_times(self) -> tuple[int, ...]:
        return tuple(
            self.segment_len * k for k in range(1, len(self.concepts))
        )

    def concept_at(self, t: int) -> str:
        return self.concepts[min(t // self.segment_len, len(self.concepts) - 1)]


@dataclass(frozen=True)
class ConfoundSpec:
    """Stationary hidden confounder: forces the label wherever predicate(x) holds.

    ``features`` names the features the predicate reads; it is metadata used by
    the simulated annotation oracle and by evaluation, not by apply_confound.
    """

    predicate: Callable[[dict], bool]
    forced_label: int
    features: tuple[str, ...] = field(default=())
    name: str = "confound"


def stagger_schema() -> FeatureSchema:
    return FeatureSchema(
        (
            Categorical("shape", ("circle", "square", "triangle")),
            Categorical("color", ("red", "blue", "green")),
            Categorical("size", ("small", "medium", "large")),
        )
    )


def electricity_schema() -> FeatureSchema:
    return FeatureSchema(
        (
            Numeric("period", 0.0, 1.0),
            Numeric("nswprice", 0.0, 1.0),
            Numeric("nswdemand", 0.0, 1.0),
            Numeric("vicprice", 0.0, 1.0),
            Numeric("vicdemand", 0.0, 1.0),
            Numeric("transfer", 0.0, 1.0),
        )
    )


def stagger_label(x: Sequence | dict, concept: str) -> int:
    """Evaluate one STAGGER concept on (shape, color, size) values.

    phi1: size=small and color=red; phi2: color=green or shape=square;
    phi3: size=medium or size=large.
    """
    if isinstance(x, dict):
        shape, color, size = x["shape"], x["color"], x["size"]
    else:
        shape, color, size = x
    if concept == "phi1":
        return int(size == "small" and color == "red")
    if concept == "phi2":
        return int(color == "green" or shape == "square")
    if concept == "phi3":
        return int(size in ("medium", "large"))
    raise StreamError(f"unknown concept {concept!r}; valid: {list(STAGGER_CONCEPTS)}")


def stagger_stream(spec: StreamSpec) -> list[Instance]:
    """Generate a STAGGER stream: attributes i.i.d. uniform, label from the
    segment's active concept. Deterministic given the spec seed."""
    for c in spec.concepts:
        if c not in STAGGER_CONCEPTS:
            raise StreamError(f"unknown concept {c!r}; valid: {list(STAGGER_CONCEPTS)}")
    schema = stagger_schema()
    rng = np.random.default_rng(spec.seed)
    domains = [f.values for f in schema.features if isinstance(f, Categorical)]
    draws = [rng.integers(0, len(d), size=spec.total) for d in domains]
    out: list[Instance] = []
    for t in range(spec.total):
        x = tuple(domains[j][draws[j][t]] for j in range(len(domains)))
        out.append(Instance(t=t, x=x, y=stagger_label(x, spec.concept_at(t))))
    return out


def apply_confound(stream: Iterable[Instance], confound: ConfoundSpec,
                   schema: FeatureSchema) -> list[Instance]:
    """Force y := forced_label wherever the confound predicate holds.

    Instances where the predicate fails keep their ground-truth label, so
    drift remains present in the unconfounded subpopulation.
    """
    names = schema.names
    out: list[Instance] = []
    for inst in stream:
        row = dict(zip(names, inst.x))
        try:
            hit = bool(confound.predicate(row))
        except KeyError as exc:
            raise StreamError(f"confound predicate reads unknown feature {exc}") from exc
        out.append(
            Instance(inst.t, inst.x, confound.forced_label) if hit else inst
        )
    return out


def c_stagger_confound() -> ConfoundSpec:
    """c-stagger rule: label 1 whenever color is green or shape is square."""
    return ConfoundSpec(
        predicate=lambda row: row["color"] == "green" or row["shape"] == "square",
        forced_label=1,
        features=("shape", "color"),
        name="c-stagger",
    )


def c_electricity_confound(threshold: float = 0.45) -> ConfoundSpec:
    """c-electricity rule: label 1 whenever NSW demand exceeds the threshold."""
    return ConfoundSpec(
        predicate=lambda row: row["nswdemand"] > threshold,
        forced_label=1,
        features=("nswdemand",),
        name="c-electricity",
    )


@dataclass
class CsvLoadResult:
    instances: list[Instance]
    skipped: list[tuple[int, str]]


def load_csv_stream(
    path: str,
    schema: FeatureSchema,
    label_column: str,
    *,
    normalize: bool = False,
    label_map: dict[str, int] | None = None,
    on_error: str = "raise",
) -> CsvLoadResult:
    """Read a header-first CSV into Instances, t = row index.

    Columns beyond the schema and label are ignored. Numeric parsing is
    locale-independent (dot decimal separator, via float()). With
    ``normalize=True`` numeric values are min-max scaled to [0, 1] using the
    schema bounds (downstream should then use ``schema.unit()``).
    ``on_error="skip"`` collects (row, reason) pairs instead of raising.
    """
    if on_error not in ("raise", "skip"):
        raise StreamError(f"on_error must be 'raise' or 'skip', got {on_error!r}")
    label_map = label_map or {"0": 0, "1": 1, "UP": 1, "DOWN": 0}
    instances: list[Instance] = []
    skipped: list[tuple[int, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (*schema.names, label_column) if c not in header]
        if missing:
            raise StreamError(f"missing columns {missing} in {path}")
        for row_no, row in enumerate(reader):
            try:
                values = []
                for f in schema.features:
                    raw = row[f.name]
                    if isinstance(f, Categorical):
                        if raw not in f.values:
                            raise StreamError(
                                f"row {row_no}, column {f.name!r}: {raw!r} not in "
                                f"{list(f.values)}"
                            )
                        values.append(raw)
                    else:
                        try:
                            v = float(raw)
                        except ValueError:
                            raise StreamError(
                                f"row {row_no}, column {f.name!r}: {raw!r} is not numeric"
                            ) from None
                        if not (f.lo <= v <= f.hi):
                            raise StreamError(
                                f"row {row_no}, column {f.name!r}: {v} outside "
                                f"[{f.lo}, {f.hi}]"
                            )
                        if normalize:
                            v = (v - f.lo) / (f.hi - f.lo)
                        values.append(v)
                raw_label = row[label_column].strip()
                if raw_label not in label_map:
                    raise StreamError(
                        f"row {row_no}, column {label_column!r}: {raw_label!r} is not a "
                        f"recognized label"
                    )
                instances.append(
                    Instance(t=len(instances), x=tuple(values), y=label_map[raw_label])
                )
            except StreamError as exc:
                if on_error == "raise":
                    raise
                skipped.append((row_no, str(exc)))
    return CsvLoadResult(instances=instances, skipped=skipped)


def synth_electricity_stream(
    total: int,
    drift_times: Iterable[int],
    seed: int,
) -> list[Instance]:
    """Desk-scale surrogate in the electricity layout.

    Six uniform features in [0, 1]; the label thresholds a linear score whose
    coefficients are redrawn at every drift time (piecewise-stationary).
    """
    drifts = sorted(set(int(d) for d in drift_times))
    for d in drifts:
        if not 0 <= d < total:
            raise StreamError(f"drift time {d} outside [0, {total})")
    schema = electricity_schema()
    d_feats = schema.arity
    rng = np.random.default_rng(seed)
    n_segments = len(drifts) + 1
    coefs = rng.uniform(-1.0, 1.0, size=(n_segments, d_feats))
    xs = rng.uniform(0.0, 1.0, size=(total, d_feats))
    boundaries = [*drifts, total]
    out: list[Instance] = []
    seg = 0
    for t in range(total):
        while t >= boundaries[seg]:
            seg += 1
        c = coefs[seg]
        score = float(np.dot(c, xs[t] - 0.5))
        out.append(Instance(t=t, x=tuple(float(v) for v in xs[t]), y=int(score > 0.0)))
    return out


def gold_drifts(dataset_id: str, synthetic_drift_times: Iterable[int] | None = None) -> set[int]:
    """Ground-truth drift times used for scoring alarms.

    stagger/c-stagger use the 10k segment schedule; electricity/c-electricity
    use the published change points; synthetic passes through its configured
    schedule.
    """
    key = dataset_id.lower()
    if key in ("stagger", "c-stagger"):
        return set(STAGGER_GOLD_DRIFTS)
    if key in ("electricity", "c-electricity"):
        return set(ELECTRICITY_GOLD_DRIFTS)
    if key in ("synthetic", "synth-electricity", "c-synthetic"):
        return set(int(d) for d in (synthetic_drift_times or ()))
    raise StreamError(f"unknown dataset id {dataset_id!r}")
