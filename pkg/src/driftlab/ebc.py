"""Entropy-gated feedback elicitation and deconfounding by feature randomization.

Wraps the explanation monitor: on cadence steps, if the Shannon entropy of the
current relevance weights falls below a threshold (the model is leaning on few
features, a symptom of confounding) and the cooldown has elapsed, a query is
emitted showing the explanation. The oracle (simulated, replayed, or a human
behind the session API) marks features as spurious; a non-empty answer
triggers immediate training on buffer copies with those features randomized,
and from then on every training instance has them randomized with probability
q, breaking the label correlation that masks drift.

``ExperimentSession`` is the prequential engine shared by the evaluation
harness and the HTTP service: predict, record the error, learn, then detect.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from driftlab.explain import Background, RelevanceWeights, entropy
from driftlab.exstream import AlarmEvent, CadencePoint, ExstreamMonitor, explanation_payload
from driftlab.learners import OnlineModel
from driftlab.streams import Categorical, FeatureSchema, Instance, Numeric
from driftlab.detectors import Verdict


class EbcError(ValueError):
    pass


@dataclass
class EbcConfig:
    """Feedback-loop knobs. tau wins over tau_ratio when set; tau (or the
    resolved ratio) of exactly 0 disables the gate entirely."""

    tau: float | None = None
    tau_ratio: float = 0.5  # tau = tau_ratio * ln(arity) when tau is None
    top_m: int = 3  # features shown to the oracle
    k_copies: int = 5  # augmentation copies per buffered instance
    q: float = 0.5  # online randomization probability
    cooldown: int = 500  # min steps between queries
    buffer_capacity: int = 200

    def __post_init__(self) -> None:
        if self.tau is not None and self.tau < 0:
            raise EbcError("tau must be >= 0")
        if not 0.0 <= self.tau_ratio <= 1.0:
            raise EbcError("tau_ratio must be in [0, 1]")
        if not 0.0 <= self.q <= 1.0:
            raise EbcError("q must be in [0, 1]")
        if self.k_copies < 0:
            raise EbcError("k_copies must be >= 0")
        if self.cooldown < 0:
            raise EbcError("cooldown must be >= 0")
        if self.buffer_capacity < 1:
            raise EbcError("buffer_capacity must be >= 1")

    def resolve_tau(self, arity: int) -> float:
        if self.tau is not None:
            return self.tau
        return self.tau_ratio * math.log(arity)


@dataclass
class QueryEvent:
    """Feedback elicitation: the explanation shown and the answer received."""

    t: int
    explanation: list[dict]
    entropy: float
    tau: float
    source: str
    response: list[str] | None = None  # None while pending (human mode)

    def to_dict(self) -> dict:
        # source is transport metadata (how the answer arrived), not event
        # data; leaving it out keeps replayed logs identical to the original
        return {
            "type": "query",
            "t": self.t,
            "explanation": self.explanation,
            "entropy": self.entropy,
            "tau": self.tau,
            "response": self.response,
        }


def entropy_gate(weights: RelevanceWeights, tau: float) -> bool:
    """True when the explanation is concentrated enough to warrant a query."""
    return entropy(weights) < tau


def top_features(weights: RelevanceWeights, names: Sequence[str], top_m: int) -> list[str]:
    order = sorted(range(len(names)), key=lambda i: (-weights.w[i], i))
    return [names[i] for i in order[: max(0, top_m)]]


def simulated_oracle(
    gt_spurious: Sequence[str],
    weights: RelevanceWeights,
    names: Sequence[str],
    top_m: int,
) -> list[str]:
    """A user who recognizes confound features among the top_m shown to them:
    returns the intersection, in schema order."""
    shown = set(top_features(weights, names, top_m))
    gt = set(gt_spurious)
    return [n for n in names if n in shown and n in gt]


class ReplayBuffer:
    """FIFO ring of recent instances: source material for augmentation."""

    def __init__(self, capacity: int) -> None:
        self._items: deque[Instance] = deque(maxlen=capacity)

    def add(self, inst: Instance) -> None:
        self._items.append(inst)

    def __len__(self) -> int:
        return len(self._items)

    @property
    def instances(self) -> list[Instance]:
        return list(self._items)


def _resample_value(feature, buffer_instances, feat_idx: int, rng: np.random.Generator):
    if isinstance(feature, Categorical):
        return feature.values[int(rng.integers(0, len(feature.values)))]
    # numeric: draw from the buffer's empirical marginal
    pick = buffer_instances[int(rng.integers(0, len(buffer_instances)))]
    return pick.x[feat_idx]


def augment(
    buffer: ReplayBuffer,
    spurious: Sequence[int],
    k: int,
    schema: FeatureSchema,
    rng: np.random.Generator,
) -> list[Instance]:
    """k copies of every buffered instance with each spurious feature
    resampled: categoricals uniformly over the schema's values, numerics from
    the buffer's empirical marginal. Labels and other features unchanged."""
    if not spurious:
        raise EbcError("augment requires a non-empty spurious set")
    items = buffer.instances
    if not items:
        return []
    out: list[Instance] = []
    for inst in items:
        for _ in range(k):
            values = list(inst.x)
            for fi in spurious:
                values[fi] = _resample_value(schema.features[fi], items, fi, rng)
            out.append(Instance(t=inst.t, x=tuple(values), y=inst.y))
    return out


def deconfound_transform(
    inst: Instance,
    spurious: Sequence[int],
    q: float,
    schema: FeatureSchema,
    rng: np.random.Generator,
) -> Instance:
    """Independently resample each spurious feature with probability q;
    numerics draw uniformly from their schema range. Label preserved."""
    if not spurious or q == 0.0:
        return inst
    values = list(inst.x)
    changed = False
    for fi in spurious:
        if rng.random() < q:
            f = schema.features[fi]
            if isinstance(f, Categorical):
                values[fi] = f.values[int(rng.integers(0, len(f.values)))]
            else:
                assert isinstance(f, Numeric)
                values[fi] = float(rng.uniform(f.lo, f.hi))
            changed = True
    if not changed:
        return inst
    return Instance(t=inst.t, x=tuple(values), y=inst.y)


@dataclass
class StepOutcome:
    t: int
    error: int
    verdict: Verdict
    events: list[AlarmEvent | QueryEvent]
    paused: bool
    cadence: CadencePoint | None = None


class ExperimentSession:
    """One prequential run: stream + model + monitor (+ feedback loop).

    ``method="exstream"`` runs pure explanation monitoring; ``method="ebc"``
    adds the entropy gate, the oracle, and deconfounding. With a human oracle
    the session parks at a pending query until ``submit_annotation``.
    """

    def __init__(
        self,
        stream: list[Instance],
        schema: FeatureSchema,
        model: OnlineModel,
        monitor: ExstreamMonitor,
        background: Background,
        *,
        method: str = "exstream",
        ebc_config: EbcConfig | None = None,
        oracle_kind: str = "simulated",
        gt_spurious: Sequence[str] = (),
        replay_responses: Sequence[Sequence[str]] | None = None,
        seed: int = 0,
    ) -> None:
        if method not in ("exstream", "ebc"):
            raise EbcError(f"unknown method {method!r}; valid: ['exstream', 'ebc']")
        if oracle_kind not in ("simulated", "human", "replay"):
            raise EbcError(
                f"unknown oracle {oracle_kind!r}; valid: ['simulated', 'human', 'replay']"
            )
        self.stream = stream
        self.schema = schema
        self.model = model
        self.monitor = monitor
        self.background = background
        self.method = method
        self.ebc_config = ebc_config or EbcConfig()
        self.oracle_kind = oracle_kind
        self.gt_spurious = tuple(gt_spurious)
        self._replay = [list(r) for r in replay_responses] if replay_responses is not None else None
        self._replay_pos = 0
        self.tau = self.ebc_config.resolve_tau(schema.arity)
        self.buffer = ReplayBuffer(self.ebc_config.buffer_capacity)
        seq = np.random.SeedSequence(seed)
        decon_seed, aug_seed = seq.spawn(2)
        self._decon_rng = np.random.default_rng(decon_seed)
        self._aug_rng = np.random.default_rng(aug_seed)
        self.t = 0
        self.spurious: set[int] = set()
        self.last_query_t: int | None = None
        self.pending_query: QueryEvent | None = None
        self.alarms: list[AlarmEvent] = []
        self.queries: list[QueryEvent] = []
        self.error_bits: list[int] = []
        self.cadence_trace: list[CadencePoint] = []
        self.last_cadence: CadencePoint | None = None

    # -- state inspection -------------------------------------------------

    @property
    def total(self) -> int:
        return len(self.stream)

    @property
    def finished(self) -> bool:
        return self.t >= self.total

    @property
    def paused(self) -> bool:
        return self.pending_query is not None

    @property
    def spurious_names(self) -> list[str]:
        return [self.schema.names[i] for i in sorted(self.spurious)]

    def state_digest(self) -> str:
        """Hash of everything that advances with the stream; used to verify a
        paused session holds still."""
        payload = {
            "t": self.t,
            "model": self.model.to_dict(),
            "reference": None
            if self.monitor.reference is None
            else [float(v) for v in self.monitor.reference],
            "spurious": sorted(self.spurious),
            "n_alarms": len(self.alarms),
            "n_queries": len(self.queries),
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    # -- stepping ---------------------------------------------------------

    def step_one(self) -> StepOutcome:
        if self.paused:
            raise EbcError("session is paused awaiting annotation")
        if self.finished:
            raise EbcError("stream exhausted")
        inst = self.stream[self.t]
        y_hat = self.model.predict_one(inst.x)
        err = int(y_hat != inst.y)
        self.error_bits.append(err)
        learn_inst = inst
        if self.method == "ebc" and self.spurious:
            learn_inst = deconfound_transform(
                inst, sorted(self.spurious), self.ebc_config.q, self.schema, self._decon_rng
            )
        self.model.learn_one(learn_inst)
        self.background.add(inst)
        if self.method == "ebc":
            self.buffer.add(inst)
        verdict, alarm, point = self.monitor.observe(self.t, self.model, inst.x, self.background)
        events: list[AlarmEvent | QueryEvent] = []
        if alarm is not None:
            self.alarms.append(alarm)
            events.append(alarm)
            self.background.reset()
        if point is not None:
            self.cadence_trace.append(point)
            self.last_cadence = point
            if self.method == "ebc":
                query = self._maybe_query(point, inst)
                if query is not None:
                    events.append(query)
        self.t += 1
        return StepOutcome(
            t=self.t - 1,
            error=err,
            verdict=verdict,
            events=events,
            paused=self.paused,
            cadence=point,
        )

    def run(self, max_steps: int | None = None) -> str:
        """Advance until the stream ends, a query pauses the session (human
        oracle), or max_steps is exhausted. Returns the resulting mode."""
        done = 0
        while not self.finished and not self.paused:
            if max_steps is not None and done >= max_steps:
                break
            self.step_one()
            done += 1
        if self.paused:
            return "paused_awaiting_annotation"
        return "finished" if self.finished else "running"

    # -- feedback ---------------------------------------------------------

    def _maybe_query(self, point: CadencePoint, inst: Instance) -> QueryEvent | None:
        if self.tau <= 0.0:
            return None
        if not entropy_gate(point.weights, self.tau):
            return None
        if self.last_query_t is not None and point.t - self.last_query_t < self.ebc_config.cooldown:
            return None
        self.last_query_t = point.t
        query = QueryEvent(
            t=point.t,
            explanation=explanation_payload(point, inst.x),
            entropy=point.entropy,
            tau=self.tau,
            source=self.oracle_kind,
        )
        self.queries.append(query)
        if self.oracle_kind == "simulated":
            answer = simulated_oracle(
                self.gt_spurious, point.weights, self.schema.names, self.ebc_config.top_m
            )
            self._apply_feedback(query, answer)
        elif self.oracle_kind == "replay":
            if self._replay is None or self._replay_pos >= len(self._replay):
                raise EbcError(
                    f"replay log exhausted at query {self._replay_pos} (t={point.t})"
                )
            answer = self._replay[self._replay_pos]
            self._replay_pos += 1
            self._apply_feedback(query, answer)
        else:  # human: park until submit_annotation
            self.pending_query = query
        return query

    def submit_annotation(self, names: Sequence[str]) -> None:
        if not self.paused:
            raise EbcError("no pending query")
        unknown = [n for n in names if n not in self.schema.names]
        if unknown:
            raise EbcError(
                f"unknown feature names {unknown}; valid: {list(self.schema.names)}"
            )
        query = self.pending_query
        self.pending_query = None
        assert query is not None
        self._apply_feedback(query, list(names))

    def _apply_feedback(self, query: QueryEvent, names: Sequence[str]) -> None:
        query.response = list(names)
        if not names:
            return
        for n in names:
            self.spurious.add(self.schema.index_of(n))
        if self.ebc_config.k_copies > 0:
            copies = augment(
                self.buffer,
                sorted(self.spurious),
                self.ebc_config.k_copies,
                self.schema,
                self._aug_rng,
            )
            for copy in copies:
                self.model.learn_one(copy)

    # -- event access -----------------------------------------------------

    def events_since(self, since: int) -> list[dict]:
        merged = [a.to_dict() for a in self.alarms if a.t >= since]
        merged += [q.to_dict() for q in self.queries if q.t >= since]
        merged.sort(key=lambda e: (e["t"], e["type"]))
        return merged

    def annotation_log(self) -> list[list[str]]:
        """Responses in emission order; feeds replay mode."""
        return [list(q.response) for q in self.queries if q.response is not None]
