"""Explanation-monitoring drift detection.

Every ``cadence`` steps the monitor explains the most recent instance,
normalizes the attribution into relevance weights, and measures the
total-variation dissimilarity against a reference built as an exponential
moving average of past cadence points. The dissimilarity feeds a baseline
detector: ADWIN and PH consume it raw, DDM consumes the binarized exceedance
1[d > theta]. A drift verdict re-anchors the reference at the current weights
and resets the baseline detector; the alarm carries the per-feature weight
deltas, which is what makes it explainable.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from driftlab.detectors import DDM, Detector, Verdict
from driftlab.explain import (
    Attribution,
    Background,
    RelevanceWeights,
    attribution_payload,
    dissimilarity,
    entropy,
    explain_linear,
    explain_sampling,
    normalize_relevance,
)
from driftlab.streams import Instance


@dataclass
class AlarmEvent:
    """Drift alarm with its interpretable payload."""

    t: int
    dissimilarity: float
    reference_weights: np.ndarray
    current_weights: np.ndarray
    feature_names: tuple[str, ...]
    top_deltas: list[tuple[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "type": "alarm",
            "t": self.t,
            "dissimilarity": self.dissimilarity,
            "reference_weights": [float(v) for v in self.reference_weights],
            "current_weights": [float(v) for v in self.current_weights],
            "top_deltas": [[name, float(d)] for name, d in self.top_deltas],
        }


def alarm_reason(event: AlarmEvent, k: int) -> list[tuple[str, float]]:
    """Top-k features by |reference - current| weight, descending; ties break
    by feature index; k is clamped to the arity."""
    deltas = np.abs(event.reference_weights - event.current_weights)
    k = max(0, min(k, len(deltas)))
    order = sorted(range(len(deltas)), key=lambda i: (-deltas[i], i))
    return [(event.feature_names[i], float(deltas[i])) for i in order[:k]]


@dataclass
class ExstreamConfig:
    cadence: int = 50
    ref_window: int = 20  # EMA decay = 1 - 1/ref_window; anchored fill length
    ref_mode: str = "ema"  # ema: sliding mean | anchored: frozen post-anchor mean
    agg_points: int = 1  # cadence points averaged into the monitored weights
    theta: float = 0.3  # DDM binarization threshold
    dissimilarity: str = "tv"
    n_perms: int = 50
    explain_mode: str = "auto"  # auto | linear | sampling
    top_k: int = 3

    def __post_init__(self) -> None:
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")
        if self.ref_window < 2:
            raise ValueError("ref_window must be >= 2")
        if self.ref_mode not in ("ema", "anchored"):
            raise ValueError(f"ref_mode must be 'ema' or 'anchored', got {self.ref_mode!r}")
        if self.agg_points < 1:
            raise ValueError("agg_points must be >= 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")

    @property
    def ref_decay(self) -> float:
        return 1.0 - 1.0 / self.ref_window


@dataclass
class CadencePoint:
    """Everything computed at one explanation step.

    ``weights`` explain the most recent instance (what a query shows the
    user); ``monitored`` is the aggregate the drift statistic compares against
    the reference (equal to ``weights`` when agg_points=1).
    """

    t: int
    attribution: Attribution
    weights: RelevanceWeights
    monitored: np.ndarray
    dissimilarity: float
    entropy: float
    verdict: Verdict


class ExstreamMonitor:
    """Owns the reference weights and the baseline detector for one stream."""

    def __init__(
        self,
        config: ExstreamConfig,
        detector: Detector,
        explainer_seed: int = 0,
    ) -> None:
        self.config = config
        self.detector = detector
        self.reference: np.ndarray | None = None
        self.last_dissimilarity = 0.0
        self._anchor_points = 0  # cadence points folded into an anchored reference
        self._recent: deque[np.ndarray] = deque(maxlen=config.agg_points)
        self._rng = np.random.default_rng(explainer_seed)

    def is_cadence_step(self, t: int) -> bool:
        return t % self.config.cadence == 0

    def explain_instance(self, model, x, background: Background) -> Attribution:
        mode = self.config.explain_mode
        if mode == "auto":
            mode = "linear" if getattr(model, "is_linear", False) else "sampling"
        if mode == "linear":
            return explain_linear(model, x, background.encoded_mean(model.encoder))
        return explain_sampling(
            model, x, background, n_perms=self.config.n_perms, seed=self._rng
        )

    def observe(
        self, t: int, model, x, background: Background
    ) -> tuple[Verdict, AlarmEvent | None, CadencePoint | None]:
        """Advance one step; does real work only on cadence steps."""
        if not self.is_cadence_step(t):
            return Verdict.NONE, None, None
        attr = self.explain_instance(model, x, background)
        cur = normalize_relevance(attr)
        if self.reference is None and cur.degenerate:
            # an all-zero attribution (e.g. x equals the entire background at
            # t=0) carries no reference information; emit a null point
            point = CadencePoint(
                t=t,
                attribution=attr,
                weights=cur,
                monitored=cur.w,
                dissimilarity=0.0,
                entropy=entropy(cur),
                verdict=Verdict.NONE,
            )
            return Verdict.NONE, None, point
        self._recent.append(cur.w)
        monitored = cur.w if self.config.agg_points == 1 else np.mean(self._recent, axis=0)
        if self.reference is None:
            self.reference = monitored.copy()
            self._anchor_points = 1
        ref = RelevanceWeights(w=self.reference)
        d = dissimilarity(ref, RelevanceWeights(w=monitored), kind=self.config.dissimilarity)
        self.last_dissimilarity = d
        if isinstance(self.detector, DDM):
            verdict = self.detector.update(1.0 if d > self.config.theta else 0.0)
        else:
            verdict = self.detector.update(d)
        alarm: AlarmEvent | None = None
        if verdict is Verdict.DRIFT:
            alarm = AlarmEvent(
                t=t,
                dissimilarity=d,
                reference_weights=self.reference.copy(),
                current_weights=monitored.copy(),
                feature_names=attr.feature_names,
            )
            alarm.top_deltas = alarm_reason(alarm, self.config.top_k)
            self.reference = monitored.copy()
            self._anchor_points = 1
            self._recent.clear()
            self._recent.append(cur.w)
            self.detector.reset()
        elif self.config.ref_mode == "anchored":
            # mean of the first ref_window points since the anchor, then frozen
            if self._anchor_points < self.config.ref_window:
                self._anchor_points += 1
                self.reference = self.reference + (monitored - self.reference) / self._anchor_points
        else:
            decay = self.config.ref_decay
            self.reference = decay * self.reference + (1.0 - decay) * monitored
        point = CadencePoint(
            t=t,
            attribution=attr,
            weights=cur,
            monitored=monitored,
            dissimilarity=d,
            entropy=entropy(cur),
            verdict=verdict,
        )
        return verdict, alarm, point


def explanation_payload(point: CadencePoint, x) -> list[dict]:
    return attribution_payload(point.attribution, x, point.weights)
