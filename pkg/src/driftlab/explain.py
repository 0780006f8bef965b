"""Per-prediction feature attributions and the scalar summaries built on them.

Two attribution routes share one result type: a closed form for models linear
in the encoded space (exact local accuracy) and permutation-sampling Shapley
values for anything with a ``raw_score`` (the classic sample-a-permutation,
sample-a-background-instance estimator). Attributions are normalized into
relevance weights on the simplex; Shannon entropy of those weights measures
how concentrated the model's reliance is, and total-variation distance between
two weight vectors is the explanation dissimilarity the drift monitors track.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from driftlab.streams import FeatureSchema, Instance


class ExplainError(ValueError):
    pass


@dataclass
class Attribution:
    """Signed per-feature contributions to raw_score(x) relative to a baseline."""

    values: np.ndarray
    base: float
    target_score: float
    feature_names: tuple[str, ...]

    def local_accuracy_gap(self) -> float:
        return abs(float(np.sum(self.values)) - (self.target_score - self.base))


@dataclass
class RelevanceWeights:
    """Normalized absolute attributions: w_i >= 0, sum w = 1."""

    w: np.ndarray
    degenerate: bool = False

    @property
    def arity(self) -> int:
        return int(self.w.shape[0])


class Background:
    """Seeded reservoir of recent instances: the reference distribution.

    Uniform-over-history reservoir sampling (algorithm R); reset on confirmed
    drift so stale references do not mask change.
    """

    def __init__(self, capacity: int, seed: int) -> None:
        if capacity < 1:
            raise ExplainError("background capacity must be >= 1")
        self.capacity = capacity
        self._rng = np.random.default_rng(seed)
        self._items: list[Instance] = []
        self._seen = 0

    def __len__(self) -> int:
        return len(self._items)

    @property
    def instances(self) -> list[Instance]:
        return self._items

    def add(self, inst: Instance) -> None:
        self._seen += 1
        if len(self._items) < self.capacity:
            self._items.append(inst)
            return
        j = int(self._rng.integers(0, self._seen))
        if j < self.capacity:
            self._items[j] = inst

    def reset(self) -> None:
        self._items = []
        self._seen = 0

    def encoded_mean(self, encoder) -> np.ndarray:
        if not self._items:
            raise ExplainError("background is empty")
        acc = np.zeros(encoder.dim)
        for inst in self._items:
            acc += encoder.transform(inst.x)
        return acc / len(self._items)


def explain_linear(model, x, background_mean: np.ndarray) -> Attribution:
    """Exact attributions for a model linear in its encoding.

    a_i sums w_j (x_j - mean_j) over the coordinates of feature i; the base is
    the margin at the background mean, so local accuracy holds to float
    precision.
    """
    if not getattr(model, "is_linear", False):
        raise ExplainError(f"model {model.kind!r} is not linear in the encoded space")
    enc = model.encoder
    x_enc = enc.transform(x)
    diff = x_enc - background_mean
    values = np.empty(len(enc.blocks))
    for i, (start, stop) in enumerate(enc.blocks):
        values[i] = float(np.dot(model.w[start:stop], diff[start:stop]))
    base = float(np.dot(model.w, background_mean)) + model.bias
    target = float(np.dot(model.w, x_enc)) + model.bias
    return Attribution(
        values=values,
        base=base,
        target_score=target,
        feature_names=model.schema.names,
    )


def explain_sampling(
    model,
    x,
    background: Background,
    n_perms: int = 50,
    seed: int | np.random.Generator = 0,
) -> Attribution:
    """Permutation-sampling Shapley values of raw_score for any model.

    Each sample pairs a random feature permutation with a random background
    instance; walking the permutation, a feature's marginal contribution is
    the score change when its value flips from the background's to x's.
    The base is the mean score over the whole reservoir. Deterministic given
    the seed.
    """
    if n_perms < 1:
        raise ExplainError("n_perms must be >= 1")
    if len(background) == 0:
        raise ExplainError("background is empty")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    d = model.schema.arity
    refs = background.instances
    base = 0.0
    for inst in refs:
        base += model.raw_score(inst.x)
    base /= len(refs)
    x_values = list(x)
    phi = np.zeros(d)
    for _ in range(n_perms):
        perm = rng.permutation(d)
        ref = refs[int(rng.integers(0, len(refs)))]
        current = list(ref.x)
        prev = model.raw_score(current)
        for idx in perm:
            current[idx] = x_values[idx]
            score = model.raw_score(current)
            phi[idx] += score - prev
            prev = score
    phi /= n_perms
    return Attribution(
        values=phi,
        base=base,
        target_score=model.raw_score(x_values),
        feature_names=model.schema.names,
    )


def normalize_relevance(attr: Attribution) -> RelevanceWeights:
    """w_i = |a_i| / sum |a|; an all-zero attribution yields uniform weights
    with the degenerate flag set."""
    mags = np.abs(attr.values)
    total = float(np.sum(mags))
    if total == 0.0:
        d = len(mags)
        return RelevanceWeights(w=np.full(d, 1.0 / d), degenerate=True)
    return RelevanceWeights(w=mags / total)


def entropy(weights: RelevanceWeights | np.ndarray) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0; ranges over [0, ln d]."""
    w = weights.w if isinstance(weights, RelevanceWeights) else np.asarray(weights)
    nz = w[w > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def dissimilarity(ref: RelevanceWeights, cur: RelevanceWeights, kind: str = "tv") -> float:
    """Distance between two weight vectors: total variation (default, in
    [0, 1]) or cosine distance behind the config switch."""
    if ref.arity != cur.arity:
        raise ExplainError(f"arity mismatch: {ref.arity} vs {cur.arity}")
    if kind == "tv":
        return 0.5 * float(np.sum(np.abs(ref.w - cur.w)))
    if kind == "cosine":
        nr = float(np.linalg.norm(ref.w))
        nc = float(np.linalg.norm(cur.w))
        if nr == 0.0 or nc == 0.0:
            return 0.0
        return 1.0 - float(np.dot(ref.w, cur.w)) / (nr * nc)
    raise ExplainError(f"unknown dissimilarity {kind!r}; valid: ['tv', 'cosine']")


def attribution_payload(attr: Attribution, x, weights: RelevanceWeights) -> list[dict]:
    """Per-feature records for the session API and report emitter."""
    return [
        {
            "name": name,
            "value": x[i] if not isinstance(x[i], np.generic) else x[i].item(),
            "attribution": float(attr.values[i]),
            "weight": float(weights.w[i]),
        }
        for i, name in enumerate(attr.feature_names)
    ]
