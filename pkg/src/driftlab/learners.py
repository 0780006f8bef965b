"""Online binary classifiers updated one instance at a time.

Three model families: naive Bayes over raw feature values, logistic
regression and a linear SVM over a one-hot encoding. All follow the same
surface: ``learn_one``, ``predict_score``, ``predict_one``, ``raw_score``
(the pre-link score the explainer attributes), and JSON-able snapshots.
Ties at the decision threshold resolve to class 1.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from driftlab._core import kernels
from driftlab.streams import Categorical, FeatureSchema, Instance, Numeric

_VAR_FLOOR = 1e-6


class SchemaMismatch(ValueError):
    """Instance does not conform to the model's schema."""


class OneHotEncoder:
    """Expands categoricals to one-hot blocks; numeric values pass through.

    ``blocks[i]`` is the (start, stop) coordinate slice of schema feature i,
    which is what groups encoded weights back into per-feature attributions.
    """

    def __init__(self, schema: FeatureSchema) -> None:
        self.schema = schema
        self.blocks: list[tuple[int, int]] = []
        self._value_index: list[dict[str, int] | None] = []
        dim = 0
        for f in schema.features:
            if isinstance(f, Categorical):
                self.blocks.append((dim, dim + len(f.values)))
                self._value_index.append({v: k for k, v in enumerate(f.values)})
                dim += len(f.values)
            else:
                self.blocks.append((dim, dim + 1))
                self._value_index.append(None)
                dim += 1
        self.dim = dim

    def transform(self, x: Sequence) -> np.ndarray:
        if len(x) != self.schema.arity:
            raise SchemaMismatch(
                f"expected {self.schema.arity} features, got {len(x)}"
            )
        out = np.zeros(self.dim)
        for i, (f, v) in enumerate(zip(self.schema.features, x)):
            start, _ = self.blocks[i]
            vi = self._value_index[i]
            if vi is not None:
                try:
                    out[start + vi[v]] = 1.0
                except KeyError:
                    raise SchemaMismatch(
                        f"{f.name}={v!r} not in {sorted(vi)}"
                    ) from None
            else:
                out[start] = float(v)
        return out


class NaiveBayes:
    """Count-based NB: Laplace-smoothed categorical likelihoods plus online
    Gaussian likelihoods for numeric features.

    ``decay`` < 1 scales every count down before each increment, bounding the
    effective memory to ~1/(1-decay) instances so the model (and with it, its
    explanations) can track drift; decay=1 is the classic accumulate-forever
    model, and the numeric statistics then reduce exactly to Welford.
    ``raw_score`` is the class-1 log-odds; with alpha > 0 and the variance
    floor it is finite for every input.
    """

    kind = "nb"
    is_linear = False

    def __init__(self, schema: FeatureSchema, alpha: float = 1.0, decay: float = 1.0) -> None:
        if alpha <= 0:
            raise ValueError("alpha must be > 0")
        if not 0.0 < decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")
        self.schema = schema
        self.alpha = alpha
        self.decay = decay
        self.class_counts = [0.0, 0.0]
        self._cat_counts: list[list[list[float]] | None] = []
        self._gauss: list[list[list[float]] | None] = []  # per class: [n, mean, S]
        for f in schema.features:
            if isinstance(f, Categorical):
                self._cat_counts.append([[0.0] * len(f.values) for _ in range(2)])
                self._gauss.append(None)
            else:
                self._cat_counts.append(None)
                self._gauss.append([[0.0, 0.0, 0.0] for _ in range(2)])

    def learn_one(self, inst: Instance) -> "NaiveBayes":
        x, y = inst.x, inst.y
        if len(x) != self.schema.arity:
            raise SchemaMismatch(f"expected {self.schema.arity} features, got {len(x)}")
        if y not in (0, 1):
            raise SchemaMismatch(f"label must be 0 or 1, got {y!r}")
        g = self.decay
        if g < 1.0:
            self.class_counts[0] *= g
            self.class_counts[1] *= g
        self.class_counts[y] += 1.0
        for i, f in enumerate(self.schema.features):
            if isinstance(f, Categorical):
                try:
                    vi = f.values.index(x[i])
                except ValueError:
                    raise SchemaMismatch(f"{f.name}={x[i]!r} not in {list(f.values)}") from None
                counts = self._cat_counts[i]  # type: ignore[assignment]
                if g < 1.0:
                    for c in (0, 1):
                        row = counts[c]
                        for k in range(len(row)):
                            row[k] *= g
                counts[y][vi] += 1.0
            else:
                n, mean, s = self._gauss[i][y]  # type: ignore[index]
                n = g * n + 1.0
                delta = float(x[i]) - mean
                mean += delta / n
                s = g * s + delta * (float(x[i]) - mean)
                self._gauss[i][y] = [n, mean, s]  # type: ignore[index]
                if g < 1.0:
                    other = self._gauss[i][1 - y]  # type: ignore[index]
                    other[0] *= g
                    other[2] *= g
        return self

    def raw_score(self, x: Sequence) -> float:
        """Log-odds log P(y=1|x) - log P(y=0|x) under the NB factorization."""
        n0, n1 = self.class_counts
        a = self.alpha
        score = math.log((n1 + a) / (n0 + a))
        for i, f in enumerate(self.schema.features):
            if isinstance(f, Categorical):
                counts = self._cat_counts[i]  # type: ignore[assignment]
                k = len(f.values)
                try:
                    vi = f.values.index(x[i])
                except ValueError:
                    raise SchemaMismatch(f"{f.name}={x[i]!r} not in {list(f.values)}") from None
                score += math.log((counts[1][vi] + a) / (n1 + a * k))
                score -= math.log((counts[0][vi] + a) / (n0 + a * k))
            else:
                v = float(x[i])
                score += self._gauss_loglik(i, 1, v) - self._gauss_loglik(i, 0, v)
        return score

    def _gauss_loglik(self, feat: int, cls: int, v: float) -> float:
        n, mean, m2 = self._gauss[feat][cls]  # type: ignore[index]
        if n < 2.0:
            return 0.0  # no variance estimate yet; feature is uninformative
        var = max(m2 / (n - 1.0), _VAR_FLOOR)
        return -0.5 * (math.log(2.0 * math.pi * var) + (v - mean) ** 2 / var)

    def predict_score(self, x: Sequence) -> float:
        return self.raw_score(x)

    def predict_one(self, x: Sequence) -> int:
        return 1 if self.raw_score(x) >= 0.0 else 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "decay": self.decay,
            "class_counts": list(self.class_counts),
            "cat_counts": self._cat_counts,
            "gauss": self._gauss,
        }

    @classmethod
    def from_dict(cls, schema: FeatureSchema, data: dict) -> "NaiveBayes":
        model = cls(schema, alpha=data["alpha"], decay=data.get("decay", 1.0))
        model.class_counts = list(data["class_counts"])
        model._cat_counts = data["cat_counts"]
        model._gauss = data["gauss"]
        return model


class _LinearModel:
    """Shared plumbing for the two linear learners."""

    is_linear = True

    def __init__(self, schema: FeatureSchema) -> None:
        self.schema = schema
        self.encoder = OneHotEncoder(schema)
        self.w = np.zeros(self.encoder.dim)
        self.bias = 0.0

    def margin(self, x: Sequence) -> float:
        return kernels.linear_margin(self.w, self.bias, self.encoder.transform(x))

    def raw_score(self, x: Sequence) -> float:
        return self.margin(x)

    def _check_finite(self) -> None:
        if not (np.all(np.isfinite(self.w)) and math.isfinite(self.bias)):
            raise FloatingPointError("model parameters left the finite range")


class LogisticRegression(_LinearModel):
    """Online logistic regression: one SGD step on log-loss per instance."""

    kind = "lr"

    def __init__(self, schema: FeatureSchema, learning_rate: float = 0.05) -> None:
        super().__init__(schema)
        self.learning_rate = learning_rate

    def learn_one(self, inst: Instance) -> "LogisticRegression":
        if inst.y not in (0, 1):
            raise SchemaMismatch(f"label must be 0 or 1, got {inst.y!r}")
        x_enc = self.encoder.transform(inst.x)
        self.bias = kernels.logloss_step(
            self.w, self.bias, x_enc, float(inst.y), self.learning_rate
        )
        return self

    def predict_score(self, x: Sequence) -> float:
        """Probability of class 1."""
        z = self.margin(x)
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        ez = math.exp(z)
        return ez / (1.0 + ez)

    def predict_one(self, x: Sequence) -> int:
        return 1 if self.predict_score(x) >= 0.5 else 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "learning_rate": self.learning_rate,
            "w": self.w.tolist(),
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, schema: FeatureSchema, data: dict) -> "LogisticRegression":
        model = cls(schema, learning_rate=data["learning_rate"])
        model.w = np.asarray(data["w"], dtype=float)
        model.bias = float(data["bias"])
        return model


class LinearSVM(_LinearModel):
    """Pegasos-style linear SVM: shrink + hinge subgradient + ball projection."""

    kind = "svm"

    def __init__(self, schema: FeatureSchema, lam: float = 1e-4) -> None:
        if lam <= 0:
            raise ValueError("lam must be > 0")
        super().__init__(schema)
        self.lam = lam
        self.steps = 0

    def learn_one(self, inst: Instance) -> "LinearSVM":
        if inst.y not in (0, 1):
            raise SchemaMismatch(f"label must be 0 or 1, got {inst.y!r}")
        x_enc = self.encoder.transform(inst.x)
        self.steps += 1
        self.bias = kernels.pegasos_step(
            self.w, self.bias, x_enc, float(inst.y), self.lam, self.steps
        )
        return self

    def predict_score(self, x: Sequence) -> float:
        """Signed margin."""
        return self.margin(x)

    def predict_one(self, x: Sequence) -> int:
        return 1 if self.margin(x) >= 0.0 else 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lam": self.lam,
            "steps": self.steps,
            "w": self.w.tolist(),
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, schema: FeatureSchema, data: dict) -> "LinearSVM":
        model = cls(schema, lam=data["lam"])
        model.steps = int(data["steps"])
        model.w = np.asarray(data["w"], dtype=float)
        model.bias = float(data["bias"])
        return model


OnlineModel = NaiveBayes | LogisticRegression | LinearSVM

_LEARNERS = {"nb": NaiveBayes, "lr": LogisticRegression, "svm": LinearSVM}


def make_learner(kind: str, schema: FeatureSchema, **hyper) -> OnlineModel:
    try:
        return _LEARNERS[kind](schema, **hyper)
    except KeyError:
        raise ValueError(f"unknown learner {kind!r}; valid: {sorted(_LEARNERS)}") from None


def model_from_snapshot(schema: FeatureSchema, data: dict) -> OnlineModel:
    kind = data.get("kind")
    if kind not in _LEARNERS:
        raise ValueError(f"unknown learner kind in snapshot: {kind!r}")
    return _LEARNERS[kind].from_dict(schema, data)
