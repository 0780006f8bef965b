"""Baseline change detectors as deterministic single-owner state machines.

All three expose ``update(value) -> Verdict`` and ``reset()``. DDM consumes
binary error bits; ADWIN and Page-Hinkley consume bounded reals. The numeric
inner loops live in the core kernel backend (compiled when available).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from driftlab._core import kernels


class Verdict(enum.IntEnum):
    NONE = 0
    WARNING = 1
    DRIFT = 2


class DetectorError(ValueError):
    pass


class DDM:
    """Error-rate monitor: models accuracy as a Bernoulli variable.

    Tracks p (error rate) and s = sqrt(p(1-p)/n) with their historical joint
    minimum; warns past p_min + 2 s_min and drifts past p_min + 3 s_min
    (strict comparisons; see module tests for the degenerate zero-error case).
    Resets itself fully on drift.
    """

    kind = "ddm"

    def __init__(self, warmup: int = 300) -> None:
        if warmup < 1:
            raise DetectorError("warmup must be >= 1")
        self.warmup = warmup
        self._state = np.zeros(4)
        self.reset()

    def reset(self) -> "DDM":
        self._state[:] = (0.0, 0.0, math.inf, math.inf)
        return self

    def update(self, value: float) -> Verdict:
        if value not in (0, 1, 0.0, 1.0):
            raise DetectorError(f"DDM input must be a binary error bit, got {value!r}")
        verdict = Verdict(kernels.ddm_update(self._state, float(value), self.warmup))
        if verdict is Verdict.DRIFT:
            self.reset()
        return verdict

    @property
    def n(self) -> int:
        return int(self._state[0])

    @property
    def error_rate(self) -> float:
        return float(self._state[1])

    @property
    def statistic(self) -> float:
        """Current p + s (the monitored level)."""
        n, p = self._state[0], self._state[1]
        if n == 0:
            return 0.0
        return float(p + math.sqrt(p * (1.0 - p) / n))


class ADWIN:
    """Adaptive windowing over an exponential histogram.

    Buckets of size 2^row, at most ``max_buckets`` per row; every update scans
    all bucket-boundary splits and drops the oldest bucket while the two sides
    differ by more than the Hoeffding-style cut bound. Drift means at least
    one bucket was dropped this step.
    """

    kind = "adwin"

    def __init__(self, delta: float = 0.0005, max_buckets: int = 5) -> None:
        if not 0.0 < delta < 1.0:
            raise DetectorError("delta must be in (0, 1)")
        self.delta = delta
        self.max_buckets = max_buckets
        self.reset()

    def reset(self) -> "ADWIN":
        self._rows: list[list[float]] = [[]]  # row r holds sums of buckets of size 2^r
        self.n = 0
        self.total = 0.0
        return self

    def update(self, value: float) -> Verdict:
        v = float(value)
        if not math.isfinite(v):
            raise DetectorError(f"ADWIN input must be finite, got {value!r}")
        self._insert(v)
        dropped = False
        while self.n >= 2:
            counts, sums, k = self._flatten()
            if not kernels.adwin_should_drop(counts, sums, k, self.delta):
                break
            self._drop_oldest()
            dropped = True
        return Verdict.DRIFT if dropped else Verdict.NONE

    @property
    def window_len(self) -> int:
        return self.n

    @property
    def mean(self) -> float:
        return self.total / self.n if self.n else 0.0

    def _insert(self, value: float) -> None:
        self._rows[0].append(value)
        self.n += 1
        self.total += value
        row = 0
        while len(self._rows[row]) > self.max_buckets:
            if row + 1 == len(self._rows):
                self._rows.append([])
            merged = self._rows[row][0] + self._rows[row][1]
            del self._rows[row][:2]
            self._rows[row + 1].append(merged)
            row += 1

    def _flatten(self) -> tuple[np.ndarray, np.ndarray, int]:
        counts: list[float] = []
        sums: list[float] = []
        for row in range(len(self._rows) - 1, -1, -1):
            size = float(1 << row)
            for s in self._rows[row]:
                counts.append(size)
                sums.append(s)
        return np.asarray(counts), np.asarray(sums), len(counts)

    def _drop_oldest(self) -> None:
        for row in range(len(self._rows) - 1, -1, -1):
            if self._rows[row]:
                self.total -= self._rows[row][0]
                self.n -= 1 << row
                del self._rows[row][0]
                return


class PageHinkley:
    """Cumulative-deviation test for upward mean shifts.

    Accumulates m = sum(value - mean - delta) and alarms when m rises more
    than ``lam`` above its running minimum; resets itself on drift.
    """

    kind = "ph"

    def __init__(self, delta: float = 0.005, lam: float = 50.0) -> None:
        if lam <= 0:
            raise DetectorError("lam must be > 0")
        self.delta = delta
        self.lam = lam
        self._state = np.zeros(4)
        self.reset()

    def reset(self) -> "PageHinkley":
        self._state[:] = 0.0
        return self

    def update(self, value: float) -> Verdict:
        v = float(value)
        if not math.isfinite(v):
            raise DetectorError(f"PH input must be finite, got {value!r}")
        verdict = Verdict(kernels.ph_update(self._state, v, self.delta, self.lam))
        if verdict is Verdict.DRIFT:
            self.reset()
        return verdict

    @property
    def statistic(self) -> float:
        """Current m - min(m)."""
        return float(self._state[2] - self._state[3])


Detector = DDM | ADWIN | PageHinkley

_DETECTORS = {"ddm": DDM, "adwin": ADWIN, "ph": PageHinkley}


def make_detector(kind: str, **hyper) -> Detector:
    try:
        return _DETECTORS[kind](**hyper)
    except KeyError:
        raise DetectorError(
            f"unknown detector {kind!r}; valid: {sorted(_DETECTORS)}"
        ) from None


@dataclass
class VerdictTraceRow:
    """One row of the exportable verdict trace."""

    step: int
    verdict: int
    statistic: float


def run_verdict_trace(detector: Detector, values) -> list[VerdictTraceRow]:
    """Feed a value sequence through a detector, collecting one row per step."""
    rows = []
    for step, value in enumerate(values):
        verdict = detector.update(float(value))
        statistic = detector.statistic if hasattr(detector, "statistic") else detector.mean
        rows.append(VerdictTraceRow(step=step, verdict=int(verdict), statistic=float(statistic)))
    return rows


def export_verdict_trace(rows, path) -> None:
    """Write (step, verdict, statistic) rows as CSV for plotting."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "verdict", "statistic"])
        for row in rows:
            writer.writerow([row.step, row.verdict, repr(row.statistic)])
