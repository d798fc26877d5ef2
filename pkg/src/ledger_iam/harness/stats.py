from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence


class EmptyStats(ValueError):
    pass


@dataclass(frozen=True)
class Summary:
    mean: float
    se: float
    n: int


def summarize(samples: Sequence[float]) -> Summary:
    """Arithmetic mean and standard error (sample stddev / sqrt(n))."""
    if len(samples) == 0:
        raise EmptyStats("no samples")
    n = len(samples)
    mean = statistics.fmean(samples)
    se = statistics.stdev(samples, mean) / math.sqrt(n) if n > 1 else 0.0
    return Summary(mean, se, n)


@dataclass(frozen=True)
class StageStats:
    """Latency samples for one enrolment stage, in ``unit``."""

    stage: str
    unit: str
    samples: tuple[float, ...]

    @property
    def summary(self) -> Summary:
        return summarize(self.samples)

    @property
    def mean(self) -> float:
        return self.summary.mean

    @property
    def se(self) -> float:
        return self.summary.se

    @property
    def count(self) -> int:
        return len(self.samples)

    def to_dict(self) -> dict:
        s = self.summary
        return {"stage": self.stage, "unit": self.unit, "n": s.n, "mean": s.mean, "se": s.se}
