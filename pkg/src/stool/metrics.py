"""Latency, compression, batch-efficiency and percentile formulas."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import EmptyHeads, EmptySamples, MissingBaselineBatch, ZeroBottleneck

DEFAULT_OVERHEAD = 1.082
REFERENCE_BATCHES = (1, 2, 4, 8, 16, 32, 64, 128)


@dataclass(frozen=True)
class LatencyModel:
    T_p: float
    T_d: float
    overhead_factor: float = DEFAULT_OVERHEAD

    def __post_init__(self):
        if self.T_p < 0 or not self.T_d > 0 or self.overhead_factor < 1:
            raise ValueError("need T_p >= 0, T_d > 0, overhead_factor >= 1")


def latency_baseline(m: LatencyModel, n_tokens: int) -> float:
    """Sequential decoding: ``T_p + N * T_d``."""
    if n_tokens < 0:
        raise ValueError("token count must be >= 0")
    return m.T_p + n_tokens * m.T_d


def latency_parallel(m: LatencyModel, head_tokens: Iterable[int]) -> float:
    """Parallel heads: the longest head sets the decode time, scaled by the overhead factor."""
    head_tokens = list(head_tokens)
    if not head_tokens:
        raise EmptyHeads("need at least one head count")
    return m.T_p + max(head_tokens) * m.T_d * m.overhead_factor


def speedup(m: LatencyModel, n_total: int, head_tokens: Iterable[int]) -> float:
    return latency_baseline(m, n_total) / latency_parallel(m, head_tokens)


def compression_ratio(baseline_tokens: float, bottleneck_tokens: float) -> float:
    if bottleneck_tokens < 1:
        raise ZeroBottleneck("bottleneck head must have at least one token")
    return baseline_tokens / bottleneck_tokens


def combined_speedup(cr: float, spec_reduction: float) -> float:
    """Token compression and speculative forward-pass reduction multiply."""
    if not (cr > 0 and spec_reduction > 0):
        raise ValueError("both factors must be > 0")
    return cr * spec_reduction


def nearest_rank(sorted_samples: Sequence[float], pct: int) -> float:
    """The ceil(pct/100 * n)-th order statistic; integer arithmetic avoids float rounding."""
    n = len(sorted_samples)
    if n == 0:
        raise EmptySamples("no samples")
    if not 0 < pct <= 100:
        raise ValueError("pct must be in (0, 100]")
    rank = -(-pct * n // 100)
    return sorted_samples[rank - 1]


@dataclass(frozen=True)
class LatencyStats:
    P50: float
    P90: float
    P95: float
    P99: float
    mean: float
    count: int

    @property
    def tail_ratio(self) -> float:
        """P90 / P50, a measure of latency consistency."""
        return self.P90 / self.P50

    def to_dict(self) -> dict:
        return asdict(self)


def percentile_stats(samples: Iterable[float]) -> LatencyStats:
    xs = sorted(samples)
    if not xs:
        raise EmptySamples("no samples")
    return LatencyStats(
        P50=nearest_rank(xs, 50),
        P90=nearest_rank(xs, 90),
        P95=nearest_rank(xs, 95),
        P99=nearest_rank(xs, 99),
        mean=sum(xs) / len(xs),
        count=len(xs),
    )


@dataclass
class CompressionReport:
    """Per-sample and aggregate baseline vs bottleneck-head token counts.

    The mean CR is reported two ways since they differ: the mean of
    per-sample ratios and the ratio of mean counts. Percentile CRs are the
    ratio of the baseline and bottleneck percentiles.
    """

    samples: list[dict] = field(default_factory=list)
    count: int = 0
    baseline: dict = field(default_factory=dict)
    bottleneck: dict = field(default_factory=dict)
    cr: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _summary(xs: Sequence[float]) -> dict:
    s = sorted(xs)
    return {"mean": sum(s) / len(s), "P50": nearest_rank(s, 50), "P90": nearest_rank(s, 90)}


def compression_report(pairs: Iterable[tuple[str, int, int]]) -> CompressionReport:
    """Build a report from ``(id, baseline_tokens, bottleneck_tokens)`` triples.

    Callers pass only the samples that should count (e.g. both-correct ones).
    """
    samples = [
        {"id": i, "baseline_tokens": b, "bottleneck_tokens": s, "cr": compression_ratio(b, s)}
        for i, b, s in pairs
    ]
    rep = CompressionReport(samples=samples, count=len(samples))
    if not samples:
        return rep
    bl = _summary([x["baseline_tokens"] for x in samples])
    st = _summary([x["bottleneck_tokens"] for x in samples])
    rep.baseline, rep.bottleneck = bl, st
    rep.cr = {
        "mean_of_ratios": sum(x["cr"] for x in samples) / len(samples),
        "ratio_of_means": bl["mean"] / st["mean"],
        "P50": bl["P50"] / st["P50"],
        "P90": bl["P90"] / st["P90"],
    }
    return rep


@dataclass
class EfficiencyReport:
    batch_sizes: list[int]
    per_token_time: list[float]
    efficiency: list[float]
    overhead: list[float]

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[dict]:
        return [
            {"B": b, "per_token_time": t, "efficiency": e, "overhead": o}
            for b, t, e, o in zip(self.batch_sizes, self.per_token_time, self.efficiency, self.overhead)
        ]


def batch_efficiency(times: Mapping[int, float]) -> EfficiencyReport:
    """``Efficiency(B) = T_d(1) / T_d(B)`` with T_d the per-token decode time at batch B."""
    if 1 not in times:
        raise MissingBaselineBatch("batch size 1 is required as the reference")
    if any(not t > 0 for t in times.values()):
        raise ValueError("times must be > 0")
    bs = sorted(times)
    t1 = times[1]
    return EfficiencyReport(
        batch_sizes=bs,
        per_token_time=[times[b] for b in bs],
        efficiency=[1.0 if b == 1 else t1 / times[b] for b in bs],
        overhead=[0.0 if b == 1 else times[b] / t1 - 1 for b in bs],
    )


def roofline_times(cost, batches: Iterable[int] = REFERENCE_BATCHES) -> dict[int, float]:
    """Per-token decode time at each batch size under a CostModel: one token per sequence per step."""
    return {b: cost.step_time(b) for b in batches}
