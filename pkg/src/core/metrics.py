from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.errors import ConfigurationError, EmptyCampaignError
from src.core.harness import CampaignResult, Verdict


class MetricParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    size_bound: int = Field(default=256, gt=0, description="S: programs are smaller than this many bytes")
    epsilon: int = Field(default=5, ge=0, description="LCQ window radius in bytes")
    lcq_step: int = Field(default=1, ge=1, description="x-axis stride of the LCQ curve")


class CurvePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: int
    lcq: Optional[float] = None
    population: int = 0

    @property
    def defined(self) -> bool:
        return self.lcq is not None


class CQReport(BaseModel):
    language: str
    cq: float = Field(ge=0, le=100)
    per_run_cq: List[float]
    run_ids: List[str]
    relative_std_dev: Optional[float] = Field(default=None, description="100 * sample stddev / mean; None for one run")
    lcq_curve: List[CurvePoint]
    per_run_curves: List[List[CurvePoint]]
    verdict_breakdown: Dict[str, int]
    per_run_counts: List[Dict[str, int]]
    params: MetricParams


def compute_cq(c: CampaignResult, m: Optional[MetricParams] = None) -> float:
    if not c.results:
        raise EmptyCampaignError(c.language)
    accepted = sum(1 for r in c.results if r.verdict == Verdict.ACCEPTED)
    return 100.0 * accepted / len(c.results)


def lcq_window(c: CampaignResult, x: int, m: MetricParams) -> Tuple[int, int]:
    """(accepted, population) of samples with x - epsilon <= size <= x + epsilon."""
    lo, hi = x - m.epsilon, x + m.epsilon
    inside = [r for r in c.results if lo <= r.size <= hi]
    return sum(1 for r in inside if r.verdict == Verdict.ACCEPTED), len(inside)


def compute_lcq(c: CampaignResult, x: int, m: MetricParams) -> Optional[float]:
    accepted, population = lcq_window(c, x, m)
    if population == 0:
        return None
    return 100.0 * accepted / population


def _single_curve(c: CampaignResult, m: MetricParams) -> List[CurvePoint]:
    xs = np.arange(0, m.size_bound + 1, m.lcq_step)
    sizes = np.array([r.size for r in c.results], dtype=np.int64)
    ok = np.array([r.verdict == Verdict.ACCEPTED for r in c.results], dtype=bool)

    length = m.size_bound + m.epsilon + 2
    if sizes.size:
        length = max(length, int(sizes.max()) + 2)
    population = np.concatenate([[0], np.cumsum(np.bincount(sizes, minlength=length))])
    accepted = np.concatenate([[0], np.cumsum(np.bincount(sizes[ok], minlength=length))])

    # prefix sums: count of sizes in [lo, hi] is P[hi + 1] - P[lo]
    lo = np.clip(xs - m.epsilon, 0, length)
    hi = np.clip(xs + m.epsilon + 1, 0, length)
    pop = population[hi] - population[lo]
    acc = accepted[hi] - accepted[lo]

    points = []
    for x, p, a in zip(xs.tolist(), pop.tolist(), acc.tolist()):
        points.append(CurvePoint(x=x, lcq=100.0 * a / p if p else None, population=p))
    return points


def lcq_curve(c: Union[CampaignResult, Sequence[CampaignResult]], m: MetricParams) -> List[CurvePoint]:
    """LCQ at x = 0, step, 2*step, ... up to S. Several runs are averaged pointwise over defined values."""
    runs = [c] if isinstance(c, CampaignResult) else list(c)
    if not runs:
        return []
    curves = [_single_curve(run, m) for run in runs]
    if len(curves) == 1:
        return curves[0]

    merged = []
    for column in zip(*curves):
        defined = [p.lcq for p in column if p.lcq is not None]
        merged.append(CurvePoint(
            x=column[0].x,
            lcq=float(np.mean(defined)) if defined else None,
            population=sum(p.population for p in column),
        ))
    return merged


def relative_std_dev(values: Sequence[float]) -> Optional[float]:
    if len(values) < 2:
        return None
    mean = float(np.mean(values))
    if mean == 0:
        return None
    return 100.0 * float(np.std(values, ddof=1)) / mean


def aggregate_runs(runs: Sequence[CampaignResult], m: MetricParams) -> CQReport:
    if not runs:
        raise EmptyCampaignError()
    languages = {run.language for run in runs}
    if len(languages) > 1:
        raise ConfigurationError(f"cannot aggregate runs of different languages: {sorted(languages)}")

    per_run = [compute_cq(run, m) for run in runs]
    breakdown = {v.value: 0 for v in Verdict}
    for run in runs:
        for verdict, count in run.counts.items():
            breakdown[verdict] += count

    return CQReport(
        language=runs[0].language,
        cq=float(np.mean(per_run)),
        per_run_cq=per_run,
        run_ids=[run.run_id for run in runs],
        relative_std_dev=relative_std_dev(per_run),
        lcq_curve=lcq_curve(runs, m),
        per_run_curves=[lcq_curve(run, m) for run in runs],
        verdict_breakdown=breakdown,
        per_run_counts=[run.counts for run in runs],
        params=m,
    )
