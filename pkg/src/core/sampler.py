import hashlib
import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import jsonlines
import networkx as nx
import numpy as np
from mpire import WorkerPool
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.enumerator import Enumeration
from src.core.errors import BucketPartitionError, CQError, EstimationError, LanguageExhaustedError
from src.core.grammar import Grammar
from src.core.settings import get_settings
from src.core.treegrammar import (
    DerivationTree,
    FixedTerminal,
    RenderRules,
    compile_to_rtg,
    render,
    size_of,
)

logger = logging.getLogger(__name__)

MANIFEST = "manifest.jsonl"
META = "meta.json"


# ----------------------------------------------------------------------
# Models
# ----------------------------------------------------------------------
class SampleParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1, description="Target sample count per call")
    a: int = Field(ge=0, description="Lower byte-size bound (inclusive)")
    b: int = Field(description="Upper byte-size bound (exclusive)")
    alpha: int = Field(default=8, ge=1, description="Oversampling factor")
    beta: int = Field(default=2, ge=2, description="Boundary-widening factor")
    max_tries: int = Field(default=16, ge=1, description="Retry limit")
    step_increase_threshold: int = Field(default=10, ge=1, description="EstimateIndex iterations per step growth")
    seed: int = Field(default=0, description="RNG seed")
    search_ceiling: int = Field(default_factory=lambda: get_settings().search_ceiling, gt=0)

    @model_validator(mode="after")
    def _check_range(self) -> "SampleParams":
        if self.a >= self.b:
            raise ValueError(f"empty size range [{self.a}, {self.b})")
        return self


class IndexBounds(BaseModel):
    model_config = ConfigDict(frozen=True)
    lo: int = Field(ge=0)
    hi: int = Field(ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> "IndexBounds":
        if self.lo > self.hi:
            raise ValueError(f"index bounds out of order: {self.lo} > {self.hi}")
        return self


class Sample(BaseModel):
    model_config = ConfigDict(frozen=True)
    index: int = Field(ge=0)
    text: str
    size: int = Field(ge=0)
    bucket: int = Field(default=0, ge=0)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


class SampleSet(BaseModel):
    samples: List[Sample] = Field(default_factory=list)
    params: SampleParams
    shortfall: Dict[int, int] = Field(default_factory=dict, description="Missing samples per bucket")

    def __len__(self) -> int:
        return len(self.samples)


# ----------------------------------------------------------------------
# Program space: f(i) -> (text, size)
# ----------------------------------------------------------------------
class ProgramSpace:
    """An enumeration plus the rendering rules that turn its trees into program text."""

    def __init__(self, enumeration: Enumeration, render_rules: Optional[RenderRules] = None, cache_size: int = 1 << 18):
        self.enumeration = enumeration
        self.render_rules = render_rules or RenderRules()
        self.program = lru_cache(maxsize=cache_size)(self._program)

    @classmethod
    def from_grammar(cls, g: Grammar, render_rules: Optional[RenderRules] = None) -> "ProgramSpace":
        return cls(Enumeration(compile_to_rtg(g)), render_rules)

    def _program(self, i: int) -> Tuple[str, int]:
        text = render(self.enumeration.index_to_tree(i), self.render_rules)
        return text, size_of(text)

    def text(self, i: int) -> str:
        return self.program(i)[0]

    def size(self, i: int) -> int:
        return self.program(i)[1]

    def total(self) -> Optional[int]:
        return self.enumeration.total()


# ----------------------------------------------------------------------
# EstimateIndex
# ----------------------------------------------------------------------
def estimate_index(space: ProgramSpace, x: int, params: SampleParams) -> int:
    """
    Slight overapproximation of the first index whose program has byte size x.
    The result r always satisfies size(f(r)) >= x.
    """
    threshold = params.step_increase_threshold
    total = space.total()
    last = None if total is None else total - 1

    i, steps_taken, step = 0, 0, 0
    while space.size(i) < x:
        if steps_taken == threshold:
            step, steps_taken = step + 1, 0
        previous, i = i, i + 10 ** step
        steps_taken += 1
        if last is not None and i > last:
            if previous == last:
                raise LanguageExhaustedError(f"no program of size >= {x} in a language of {total} programs")
            i = last
        if i > params.search_ceiling:
            raise EstimationError(f"no program of size >= {x} below index {params.search_ceiling}")

    if space.size(i) == x:
        return i

    prev = i
    steps_taken, step = 0, 0
    while space.size(i) > x:
        prev = i
        if i == 0:
            return 0
        if steps_taken == threshold:
            step, steps_taken = step + 1, 0
        i = max(i - 10 ** step, 0)
        steps_taken += 1
    return prev


# ----------------------------------------------------------------------
# SampleProgramInterval
# ----------------------------------------------------------------------
def sample_program_interval(
    space: ProgramSpace,
    params: SampleParams,
    bounds: IndexBounds,
    bucket: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> SampleSet:
    rng = rng if rng is not None else np.random.default_rng([params.seed, bucket])
    total = space.total()
    n = params.n

    best: List[Sample] = []
    step = 0
    start, end = bounds.lo, bounds.hi
    while len(best) < n and step < params.max_tries:
        n_prime = params.alpha * n * (step + 1)
        stride = max(1, (end - start) // n_prime)
        stop = end if total is None else min(end, total)

        curr = []
        for i in range(start, stop, stride):
            text, size = space.program(i)
            if params.a <= size < params.b:
                curr.append(Sample(index=i, text=text, size=size, bucket=bucket))
        if len(curr) > n:
            keep = np.sort(rng.choice(len(curr), size=n, replace=False))
            curr = [curr[k] for k in keep]

        if len(curr) >= len(best):
            best = curr
        step += 1
        start, end = start // params.beta, max(end * params.beta, 1)

    shortfall = n - len(best)
    if shortfall:
        logger.debug(f"Bucket {bucket} [{params.a}, {params.b}): {len(best)}/{n} after {step} tries")
    return SampleSet(samples=best, params=params, shortfall={bucket: shortfall})


# ----------------------------------------------------------------------
# Bucketed campaign sampling
# ----------------------------------------------------------------------
def bucket_edges(a: int, b: int, num_buckets: int) -> List[int]:
    if num_buckets < 1 or b <= a or (b - a) % num_buckets:
        raise BucketPartitionError(f"[{a}, {b}) cannot be split into {num_buckets} equal buckets")
    width = (b - a) // num_buckets
    return [a + j * width for j in range(num_buckets + 1)]


def _boundary_index(space: ProgramSpace, x: int, params: SampleParams) -> int:
    try:
        return estimate_index(space, x, params)
    except LanguageExhaustedError:
        return space.total()


def bucketed_sample(
    space: ProgramSpace,
    a: int,
    b: int,
    num_buckets: int,
    per_bucket_n: int,
    params: SampleParams,
    workers: int = 1,
) -> SampleSet:
    """
    Partition [a, b) into equal byte buckets and sample each one separately.
    Each boundary index is estimated once, so one bucket's upper bound is the next one's lower bound.
    """
    edges = bucket_edges(a, b, num_buckets)
    params = params.model_copy(update={"a": a, "b": b, "n": max(per_bucket_n, 1)})
    if per_bucket_n == 0:
        return SampleSet(samples=[], params=params, shortfall={j: 0 for j in range(num_buckets)})

    indices = [_boundary_index(space, x, params) for x in edges]
    logger.info(f"Index bounds for {num_buckets} buckets over [{a}, {b}): {indices[0]} .. {indices[-1]}")

    def run_bucket(j: int) -> SampleSet:
        lo = indices[j]
        bucket_params = params.model_copy(update={"a": edges[j], "b": edges[j + 1], "n": per_bucket_n})
        bounds = IndexBounds(lo=lo, hi=max(lo, indices[j + 1]))
        return sample_program_interval(space, bucket_params, bounds, bucket=j)

    if workers > 1 and num_buckets > 1:
        with WorkerPool(n_jobs=min(workers, num_buckets), start_method="threading") as pool:
            parts = pool.map(run_bucket, range(num_buckets))
    else:
        parts = [run_bucket(j) for j in range(num_buckets)]

    samples: List[Sample] = []
    shortfall: Dict[int, int] = {}
    for part in parts:
        samples.extend(part.samples)
        shortfall.update(part.shortfall)
    missing = {j: s for j, s in shortfall.items() if s}
    if missing:
        logger.warning(f"Sampling shortfall per bucket: {missing}")
    return SampleSet(samples=samples, params=params, shortfall=shortfall)


# ----------------------------------------------------------------------
# Exhaustive census
# ----------------------------------------------------------------------
class _Census:
    def __init__(self, space: ProgramSpace, max_constructors: Optional[int]):
        self.rtg = space.enumeration.rtg
        rules = space.render_rules
        # with adjacency exceptions the separator is not guaranteed, so cost only counts token bytes
        self.sep = 0 if rules.no_space else size_of(rules.separator)
        self.max_constructors = max_constructors
        self.fixed = {
            rule.constructor_name: sum(
                size_of(slot.literal) + self.sep
                for slot in rule.template
                if isinstance(slot, FixedTerminal) and slot.literal
            )
            for rule in self.rtg.productions
        }
        self.min_cost = self._fixpoint(lambda rule: self.fixed[rule.constructor_name])
        self.min_nodes = self._fixpoint(lambda rule: 1)
        if max_constructors is None and self._has_free_cycle():
            raise CQError("grammar has a cycle that emits no text; pass max_constructors to bound the census")

    def _fixpoint(self, weight) -> Dict[str, float]:
        best = {nt: float("inf") for nt in self.rtg.nonterminals}
        changed = True
        while changed:
            changed = False
            for rule in self.rtg.productions:
                cost = weight(rule) + sum(best[c] for c in rule.children)
                if cost < best[rule.lhs]:
                    best[rule.lhs] = cost
                    changed = True
        return best

    def _has_free_cycle(self) -> bool:
        graph = nx.DiGraph()
        for rule in self.rtg.productions:
            if self.fixed[rule.constructor_name] or self.min_cost[rule.lhs] == float("inf"):
                continue
            for j, child in enumerate(rule.children):
                others = sum(self.min_cost[c] for k, c in enumerate(rule.children) if k != j)
                if others == 0 and self.min_cost[child] != float("inf"):
                    graph.add_edge(rule.lhs, child)
        return not nx.is_directed_acyclic_graph(graph)

    def trees(self, nt: str, budget: float, nodes: float) -> Iterator[Tuple[DerivationTree, int, int]]:
        for rule in self.rtg.rules_for(nt):
            fixed = self.fixed[rule.constructor_name]
            if fixed + sum(self.min_cost[c] for c in rule.children) > budget:
                continue
            if 1 + sum(self.min_nodes[c] for c in rule.children) > nodes:
                continue
            for kids, cost, count in self._sequence(rule.children, budget - fixed, nodes - 1):
                yield DerivationTree(rule, kids), fixed + cost, count + 1

    def _sequence(self, children: Sequence[str], budget: float, nodes: float):
        if not children:
            yield (), 0, 0
            return
        rest_cost = sum(self.min_cost[c] for c in children[1:])
        rest_nodes = sum(self.min_nodes[c] for c in children[1:])
        for first, cost, count in self.trees(children[0], budget - rest_cost, nodes - rest_nodes):
            for others, more, extra in self._sequence(children[1:], budget - cost, nodes - count):
                yield (first,) + others, cost + more, count + extra


def census(
    space: ProgramSpace,
    lo: int,
    hi: int,
    num_buckets: int = 1,
    max_constructors: Optional[int] = None,
) -> SampleSet:
    """Every program with lo <= size < hi, each tagged with its enumeration index and byte bucket."""
    edges = bucket_edges(lo, hi, num_buckets)
    width = edges[1] - edges[0]
    walker = _Census(space, max_constructors)
    budget = hi - 1 + walker.sep
    nodes = float("inf") if max_constructors is None else max_constructors

    samples = []
    for tree, _, _ in walker.trees(space.enumeration.rtg.start, budget, nodes):
        text = render(tree, space.render_rules)
        size = size_of(text)
        if lo <= size < hi:
            index = space.enumeration.tree_to_index(tree)
            samples.append(Sample(index=index, text=text, size=size, bucket=(size - lo) // width))
    samples.sort(key=lambda s: (s.bucket, s.index))

    counts = {j: 0 for j in range(num_buckets)}
    for s in samples:
        counts[s.bucket] += 1
    logger.info(f"Census of [{lo}, {hi}): {len(samples)} programs, per bucket {counts}")
    params = SampleParams(n=max(max(counts.values()), 1), a=lo, b=hi)
    return SampleSet(samples=samples, params=params, shortfall={j: 0 for j in range(num_buckets)})


# ----------------------------------------------------------------------
# On-disk sample sets
# ----------------------------------------------------------------------
def write_sample_set(s: SampleSet, run_dir: Union[str, Path], extension: str) -> Path:
    """Write each program to <bucket>/<index>.<ext> and index them in manifest.jsonl."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    ext = extension.lstrip(".")
    records = []
    for sample in s.samples:
        rel = Path(str(sample.bucket)) / f"{sample.index}.{ext}"
        target = run_dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(sample.text + "\n", encoding="utf-8")
        records.append({
            "index": str(sample.index),
            "size": sample.size,
            "bucket": sample.bucket,
            "sha256": sample.sha256,
            "path": rel.as_posix(),
        })

    with jsonlines.open(run_dir / MANIFEST, mode="w") as writer:
        writer.write_all(records)
    meta = {"params": s.params.model_dump(mode="json"), "shortfall": {str(k): v for k, v in s.shortfall.items()}}
    (run_dir / META).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return run_dir / MANIFEST


def read_sample_set(run_dir: Union[str, Path]) -> SampleSet:
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / META).read_text(encoding="utf-8"))
    samples = []
    with jsonlines.open(run_dir / MANIFEST) as reader:
        for record in reader:
            text = (run_dir / record["path"]).read_text(encoding="utf-8")
            if text.endswith("\n"):
                text = text[:-1]
            samples.append(Sample(index=int(record["index"]), text=text, size=record["size"], bucket=record["bucket"]))
    return SampleSet(
        samples=samples,
        params=SampleParams(**meta["params"]),
        shortfall={int(k): v for k, v in meta["shortfall"].items()},
    )
