import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypedDict, Union

from langgraph.graph import END, START, StateGraph
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.core.enumerator import Enumeration
from src.core.errors import ConfigurationError
from src.core.grammar import Grammar
from src.core.harness import (
    CampaignResult,
    LanguageConfig,
    VerdictCache,
    load_language_config,
    read_campaign_result,
    resolve_executable,
    run_campaign,
    write_campaign_result,
)
from src.core.metrics import CQReport, MetricParams, aggregate_runs
from src.core.report import emit_report
from src.core.sampler import (
    ProgramSpace,
    SampleParams,
    SampleSet,
    bucket_edges,
    bucketed_sample,
    census,
    read_sample_set,
    write_sample_set,
)
from src.core.settings import get_settings
from src.core.treegrammar import compile_to_rtg
from src.utils.parser import load_grammar

logger = logging.getLogger(__name__)


# ----------------------------------------------------------------------
# Campaign spec
# ----------------------------------------------------------------------
class SamplerOverrides(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: int = Field(default=8, ge=1)
    beta: int = Field(default=2, ge=2)
    max_tries: int = Field(default=16, ge=1)
    step_increase_threshold: int = Field(default=10, ge=1)


class CampaignSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = ""
    grammar_path: Path
    language_config_path: Path
    size_range: Tuple[int, int] = Field(description="[a, b) in bytes")
    num_buckets: int = Field(default=1, ge=1)
    per_bucket_target: int = Field(default=100, ge=0)
    runs: int = Field(default=1, ge=1)
    seed: int = 0
    workers: int = Field(default_factory=lambda: get_settings().workers, ge=1)
    output_dir: Path = Field(description="Defaults to <campaign_root>/<campaign name>")
    exhaustive: bool = Field(default=False, description="Census every program in range instead of sampling")
    sampler: SamplerOverrides = Field(default_factory=SamplerOverrides)
    metrics: Optional[MetricParams] = Field(default=None, description="Defaults to size_bound = b")

    @model_validator(mode="before")
    @classmethod
    def _default_output_dir(cls, data):
        if isinstance(data, dict) and data.get("output_dir") is None and data.get("grammar_path") is not None:
            name = data.get("name") or Path(data["grammar_path"]).stem
            data = {**data, "output_dir": Path(get_settings().campaign_root) / name}
        return data

    @field_validator("grammar_path", "language_config_path", "output_dir")
    @classmethod
    def _absolute(cls, value: Path) -> Path:
        return Path(value).resolve()

    @model_validator(mode="after")
    def _check(self) -> "CampaignSpec":
        a, b = self.size_range
        if not 0 <= a < b:
            raise ValueError(f"size range [{a}, {b}) is empty or negative")
        if (b - a) % self.num_buckets:
            raise ValueError(f"[{a}, {b}) cannot be split into {self.num_buckets} equal buckets")
        return self

    @property
    def campaign_name(self) -> str:
        return self.name or self.grammar_path.stem

    @property
    def metric_params(self) -> MetricParams:
        return self.metrics or MetricParams(size_bound=self.size_range[1])

    def sample_params(self, run: int) -> SampleParams:
        a, b = self.size_range
        return SampleParams(
            n=max(self.per_bucket_target, 1),
            a=a,
            b=b,
            seed=self.seed + run,
            **self.sampler.model_dump(),
        )

    def sampling_key(self) -> dict:
        """Fields that determine the sampled programs."""
        return self.model_dump(
            mode="json",
            include={"grammar_path", "language_config_path", "size_range", "num_buckets",
                     "per_bucket_target", "seed", "exhaustive", "sampler"},
        )


def load_campaign_spec(path: Union[str, Path], **overrides) -> CampaignSpec:
    """Read spec.json; relative paths are taken relative to the spec file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: invalid JSON ({e})") from None
    for key in ("grammar_path", "language_config_path", "output_dir"):
        if key in data and not Path(data[key]).is_absolute():
            data[key] = str((path.parent / data[key]).resolve())
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return CampaignSpec(**data)
    except ValidationError as e:
        raise ConfigurationError(f"{path}: {e}") from None


def build_spec(**fields) -> CampaignSpec:
    try:
        return CampaignSpec(**{k: v for k, v in fields.items() if v is not None})
    except ValidationError as e:
        raise ConfigurationError(str(e)) from None


# ----------------------------------------------------------------------
# State Definition
# ----------------------------------------------------------------------
class CampaignState(TypedDict, total=False):
    spec: CampaignSpec
    grammar: Grammar
    language: LanguageConfig
    space: ProgramSpace
    sample_sets: List[SampleSet]
    campaigns: List[CampaignResult]
    report: CQReport
    files: Dict[str, Path]


def campaign_dir(spec: CampaignSpec) -> Path:
    return spec.output_dir


def run_dir(spec: CampaignSpec, run: int) -> Path:
    return campaign_dir(spec) / "samples" / f"run-{run}"


def results_path(spec: CampaignSpec, run: int) -> Path:
    return campaign_dir(spec) / "results" / f"run-{run}.jsonl"


# ----------------------------------------------------------------------
# Nodes
# ----------------------------------------------------------------------
def load_node(state: CampaignState) -> dict:
    """Parse the grammar and language config, build the program space."""
    spec = state["spec"]
    grammar = load_grammar(spec.grammar_path)
    language = load_language_config(spec.language_config_path)
    space = ProgramSpace(Enumeration(compile_to_rtg(grammar)), language.render)
    return {"grammar": grammar, "language": language, "space": space}


def _snapshot(spec: CampaignSpec) -> None:
    path = campaign_dir(spec) / "spec.json"
    if path.exists():
        previous = CampaignSpec(**json.loads(path.read_text(encoding="utf-8")))
        if previous.sampling_key() != spec.sampling_key():
            raise ConfigurationError(
                f"{campaign_dir(spec)} holds samples of a different campaign spec; use another output directory"
            )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(spec.model_dump_json(indent=2) + "\n", encoding="utf-8")


def sample_node(state: CampaignState) -> dict:
    """Materialize one sample set per run under samples/run-<r>/, reusing existing ones."""
    spec, space, language = state["spec"], state["space"], state["language"]
    a, b = spec.size_range
    bucket_edges(a, b, spec.num_buckets)
    _snapshot(spec)

    sample_sets = []
    for run in range(spec.runs):
        directory = run_dir(spec, run)
        if (directory / "manifest.jsonl").exists():
            logger.info(f"Reusing samples in {directory}")
            sample_sets.append(read_sample_set(directory))
            continue

        if spec.exhaustive:
            sample_set = census(space, a, b, num_buckets=spec.num_buckets)
        else:
            sample_set = bucketed_sample(
                space, a, b, spec.num_buckets, spec.per_bucket_target, spec.sample_params(run), workers=spec.workers
            )
        write_sample_set(sample_set, directory, language.file_extension)
        logger.info(f"Run {run}: {len(sample_set)} programs written to {directory}")
        sample_sets.append(sample_set)
    return {"sample_sets": sample_sets}


def compile_node(state: CampaignState) -> dict:
    """Compile every run's samples, reusing cached verdicts."""
    spec, language = state["spec"], state["language"]
    resolve_executable(language)
    cache = VerdictCache(campaign_dir(spec) / "results" / "cache.jsonl", language)

    campaigns = []
    for run, sample_set in enumerate(state["sample_sets"]):
        result = run_campaign(sample_set, language, workers=spec.workers, cache=cache)
        write_campaign_result(result, results_path(spec, run))
        campaigns.append(result)
    return {"campaigns": campaigns}


def load_results_node(state: CampaignState) -> dict:
    """Read results/run-<r>.jsonl written by an earlier measure."""
    spec = state["spec"]
    language = spec.campaign_name
    if state.get("language") is not None:
        language = state["language"].name
    campaigns = []
    for run in range(spec.runs):
        path = results_path(spec, run)
        if not path.exists():
            raise FileNotFoundError(f"missing campaign results {path}")
        campaigns.append(read_campaign_result(path, language=language))
    return {"campaigns": campaigns}


def report_node(state: CampaignState) -> dict:
    spec = state["spec"]
    report = aggregate_runs(state["campaigns"], spec.metric_params)
    files = emit_report(report, campaign_dir(spec) / "report")
    return {"report": report, "files": files}


# ----------------------------------------------------------------------
# Graph Construction
# ----------------------------------------------------------------------
NODES: Dict[str, Callable[[CampaignState], dict]] = {
    "loader": load_node,
    "sampler": sample_node,
    "compiler": compile_node,
    "results_loader": load_results_node,
    "reporter": report_node,
}

PIPELINES: Dict[str, Sequence[str]] = {
    "sample": ("loader", "sampler"),
    "measure": ("loader", "sampler", "compiler", "reporter"),
    "report": ("results_loader", "reporter"),
}


def create_campaign_engine(mode: str = "measure"):
    if mode not in PIPELINES:
        raise ConfigurationError(f"unknown pipeline '{mode}'")
    stages = PIPELINES[mode]
    workflow = StateGraph(CampaignState)

    for name in stages:
        workflow.add_node(name, NODES[name])

    workflow.add_edge(START, stages[0])
    for before, after in zip(stages, stages[1:]):
        workflow.add_edge(before, after)
    workflow.add_edge(stages[-1], END)

    return workflow.compile()
