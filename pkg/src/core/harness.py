import hashlib
import json
import logging
import os
import shutil
import signal
import subprocess
import sys
import tempfile
import threading
import time
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import jsonlines
from mpire import WorkerPool
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.core.errors import ConfigurationError
from src.core.sampler import Sample, SampleSet
from src.core.settings import get_settings
from src.core.treegrammar import RenderRules, size_of
from src.utils.scrub import scrub_diagnostics

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    TIMEOUT = "timeout"
    CRASHED = "crashed"


# ----------------------------------------------------------------------
# Language configuration
# ----------------------------------------------------------------------
class LanguageConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(min_length=1)
    file_extension: str = Field(min_length=1, description="Extension of the written program file")
    compile_command: Tuple[str, ...] = Field(description="argv template; {file} is the program path, {python} the interpreter")
    entry_wrapper: Optional[Tuple[str, str]] = Field(default=None, description="(prefix, suffix) around each program")
    timeout: float = Field(default_factory=lambda: get_settings().compile_timeout, gt=0)
    expected_success_exit: int = 0
    render: RenderRules = Field(default_factory=RenderRules)

    @field_validator("compile_command")
    @classmethod
    def _one_file_placeholder(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        if not value:
            raise ValueError("compile command is empty")
        count = sum(arg.count("{file}") for arg in value)
        if count != 1:
            raise ValueError(f"compile command must contain {{file}} exactly once, found {count}")
        return value

    def argv(self, path: Union[str, Path]) -> List[str]:
        return [arg.replace("{python}", sys.executable).replace("{file}", str(path)) for arg in self.compile_command]

    def source(self, text: str) -> str:
        prefix, suffix = self.entry_wrapper or ("", "")
        return prefix + text + suffix + "\n"

    def fingerprint(self) -> str:
        payload = self.model_dump_json(exclude={"render"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_language_config(path: Union[str, Path]) -> LanguageConfig:
    """
    Read a language config file with `language`, `wrapper` and `render` sections.
    `{config_dir}` in the command expands to the directory holding the config file.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: invalid JSON ({e})") from None

    language = data.get("language") or {}
    wrapper = data.get("wrapper")
    config_dir = str(path.parent.resolve())
    command = language.get("command")
    if isinstance(command, list):
        command = [arg.replace("{config_dir}", config_dir) if isinstance(arg, str) else arg for arg in command]
    fields = {
        "name": language.get("name"),
        "file_extension": language.get("extension"),
        "compile_command": command,
        "expected_success_exit": language.get("success_exit", 0),
        "render": data.get("render") or {},
    }
    if "timeout_seconds" in language:
        fields["timeout"] = language["timeout_seconds"]
    if wrapper:
        fields["entry_wrapper"] = (wrapper.get("prefix", ""), wrapper.get("suffix", ""))
    try:
        return LanguageConfig(**fields)
    except ValidationError as e:
        raise ConfigurationError(f"{path}: {e}") from None


def resolve_executable(cfg: LanguageConfig) -> str:
    program = cfg.argv("program")[0]
    found = shutil.which(program)
    if found is None:
        raise ConfigurationError(f"compiler executable '{program}' for {cfg.name} was not found")
    return found


# ----------------------------------------------------------------------
# Results
# ----------------------------------------------------------------------
class CompileResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int = 0
    bucket: int = 0
    size: int = 0
    verdict: Verdict
    exit_code: Optional[int] = None
    duration_ms: float = 0.0
    stderr_head: str = ""

    def record(self) -> dict:
        return {
            "index": str(self.index),
            "bucket": self.bucket,
            "size": self.size,
            "verdict": self.verdict.value,
            "exit_code": self.exit_code,
            "duration_ms": round(self.duration_ms, 3),
            "stderr_head": self.stderr_head,
        }


class CampaignResult(BaseModel):
    language: str
    run_id: str = ""
    results: List[CompileResult] = Field(default_factory=list)

    @property
    def counts(self) -> Dict[str, int]:
        counts = {v.value: 0 for v in Verdict}
        for r in self.results:
            counts[r.verdict.value] += 1
        return counts

    @property
    def total(self) -> int:
        return len(self.results)


def write_campaign_result(c: CampaignResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with jsonlines.open(path, mode="w") as writer:
        writer.write_all({"language": c.language, "run_id": c.run_id, **r.record()} for r in c.results)
    return path


def read_campaign_result(path: Union[str, Path], language: str = "", run_id: str = "") -> CampaignResult:
    results = []
    with jsonlines.open(path) as reader:
        for record in reader:
            language = record.pop("language", language)
            run_id = record.pop("run_id", run_id)
            record["index"] = int(record["index"])
            results.append(CompileResult(**record))
    return CampaignResult(language=language, run_id=run_id, results=results)


# ----------------------------------------------------------------------
# Verdict cache
# ----------------------------------------------------------------------
class VerdictCache:
    """JSON-lines store of verdicts keyed by sha256(program) and the config fingerprint."""

    def __init__(self, path: Union[str, Path], cfg: LanguageConfig):
        self.path = Path(path)
        self.config_hash = cfg.fingerprint()
        self._lock = threading.Lock()
        self._entries: Dict[str, dict] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with jsonlines.open(self.path) as reader:
            for record in reader.iter(skip_invalid=True):
                if isinstance(record, dict) and "key" in record and "verdict" in record:
                    self._entries[record["key"]] = record
                else:
                    logger.warning(f"Ignoring malformed verdict cache record in {self.path}")
        logger.info(f"Verdict cache {self.path.name}: {len(self._entries)} entries")

    def key(self, text: str) -> str:
        return f"{hashlib.sha256(text.encode('utf-8')).hexdigest()}:{self.config_hash}"

    def get(self, sample: Sample) -> Optional[CompileResult]:
        entry = self._entries.get(self.key(sample.text))
        if entry is None:
            return None
        return CompileResult(
            index=sample.index,
            bucket=sample.bucket,
            size=sample.size,
            verdict=Verdict(entry["verdict"]),
            exit_code=entry.get("exit_code"),
            duration_ms=entry.get("duration_ms", 0.0),
            stderr_head=entry.get("stderr_head", ""),
        )

    def put(self, sample: Sample, result: CompileResult) -> None:
        record = {"key": self.key(sample.text), **result.record()}
        with self._lock:
            self._entries[record["key"]] = record
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with jsonlines.open(self.path, mode="a") as writer:
                writer.write(record)

    def __len__(self) -> int:
        return len(self._entries)


# ----------------------------------------------------------------------
# Compilation
# ----------------------------------------------------------------------
def _classify(returncode: int, cfg: LanguageConfig) -> Verdict:
    if returncode < 0:
        return Verdict.CRASHED
    if returncode == cfg.expected_success_exit:
        return Verdict.ACCEPTED
    return Verdict.REJECTED


def compile_one(p: str, cfg: LanguageConfig, index: int = 0, bucket: int = 0) -> CompileResult:
    """Write p (wrapped) to a fresh directory, run the compiler on it and classify the outcome."""
    limit = get_settings().stderr_head_bytes
    with tempfile.TemporaryDirectory(prefix="cq-") as workdir:
        path = Path(workdir) / f"program.{cfg.file_extension.lstrip('.')}"
        path.write_text(cfg.source(p), encoding="utf-8")

        started = time.monotonic()
        try:
            proc = subprocess.Popen(
                cfg.argv(path),
                cwd=workdir,
                stdin=subprocess.DEVNULL,
                stdout=subprocess.DEVNULL,
                stderr=subprocess.PIPE,
                start_new_session=True,
            )
        except FileNotFoundError as e:
            raise ConfigurationError(f"cannot run compiler for {cfg.name}: {e}") from None

        exit_code: Optional[int]
        try:
            _, err = proc.communicate(timeout=cfg.timeout)
            exit_code = proc.returncode
            verdict = _classify(exit_code, cfg)
        except subprocess.TimeoutExpired:
            os.killpg(proc.pid, signal.SIGKILL)
            _, err = proc.communicate()
            exit_code, verdict = None, Verdict.TIMEOUT
        duration_ms = (time.monotonic() - started) * 1000.0

        return CompileResult(
            index=index,
            bucket=bucket,
            size=size_of(p),
            verdict=verdict,
            exit_code=exit_code,
            duration_ms=duration_ms,
            stderr_head=scrub_diagnostics(err or b"", workdir, limit),
        )


def run_campaign(
    s: SampleSet,
    cfg: LanguageConfig,
    workers: int = 1,
    cache: Optional[VerdictCache] = None,
    run_id: Optional[str] = None,
) -> CampaignResult:
    """Compile every sample once; results are ordered by (bucket, index) whatever the worker count."""
    if workers < 1:
        raise ConfigurationError(f"workers must be >= 1, got {workers}")
    if run_id is None:
        run_id = f"{s.params.seed}-{datetime.now(timezone.utc):%Y%m%dT%H%M%SZ}"
    resolve_executable(cfg)

    results: List[CompileResult] = []
    pending: List[Sample] = []
    for sample in s.samples:
        hit = cache.get(sample) if cache is not None else None
        if hit is not None:
            results.append(hit)
        else:
            pending.append(sample)
    if cache is not None and results:
        logger.info(f"{cfg.name}: {len(results)} verdicts reused from cache, {len(pending)} to compile")

    def job(sample: Sample) -> CompileResult:
        result = compile_one(sample.text, cfg, index=sample.index, bucket=sample.bucket)
        if cache is not None:
            cache.put(sample, result)
        return result

    if workers > 1 and len(pending) > 1:
        with WorkerPool(n_jobs=min(workers, len(pending)), start_method="threading") as pool:
            results.extend(pool.map(job, [(sample,) for sample in pending]))
    else:
        results.extend(job(sample) for sample in pending)

    results.sort(key=lambda r: (r.bucket, r.index))
    campaign = CampaignResult(language=cfg.name, run_id=run_id, results=results)
    logger.info(f"{cfg.name} run {run_id}: {campaign.counts}")
    return campaign
