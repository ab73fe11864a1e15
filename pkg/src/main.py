import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import click
import typer
from rich.console import Console
from rich.table import Table

from src.core.engine import build_spec, create_campaign_engine, load_campaign_spec
from src.core.enumerator import Enumeration
from src.core.errors import CQError
from src.core.grammar import validate
from src.core.settings import get_settings
from src.core.treegrammar import compile_to_rtg
from src.utils.parser import load_grammar

logger = logging.getLogger(__name__)

app = typer.Typer(help="Measure the compilation quotient of a programming language.", no_args_is_help=True)
console = Console()

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_IO = 0, 1, 2, 3


def parse_range(value: str) -> Tuple[int, int]:
    try:
        a, b = (int(part) for part in value.split(":"))
    except ValueError:
        raise typer.BadParameter(f"expected A:B, got '{value}'") from None
    return a, b


def _fail(e: Exception) -> typer.Exit:
    if isinstance(e, CQError):
        code = e.exit_code
    elif isinstance(e, OSError):
        code = EXIT_IO
    else:
        code = EXIT_CONFIG
    logger.error(f"{type(e).__name__}: {e}")
    console.print(f"[bold red]error:[/bold red] {e}", highlight=False)
    return typer.Exit(code)


@app.callback()
def main(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Overrides CQ_LOG_LEVEL"),
):
    logging.basicConfig(
        level=(log_level or get_settings().log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@app.command()
def check(grammar: Path = typer.Argument(..., help="Grammar file (.cqg)")):
    """Parse, desugar and validate a grammar; print its statistics."""
    try:
        g = load_grammar(grammar)
        report = validate(g)
        rtg = compile_to_rtg(g)
    except (CQError, OSError) as e:
        raise _fail(e)

    enumeration = Enumeration(rtg)
    table = Table(title=f"Grammar statistics: {grammar.name}", show_header=False)
    table.add_row("start", rtg.start)
    table.add_row("nonterminals", str(len(rtg.nonterminals)))
    table.add_row("terminals", str(len(g.terminals)))
    table.add_row("productions", str(len(g.productions)))
    table.add_row("constructors", str(len(rtg.productions)))
    table.add_row("max arity", str(max(rule.arity for rule in rtg.productions)))
    table.add_row("finite", "yes" if enumeration.is_finite else "no")
    if enumeration.is_finite:
        table.add_row("programs", str(enumeration.total()))
    table.add_row("trees with k = 1..8 constructors", ", ".join(str(c) for c in enumeration.strata(8)))
    if report.unproductive:
        table.add_row("unproductive", ", ".join(sorted(report.unproductive)))
    if report.unreachable:
        table.add_row("unreachable", ", ".join(sorted(report.unreachable)))
    console.print(table)


@app.command()
def sample(
    grammar: Path = typer.Option(..., "--grammar", help="Grammar file (.cqg)"),
    config: Path = typer.Option(..., "--config", help="Language config (JSON)"),
    size_range: str = typer.Option(..., "--range", help="Byte range A:B, B exclusive"),
    buckets: int = typer.Option(1, "--buckets", min=1),
    target: int = typer.Option(100, "--target", min=0, help="Samples per bucket"),
    seed: int = typer.Option(0, "--seed"),
    out: Path = typer.Option(..., "--out", help="Campaign directory"),
    runs: int = typer.Option(1, "--runs", min=1),
    workers: Optional[int] = typer.Option(None, "--workers", min=1),
    exhaustive: bool = typer.Option(False, "--exhaustive", help="Write every program in range"),
):
    """Sample programs into <out>/samples/run-<r>/."""
    try:
        spec = build_spec(
            grammar_path=grammar, language_config_path=config, size_range=parse_range(size_range),
            num_buckets=buckets, per_bucket_target=target, seed=seed, output_dir=out,
            runs=runs, workers=workers, exhaustive=exhaustive,
        )
        state = create_campaign_engine("sample").invoke({"spec": spec})
    except (CQError, OSError) as e:
        raise _fail(e)

    for run, sample_set in enumerate(state["sample_sets"]):
        missing = {bucket: count for bucket, count in sample_set.shortfall.items() if count}
        console.print(f"run {run}: {len(sample_set)} programs in {out / 'samples' / f'run-{run}'}")
        if missing:
            console.print(f"[yellow]shortfall per bucket:[/yellow] {missing}", highlight=False)


@app.command()
def measure(
    spec_path: Path = typer.Option(..., "--spec", help="Campaign spec (JSON)"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1),
    runs: Optional[int] = typer.Option(None, "--runs", min=1),
):
    """Sample (or reuse samples), compile every program and write the report."""
    try:
        spec = load_campaign_spec(spec_path, workers=workers, runs=runs)
        state = create_campaign_engine("measure").invoke({"spec": spec})
    except (CQError, OSError) as e:
        raise _fail(e)
    _print_report(state["report"], state["files"]["cq_summary"].parent)


@app.command()
def report(campaign: Path = typer.Option(..., "--campaign", help="Campaign directory")):
    """Recompute the report from the results of an earlier measure."""
    try:
        spec = load_campaign_spec(campaign / "spec.json", output_dir=str(campaign.resolve()))
        runs = len(list((campaign / "results").glob("run-*.jsonl")))
        if runs:
            spec = spec.model_copy(update={"runs": runs})
        state = create_campaign_engine("report").invoke({"spec": spec})
    except (CQError, OSError) as e:
        raise _fail(e)
    _print_report(state["report"], state["files"]["cq_summary"].parent)


def _print_report(r, directory: Path) -> None:
    table = Table(title=f"Compilation quotient: {r.language}")
    for column in ("run", "CQ (%)", "accepted", "rejected", "timeout", "crashed"):
        table.add_column(column)
    for run_id, cq, counts in zip(r.run_ids, r.per_run_cq, r.per_run_counts):
        table.add_row(run_id, f"{cq:.3f}", *(str(counts[v]) for v in ("accepted", "rejected", "timeout", "crashed")))
    console.print(table)
    rsd = "n/a" if r.relative_std_dev is None else f"{r.relative_std_dev:.2f}%"
    console.print(f"mean CQ {r.cq:.3f}%, relative std. dev. {rsd}; report in {directory}")


def run(argv: Optional[List[str]] = None) -> int:
    """Entry point returning the process exit code; usage errors exit 1."""
    try:
        code = app(args=argv, standalone_mode=False)
    except click.UsageError as e:
        console.print(f"[bold red]usage error:[/bold red] {e.format_message()}", highlight=False)
        return EXIT_CONFIG
    except click.Abort:
        return EXIT_CONFIG
    return code if isinstance(code, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(run())
