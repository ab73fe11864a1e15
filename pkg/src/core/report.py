import json
import logging
from pathlib import Path
from typing import Dict, List, Union

import pandas as pd
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from src.core.metrics import CQReport, CurvePoint

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"

SUMMARY_COLUMNS = ["language", "run_id", "cq", "accepted", "rejected", "timeout", "crashed", "total"]
CURVE_COLUMNS = ["x", "lcq", "defined", "window_population"]

# plot geometry (px)
WIDTH, HEIGHT = 720, 420
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 40, 50

_env = Environment(
    loader=FileSystemLoader(str(TEMPLATE_DIR)),
    autoescape=lambda name: bool(name) and name.endswith(".svg.j2"),
    undefined=StrictUndefined,
    keep_trailing_newline=True,
    trim_blocks=True,
    lstrip_blocks=True,
)


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def summary_frame(r: CQReport) -> pd.DataFrame:
    rows = []
    for run_id, cq, counts in zip(r.run_ids, r.per_run_cq, r.per_run_counts):
        rows.append({"language": r.language, "run_id": run_id, "cq": cq, **counts, "total": sum(counts.values())})
    if rows:
        rows.append({
            "language": r.language, "run_id": "mean", "cq": r.cq,
            **r.verdict_breakdown, "total": sum(r.verdict_breakdown.values()),
        })
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def curve_frame(curve: List[CurvePoint]) -> pd.DataFrame:
    rows = [
        {"x": p.x, "lcq": p.lcq, "defined": "true" if p.defined else "false", "window_population": p.population}
        for p in curve
    ]
    frame = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    frame["lcq"] = frame["lcq"].astype("float64")
    return frame


# ----------------------------------------------------------------------
# SVG plot
# ----------------------------------------------------------------------
def _segments(curve: List[CurvePoint], size_bound: int) -> List[str]:
    """Polyline point lists; undefined points split the line."""
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    segments, current = [], []
    for p in curve:
        if p.lcq is None:
            if current:
                segments.append(" ".join(current))
            current = []
            continue
        px = LEFT + plot_w * p.x / size_bound
        py = TOP + plot_h * (1 - p.lcq / 100.0)
        current.append(f"{px:.2f},{py:.2f}")
    if current:
        segments.append(" ".join(current))
    return segments


def render_svg(r: CQReport) -> str:
    bound = r.params.size_bound
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    tick_step = max(1, bound // 8)
    x_ticks = [{"value": v, "pos": LEFT + plot_w * v / bound} for v in range(0, bound + 1, tick_step)]
    y_ticks = [{"value": v, "pos": TOP + plot_h * (1 - v / 100)} for v in (0, 25, 50, 75, 100)]
    return _env.get_template("lcq_curve.svg.j2").render(
        width=WIDTH, height=HEIGHT, left=LEFT, top=TOP,
        plot_w=plot_w, plot_h=plot_h,
        language=r.language,
        cq=r.cq,
        epsilon=r.params.epsilon,
        x_ticks=x_ticks,
        y_ticks=y_ticks,
        mean_segments=_segments(r.lcq_curve, bound),
        run_segments=[_segments(c, bound) for c in r.per_run_curves] if len(r.per_run_curves) > 1 else [],
    )


# ----------------------------------------------------------------------
# Emission
# ----------------------------------------------------------------------
def emit_report(r: CQReport, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """Write CSV, SVG, markdown and JSON views of a report. Output bytes depend only on r."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "cq_summary": out / "cq_summary.csv",
        "lcq_curve": out / "lcq_curve.csv",
        "svg": out / "lcq_curve.svg",
        "summary": out / "summary.md",
        "json": out / "report.json",
    }

    _write_csv(summary_frame(r), files["cq_summary"])
    _write_csv(curve_frame(r.lcq_curve), files["lcq_curve"])
    for k, curve in enumerate(r.per_run_curves):
        path = out / f"lcq_curve_run-{k}.csv"
        _write_csv(curve_frame(curve), path)
        files[f"lcq_curve_run-{k}"] = path

    files["svg"].write_text(render_svg(r), encoding="utf-8")
    files["summary"].write_text(
        _env.get_template("summary.md.j2").render(report=r, runs=list(zip(r.run_ids, r.per_run_cq, r.per_run_counts))),
        encoding="utf-8",
    )
    files["json"].write_text(json.dumps(r.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    logger.info(f"Report for {r.language} written to {out}")
    return files
