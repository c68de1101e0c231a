"""Plot-ready CSVs, native SVG grouped bar charts and the final report."""

from __future__ import annotations

import csv
import html
import io
import math
from dataclasses import dataclass, field
from typing import Sequence
from xml.etree import ElementTree as ET

from .evaluation import PARAMETER_UPDATES, Verdict
from .features import AlgorithmFeatures
from .partitioning import PartitionConfig
from .prompt_engine import CONFIG_CSV_COLUMNS, FEATURES_CSV_COLUMNS, RenderedPrompt

SKY_BLUE = "#87CEEB"
ORANGE = "#FFA500"
PURPLE = "#800080"
DEFAULT_PALETTE = (SKY_BLUE, ORANGE, PURPLE)

WIDTH, HEIGHT = 800, 500
PAD = 0.10


class ReportingError(ValueError):
    pass


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Table":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or not rows[0]:
            raise ReportingError("CSV is empty")
        header, body = rows[0], [r for r in rows[1:] if r]
        if not body:
            raise ReportingError("CSV has no data rows")
        parsed = []
        for lineno, row in enumerate(body, start=2):
            if len(row) != len(header):
                raise ReportingError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
            values = [row[0]]
            for col, cell in zip(header[1:], row[1:]):
                try:
                    values.append(_number(cell))
                except ValueError:
                    raise ReportingError(f"line {lineno}: column {col!r} has non-numeric cell {cell!r}") from None
            parsed.append(tuple(values))
        return cls(tuple(header), tuple(parsed))


def _number(cell: str):
    value = float(cell)
    if not math.isfinite(value):
        raise ValueError(cell)
    return int(value) if value.is_integer() and "." not in cell and "e" not in cell.lower() else value


def _cell(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def features_table(features: Sequence[AlgorithmFeatures]) -> Table:
    """``algorithm,best_performance,average_performance``, one row per algorithm."""
    if not features:
        raise ReportingError("no algorithms to tabulate")
    rows = tuple((f.algorithm, f.best_fitness, f.avg_fitness) for f in features)
    return Table(FEATURES_CSV_COLUMNS, rows)


def apply_updates(config: PartitionConfig, verdict: Verdict) -> PartitionConfig:
    if verdict is None or verdict.kind != PARAMETER_UPDATES:
        raise ReportingError("a parameter-update verdict is needed to build the new configuration")
    names = {
        "cluster_size": "cluster_size_pct",
        "volume_size": "volume_size_pct",
        "distance_measure": "measure",
        "cluster_number": "cluster_number",
    }
    return config.replace(**{names[k]: v for k, v in verdict.updates})


def config_table(old: PartitionConfig, verdict: Verdict) -> Table:
    """Old vs suggested configuration; parameters not suggested are carried over."""
    new = apply_updates(old, verdict)
    rows = tuple(
        (label, c.cluster_size_pct, c.volume_size_pct, c.cluster_number)
        for label, c in (("old_configuration", old), ("new_configuration", new))
    )
    return Table(CONFIG_CSV_COLUMNS, rows)


def emit_task_c_csvs(
    features: Sequence[AlgorithmFeatures], old_config: PartitionConfig, verdict: Verdict
) -> tuple[str, str]:
    return features_table(features).to_csv(), config_table(old_config, verdict).to_csv()


def _nice_ceiling(value: float) -> float:
    if value <= 0:
        return 1.0
    exp = math.floor(math.log10(value))
    for m in (1, 2, 2.5, 5, 10):
        nice = m * 10**exp
        if nice >= value:
            return nice
    return 10 ** (exp + 1)


def _fmt(x: float) -> str:
    return repr(round(x, 6)) if not float(x).is_integer() else str(int(x))


def render_grouped_bar(
    table: Table | str,
    palette: Sequence[str] = DEFAULT_PALETTE,
    title: str | None = None,
    y_label: str | None = None,
) -> str:
    """Grouped bar chart as SVG 1.1 text.

    The first column names the x groups; each further column is one series,
    drawn in ``palette`` order. Negative values extend the axis below zero.
    """
    if isinstance(table, str):
        table = Table.from_csv(table)
    series = table.columns[1:]
    if not series:
        raise ReportingError("need at least one numeric column")
    if len(palette) < len(series):
        raise ReportingError(f"palette has {len(palette)} colors for {len(series)} series")
    values = [v for row in table.rows for v in row[1:]]
    top = _nice_ceiling(max(max(values), 0.0))
    bottom = -_nice_ceiling(-min(values)) if min(values) < 0 else 0.0

    left, right = WIDTH * PAD, WIDTH * (1 - PAD)
    upper, lower = HEIGHT * PAD, HEIGHT * (1 - PAD)
    plot_h = lower - upper
    span = top - bottom

    def px(v: float) -> float:
        # divide first: plot_h / span overflows for subnormal spans
        return plot_h * (v / span)

    zero_y = upper + px(top)

    svg = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        version="1.1",
        width=str(WIDTH),
        height=str(HEIGHT),
        viewBox=f"0 0 {WIDTH} {HEIGHT}",
    )
    ET.SubElement(svg, "rect", {"class": "background", "x": "0", "y": "0", "width": str(WIDTH),
                                "height": str(HEIGHT), "fill": "#ffffff"})
    if title:
        t = ET.SubElement(svg, "text", {"x": str(WIDTH / 2), "y": str(upper / 2), "text-anchor": "middle",
                                        "font-size": "16", "font-family": "sans-serif"})
        t.text = title

    # axes and ticks
    axis = {"stroke": "#000000", "stroke-width": "1"}
    ET.SubElement(svg, "line", {"class": "axis", "x1": str(left), "y1": str(upper), "x2": str(left),
                                "y2": str(lower), **axis})
    ET.SubElement(svg, "line", {"class": "axis", "x1": str(left), "y1": repr(zero_y), "x2": str(right),
                                "y2": repr(zero_y), **axis})
    for i in range(6):
        v = bottom + (top - bottom) * i / 5
        y = upper + px(top - v)
        ET.SubElement(svg, "line", {"class": "tick", "x1": str(left - 4), "y1": repr(y), "x2": str(left),
                                    "y2": repr(y), **axis})
        lbl = ET.SubElement(svg, "text", {"x": str(left - 6), "y": repr(y + 4), "text-anchor": "end",
                                          "font-size": "11", "font-family": "sans-serif"})
        lbl.text = _fmt(v)
    if y_label:
        yl = ET.SubElement(svg, "text", {"x": "14", "y": str(HEIGHT / 2), "font-size": "12",
                                         "font-family": "sans-serif",
                                         "transform": f"rotate(-90 14 {HEIGHT / 2})", "text-anchor": "middle"})
        yl.text = y_label

    group_w = (right - left) / len(table.rows)
    bar_w = group_w * 0.8 / len(series)
    for g, row in enumerate(table.rows):
        x0 = left + g * group_w + group_w * 0.1
        for s, (name, value) in enumerate(zip(series, row[1:])):
            h = px(abs(value))
            y = zero_y - h if value >= 0 else zero_y
            x = x0 + s * bar_w
            bar = ET.SubElement(svg, "rect", {
                "class": "bar", "x": repr(x), "y": repr(y), "width": repr(bar_w), "height": repr(h),
                "fill": palette[s], "data-series": name, "data-group": str(row[0]), "data-value": _cell(value),
            })
            ET.SubElement(bar, "title").text = f"{row[0]} {name}: {_cell(value)}"
            label = ET.SubElement(svg, "text", {
                "class": "value", "x": repr(x + bar_w / 2), "y": repr((y if value >= 0 else y + h + 12) - 3),
                "text-anchor": "middle", "font-size": "10", "font-family": "sans-serif",
            })
            label.text = _fmt(value)
        glabel = ET.SubElement(svg, "text", {"x": repr(left + (g + 0.5) * group_w), "y": str(lower + 18),
                                             "text-anchor": "middle", "font-size": "12",
                                             "font-family": "sans-serif"})
        glabel.text = str(row[0])

    # legend in the top-right padding band
    lx = right - 150
    for s, name in enumerate(series):
        ly = 8 + s * 14
        ET.SubElement(svg, "rect", {"class": "legend-swatch", "x": str(lx), "y": str(ly), "width": "10",
                                    "height": "10", "fill": palette[s]})
        lt = ET.SubElement(svg, "text", {"x": str(lx + 14), "y": str(ly + 9), "font-size": "11",
                                         "font-family": "sans-serif"})
        lt.text = name
    ET.indent(svg)
    return ET.tostring(svg, encoding="unicode") + "\n"


@dataclass
class TaskSection:
    title: str
    prompts: list[RenderedPrompt] = field(default_factory=list)
    replies: list[str] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    figures: list[tuple[str, str]] = field(default_factory=list)  # (caption, svg)


@dataclass
class ReportArtifacts:
    task_a: TaskSection | None = None
    task_b: TaskSection | None = None
    task_c: TaskSection | None = None
    scorecards: str | None = None  # CSV text, see evaluation.scorecards_csv
    title: str = "STN analysis report"


@dataclass(frozen=True)
class Report:
    text: str
    format: str


def _fence(body: str, lang: str = "text") -> str:
    ticks = "```"
    while ticks in body:
        ticks += "`"
    end = "" if body.endswith("\n") else "\n"
    return f"{ticks}{lang}\n{body}{end}{ticks}"


def _markdown_section(section: TaskSection) -> list[str]:
    out = [f"## {section.title}", ""]
    for prompt in section.prompts:
        out += [f"### Prompt {prompt.task}", "", _fence(prompt.message_content()), ""]
    for i, reply in enumerate(section.replies, start=1):
        out += [f"### Reply {i}", "", _fence(reply), ""]
    for i, verdict in enumerate(section.verdicts, start=1):
        line = f"- Verdict {i}: `{verdict.kind}`"
        rendered = verdict.render()
        if rendered:
            line += f" `{rendered}`"
        if verdict.violation_reason:
            line += f" ({verdict.violation_reason})"
        out.append(line)
    if section.verdicts:
        out.append("")
    for caption, svg in section.figures:
        out += [f"### {caption}", "", svg.strip(), ""]
    return out


def assemble_report(artifacts: ReportArtifacts, fmt: str = "markdown") -> Report:
    """Self-contained report, sections in task order A, B, C, then scorecards."""
    sections = [s for s in (artifacts.task_a, artifacts.task_b, artifacts.task_c) if s is not None]
    if not sections and not artifacts.scorecards:
        raise ReportingError("nothing to report")
    lines = [f"# {artifacts.title}", ""]
    for section in sections:
        lines += _markdown_section(section)
    if artifacts.scorecards:
        lines += ["## Appendix: scorecards", "", _fence(artifacts.scorecards, "csv"), ""]
    markdown = "\n".join(lines).rstrip("\n") + "\n"
    if fmt == "markdown":
        return Report(markdown, fmt)
    if fmt == "html":
        return Report(_to_html(artifacts.title, sections, artifacts.scorecards), fmt)
    raise ReportingError(f"unknown report format {fmt!r}")


def _to_html(title: str, sections: list[TaskSection], cards: str | None) -> str:
    esc = html.escape
    parts = ["<!DOCTYPE html>", "<html>", "<head>", '<meta charset="utf-8">', f"<title>{esc(title)}</title>",
             "</head>", "<body>", f"<h1>{esc(title)}</h1>"]
    for section in sections:
        parts.append(f"<h2>{esc(section.title)}</h2>")
        for prompt in section.prompts:
            parts += [f"<h3>Prompt {esc(prompt.task)}</h3>", f"<pre>{esc(prompt.message_content())}</pre>"]
        for i, reply in enumerate(section.replies, start=1):
            parts += [f"<h3>Reply {i}</h3>", f"<pre>{esc(reply)}</pre>"]
        if section.verdicts:
            parts.append("<ul>")
            for v in section.verdicts:
                parts.append(f"<li>{esc(v.kind)} {esc(v.render())} {esc(v.violation_reason or '')}</li>")
            parts.append("</ul>")
        for caption, svg in section.figures:
            parts += [f"<h3>{esc(caption)}</h3>", svg.strip()]
    if cards:
        parts += ["<h2>Appendix: scorecards</h2>", f"<pre>{esc(cards)}</pre>"]
    parts += ["</body>", "</html>"]
    return "\n".join(parts) + "\n"
