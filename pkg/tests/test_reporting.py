import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stn_analyst.evaluation import Verdict, parse_parameter_updates
from stn_analyst.features import AlgorithmFeatures
from stn_analyst.partitioning import PartitionConfig
from stn_analyst.prompt_engine import RenderedPrompt
from stn_analyst.reporting import (
    ORANGE,
    PURPLE,
    SKY_BLUE,
    ReportArtifacts,
    ReportingError,
    Table,
    TaskSection,
    assemble_report,
    config_table,
    emit_task_c_csvs,
    features_table,
    render_grouped_bar,
)

NS = {"svg": "http://www.w3.org/2000/svg"}


def bars(svg_text):
    root = ET.fromstring(svg_text)
    return [r for r in root.iter("{http://www.w3.org/2000/svg}rect") if r.get("class") == "bar"]


def test_features_csv():
    feats = [AlgorithmFeatures("algo_1", 0, 0.0, 17.7, 10, 2.5), AlgorithmFeatures("algo_2", 1, 0.07, 3.7, 10, 0.0)]
    assert features_table(feats).to_csv() == (
        "algorithm,best_performance,average_performance\nalgo_1,2.5,17.7\nalgo_2,0.0,3.7\n"
    )
    with pytest.raises(ReportingError):
        features_table([])


def test_config_carry_over():
    old = PartitionConfig(5, 5, "Euclidean", 400)
    table = config_table(old, parse_parameter_updates("[cluster_number=350]"))
    assert table.rows == (("old_configuration", 5, 5, 400), ("new_configuration", 5, 5, 350))
    assert table.to_csv() == (
        "configuration,cluster_size,volume_size,cluster_number\n"
        "old_configuration,5,5,400\nnew_configuration,5,5,350\n"
    )


def test_config_needs_updates():
    with pytest.raises(ReportingError):
        config_table(PartitionConfig(5, 5), Verdict.violation("nope"))


def test_emit_task_c_csvs():
    feats = [AlgorithmFeatures("a", 0, 0.0, 2.0, 1, 1.0)]
    f_csv, c_csv = emit_task_c_csvs(feats, PartitionConfig(5, 5, cluster_number=9), parse_parameter_updates("[volume_size=7.5]"))
    assert f_csv.splitlines()[1] == "a,1.0,2.0"
    assert c_csv.splitlines()[2] == "new_configuration,5,7.5,9"


def test_csv_round_trip():
    table = Table(("name", "x", "y"), (("a", 1, 2.5), ("b", -3, 1e-7)))
    assert Table.from_csv(table.to_csv()) == table


@pytest.mark.parametrize(
    "text, message",
    [("", "empty"), ("a,b\n", "no data"), ("a,b\nx,1,2\n", "expected 2"), ("a,b\nx,hello\n", "non-numeric"), ("a,b\nx,nan\n", "non-numeric")],
)
def test_csv_errors(text, message):
    with pytest.raises(ReportingError, match=message):
        Table.from_csv(text)


CONFIG_CSV = "configuration,cluster_size,volume_size,cluster_number\nold_configuration,5,5,400\nnew_configuration,5,5,350\n"


def test_config_plot_bars_and_colors():
    svg = render_grouped_bar(CONFIG_CSV)
    root = ET.fromstring(svg)
    assert root.get("width") == "800" and root.get("height") == "500"
    found = bars(svg)
    assert len(found) == 6
    assert {b.get("fill") for b in found} == {SKY_BLUE, ORANGE, PURPLE}
    by_series = {}
    for b in found:
        by_series.setdefault(b.get("data-series"), set()).add(b.get("fill"))
    assert by_series == {"cluster_size": {SKY_BLUE}, "volume_size": {ORANGE}, "cluster_number": {PURPLE}}
    swatches = [r for r in root.iter("{http://www.w3.org/2000/svg}rect") if r.get("class") == "legend-swatch"]
    assert [s.get("fill") for s in swatches] == [SKY_BLUE, ORANGE, PURPLE]


def test_plot_is_deterministic():
    assert render_grouped_bar(CONFIG_CSV, title="t") == render_grouped_bar(CONFIG_CSV, title="t")


def test_plot_inside_padding():
    for b in bars(render_grouped_bar(CONFIG_CSV)):
        x, y, w, h = (float(b.get(k)) for k in ("x", "y", "width", "height"))
        assert 80 <= x and x + w <= 720 + 1e-9
        assert 50 - 1e-9 <= y and y + h <= 450 + 1e-9


def test_negative_values():
    svg = render_grouped_bar("g,v\na,-2\nb,3\n", palette=("#000000",))
    neg, pos = bars(svg)
    assert float(neg.get("height")) > 0 and float(pos.get("height")) > 0
    assert float(neg.get("y")) == pytest.approx(float(pos.get("y")) + float(pos.get("height")))


def test_palette_too_short():
    with pytest.raises(ReportingError, match="palette"):
        render_grouped_bar(CONFIG_CSV, palette=("#000000",))


@settings(max_examples=100, deadline=None)
@given(values=st.lists(st.floats(0, 1e6, allow_nan=False, allow_infinity=False), min_size=2, max_size=12))
def test_taller_bar_for_larger_value(values):
    text = "g,v\n" + "".join(f"g{i},{v!r}\n" for i, v in enumerate(values))
    heights = [float(b.get("height")) for b in bars(render_grouped_bar(text, palette=("#123456",)))]
    for a, ha in zip(values, heights):
        for b, hb in zip(values, heights):
            if a > b:
                assert ha > hb or (ha == hb and a - b < 1e-9 * max(values))


def _artifacts():
    prompt = RenderedPrompt("A", "[DATA]\nx\n")
    return ReportArtifacts(
        task_a=TaskSection("Task A", [prompt], ["[winner=a]"], [Verdict.winner("a")]),
        task_c=TaskSection("Task C", figures=[("Configuration", render_grouped_bar(CONFIG_CSV))]),
        task_b=TaskSection("Task B", replies=["cluster_number: 3"], verdicts=[Verdict.violation("loose")]),
        scorecards="task,prompt_type,model,system_score,human_score\nA,Easy,m,1,\n",
    )


def test_markdown_report_order_and_stability():
    first = assemble_report(_artifacts()).text
    assert first == assemble_report(_artifacts()).text
    positions = [first.index(h) for h in ("## Task A", "## Task B", "## Task C", "## Appendix: scorecards")]
    assert positions == sorted(positions)
    assert "`[winner=a]`" in first
    assert "(loose)" in first
    assert first.count('class="bar"') == 6


def test_html_report():
    text = assemble_report(_artifacts(), fmt="html").text
    assert text.startswith("<!DOCTYPE html>")
    assert "&lt;" not in text.split("<svg", 1)[1].split("</svg>", 1)[0]
    assert "[DATA]" in text


def test_empty_report():
    with pytest.raises(ReportingError):
        assemble_report(ReportArtifacts())
    with pytest.raises(ReportingError):
        assemble_report(_artifacts(), fmt="pdf")


def test_subnormal_values():
    svg = render_grouped_bar("g,v\na,0.0\nb,2.225073858507e-311\n", palette=("#000000",))
    low, high = (float(b.get("height")) for b in bars(svg))
    assert low == 0.0 and high > 0
    assert "nan" not in svg and "inf" not in svg
