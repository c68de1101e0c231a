"""Rendering of the tag-block prompts sent to the LLM.

Tasks A and B are built from four blocks in fixed order::

    [CONTEXT] / [RULES] or [PARAMETERS DEFINITIONS] / [DATA] / [QUERIES]

Only [DATA] changes between runs; the other blocks come from
:class:`TemplateAssets`. Task C is two static instructions, each with one CSV
attachment.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from .features import AlgorithmFeatures
from .partitioning import ClusterLimits, PartitionConfig
from .trajectory_io import MAXIMIZE, MINIMIZE

TASK_A, TASK_B, TASK_C1, TASK_C2 = "A", "B", "C1", "C2"

FEATURES_CSV_COLUMNS = ("algorithm", "best_performance", "average_performance")
CONFIG_CSV_COLUMNS = ("configuration", "cluster_size", "volume_size", "cluster_number")

TASK_B_FORMAT_INSTRUCTION = (
    "The new numerical values must be presented in the format: [name_parameter=new_value]."
)

_CONTEXT = (
    "STNWeb is a web tool that draws Search Trajectory Networks (STNs) to compare how "
    "optimization algorithms move through the search space of one problem instance. "
    "Every node is a location: a single solution or, after partitioning, a cluster of "
    "solutions. Every directed edge is a move from one location to the next made by a run "
    "(trajectory) of an algorithm, and each algorithm has its own color. Yellow squares "
    "mark where trajectories start. Trajectories end at dark grey triangles, or at red "
    "dots when the end point has the best fitness found by any algorithm. Light grey "
    "nodes are locations visited by at least two different algorithms. The more "
    "trajectories pass through a node, the larger it is drawn."
)

_TASK_A_RULES = (
    "The more nodes point to nodes of the best fitness (this does not assume that it "
    "represents the global optimum), the higher the algorithm's quality because it can "
    "obtain a better result.",
    "The algorithm that has more inter-trajectory connectivity is likely to be more "
    "robust. If and only if it finds nodes of the best fitness.",
    "For a minimization problem, indicating that an algorithm is superior involves "
    "favoring a smaller average fitness value. Whereas in the case of maximization, "
    "declaring an algorithm as better necessitates a higher average fitness value.",
)

_TASK_B_DEFINITIONS = (
    "Cluster size (percentage): Maximal cluster size in terms of the percentage of all "
    "solutions a cluster contains.",
    "Volume size (percentage): Maximal cluster size in terms of the percentage of the "
    "covered search space volume spanned by the solutions a cluster contains.",
    "Distance measure: A function that measures the distance between solutions, "
    "influencing the creation of clusters. Possible values: Hamming, Euclidean, Manhattan.",
    "Cluster number: Number of clusters obtained for these solutions (from lowest to "
    "highest partitioning). The maximum number implies no partitioning, while lower "
    "values result in increased partitioning. Good results are obtained when the cluster "
    "number is above the minimum value but far from the maximum.",
)

_TASK_A_QUERIES = (
    "Using only the rules and the data above, decide whether one algorithm is the clear "
    "winner. Write the winner as [winner=algorithm_name], using the algorithm name exactly "
    "as it appears in the data. If the algorithms show similar values for all features and "
    "no clear winner exists, write [draw] instead. The square brackets must contain only "
    "the winner declaration, and do not name other algorithms next to it. After the "
    "declaration, explain your reasoning briefly."
)

_TASK_B_QUERIES = (
    "Using the parameter definitions and the data above, suggest a parameter setup for "
    "the agglomerative clustering that produces an STN that is easier to interpret, and "
    "justify each change. Only suggest values within the valid ranges. "
    + TASK_B_FORMAT_INSTRUCTION
    + " Use these parameter names: cluster_size, volume_size, distance_measure, cluster_number."
)

_TASK_C_PROMPTS = (
    "Generate a grouped bar plot, considering both the best-performance (in sky blue) and "
    "the average-performance (in orange).",
    "Generate a grouped bar plot with the X-axis representing the old_configuration and "
    "new_configuration, and the Y-axis representing cluster-size (in sky blue), "
    "volume-size (in orange), and cluster-number (in purple).",
)


@dataclass(frozen=True)
class TemplateAssets:
    """Static prompt texts. Edit a copy and bump ``version`` when changing them."""

    version: str = "1"
    context_text: str = _CONTEXT
    task_a_rules: tuple[str, ...] = _TASK_A_RULES
    task_b_parameter_definitions: tuple[str, ...] = _TASK_B_DEFINITIONS
    task_a_queries: str = _TASK_A_QUERIES
    task_b_queries: str = _TASK_B_QUERIES
    task_c_prompts: tuple[str, ...] = _TASK_C_PROMPTS

    def __post_init__(self):
        if len(self.task_a_rules) != 3:
            raise ValueError("task A needs exactly 3 rules")
        if len(self.task_b_parameter_definitions) != 4:
            raise ValueError("task B needs exactly 4 parameter definitions")
        if len(self.task_c_prompts) != 2:
            raise ValueError("task C needs exactly 2 prompts")

    @classmethod
    def from_json(cls, text: str) -> "TemplateAssets":
        data = json.loads(text)
        for key in ("task_a_rules", "task_b_parameter_definitions", "task_c_prompts"):
            if key in data:
                data[key] = tuple(data[key])
        return replace(cls(), **data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, ensure_ascii=False) + "\n"


DEFAULT_ASSETS = TemplateAssets()


@dataclass(frozen=True)
class Attachment:
    name: str
    content: str


@dataclass(frozen=True)
class RenderedPrompt:
    task: str
    text: str
    attachments: tuple[Attachment, ...] = field(default=())

    def message_content(self) -> str:
        """The exact user-message text sent on the wire (CSV inlined)."""
        parts = [self.text]
        for att in self.attachments:
            body = att.content if att.content.endswith("\n") else att.content + "\n"
            parts.append(f"File: {att.name}\n```csv\n{body}```")
        return "\n\n".join(parts)


def _blocks(*pairs: tuple[str, str]) -> str:
    return "\n\n".join(f"[{tag}]\n{body}" for tag, body in pairs) + "\n"


def _numbered(items: Sequence[str]) -> str:
    return "\n".join(f"{i}. {text}" for i, text in enumerate(items, start=1))


def format_connectivity(value: float) -> str:
    return f"{value:.2f}"


def format_fitness(value: float) -> str:
    return f"{value:.3f}"


def format_pct(value: float) -> str:
    return f"{value:g}%"


def feature_sentences(f: AlgorithmFeatures) -> list[str]:
    # "nodes" stays plural for a count of 1, as in the reference sentence
    return [
        f"{f.algorithm} has {f.total_best_global_fitness} nodes pointing to nodes with the best fitness.",
        f"{f.algorithm} has {format_connectivity(f.connectivity)} connectivity among all the nodes.",
        f"{f.algorithm} has an average fitness of {format_fitness(f.avg_fitness)} "
        f"across {f.trajectory_count} trajectories.",
    ]


def render_task_a(
    features: Sequence[AlgorithmFeatures],
    sense: str = MINIMIZE,
    assets: TemplateAssets = DEFAULT_ASSETS,
) -> RenderedPrompt:
    if len(features) < 2:
        raise ValueError(f"task A compares at least 2 algorithms, got {len(features)}")
    if sense not in (MINIMIZE, MAXIMIZE):
        raise ValueError(f"unknown sense {sense!r}")
    problem = "minimization" if sense == MINIMIZE else "maximization"
    data = [f"This is a {problem} problem."]
    for f in features:
        data.extend(feature_sentences(f))
    text = _blocks(
        ("CONTEXT", assets.context_text),
        ("RULES", _numbered(assets.task_a_rules)),
        ("DATA", "\n".join(data)),
        ("QUERIES", assets.task_a_queries),
    )
    return RenderedPrompt(TASK_A, text)


def task_b_data(config: PartitionConfig, limits: ClusterLimits) -> str:
    return "\n".join(
        [
            "These are the parameters of the agglomerative clustering algorithm:",
            f"- cluster size: {format_pct(config.cluster_size_pct)}",
            f"- volume size: {format_pct(config.volume_size_pct)}",
            f"- distance measure: {config.measure}",
            f"- cluster number: {config.cluster_number}",
            "These are the resulting limits:",
            f"- minimum possible number of clusters: {limits.min_clusters}",
            f"- maximum possible number of clusters: {limits.max_clusters}",
        ]
    )


def render_task_b(
    config: PartitionConfig,
    limits: ClusterLimits,
    assets: TemplateAssets = DEFAULT_ASSETS,
) -> RenderedPrompt:
    if not 1 <= limits.min_clusters <= limits.max_clusters:
        raise ValueError(f"inconsistent cluster limits {limits.min_clusters}..{limits.max_clusters}")
    if config.cluster_number not in limits:
        raise ValueError(
            f"cluster number {config.cluster_number} outside limits "
            f"[{limits.min_clusters}, {limits.max_clusters}]"
        )
    text = _blocks(
        ("CONTEXT", assets.context_text),
        ("PARAMETERS DEFINITIONS", _numbered(assets.task_b_parameter_definitions)),
        ("DATA", task_b_data(config, limits)),
        ("QUERIES", assets.task_b_queries),
    )
    return RenderedPrompt(TASK_B, text)


def check_csv(text: str, columns: Sequence[str], what: str) -> list[dict]:
    """Parse ``text`` and require every column in ``columns``; returns the rows."""
    if not text or not text.strip():
        raise ValueError(f"{what} CSV is empty")
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in columns if c not in header]
    if missing:
        raise ValueError(f"{what} CSV is missing column(s): {', '.join(missing)}")
    rows = list(reader)
    if not rows:
        raise ValueError(f"{what} CSV has no data rows")
    return rows


def render_task_c(
    features_csv: str,
    config_csv: str,
    assets: TemplateAssets = DEFAULT_ASSETS,
) -> tuple[RenderedPrompt, RenderedPrompt]:
    check_csv(features_csv, FEATURES_CSV_COLUMNS, "features")
    check_csv(config_csv, CONFIG_CSV_COLUMNS, "configuration")
    first, second = assets.task_c_prompts
    return (
        RenderedPrompt(TASK_C1, first + "\n", (Attachment("features.csv", features_csv),)),
        RenderedPrompt(TASK_C2, second + "\n", (Attachment("configuration.csv", config_csv),)),
    )


def extract_block(text: str, tag: str) -> str:
    """Body of the ``[tag]`` block of a rendered prompt."""
    head = f"[{tag}]\n"
    start = text.index(head) + len(head)
    end = text.find("\n\n[", start)
    body = text[start:] if end < 0 else text[start:end]
    return body.rstrip("\n")
