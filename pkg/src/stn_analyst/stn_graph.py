"""Search Trajectory Network construction and DOT/GraphML export."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

import networkx as nx

from .partitioning import PartitionError, PartitionResult
from .trajectory_io import Dataset, better

# algo_1 purple and algo_2 green, as STNWeb draws them; further algorithms cycle
ALGORITHM_COLORS = (
    "#800080",
    "#008000",
    "#1f77b4",
    "#ff7f0e",
    "#d62728",
    "#8c564b",
    "#e377c2",
    "#17becf",
)
SHARED_COLOR = "#d3d3d3"
START_COLOR = "#ffd700"
BEST_COLOR = "#ff0000"
END_COLOR = "#505050"


@dataclass
class StnNode:
    id: int
    label: str
    best_fitness: float
    is_start: bool = False
    is_end: bool = False
    is_best: bool = False
    visits: dict[str, int] = field(default_factory=dict)

    @property
    def is_shared(self) -> bool:
        return sum(1 for v in self.visits.values() if v > 0) >= 2

    @property
    def size(self) -> int:
        return sum(self.visits.values())


@dataclass
class StnEdge:
    source: int
    target: int
    traversals: dict[str, int] = field(default_factory=dict)


@dataclass
class STN:
    nodes: dict[int, StnNode]
    edges: dict[tuple[int, int], StnEdge]
    algorithms: tuple[str, ...]
    best_global_fitness: float
    sense: str
    walks: dict[str, list[list[int]]]

    def color(self, algorithm: str) -> str:
        return ALGORITHM_COLORS[self.algorithms.index(algorithm) % len(ALGORITHM_COLORS)]

    def trajectory_locations(self, algorithm: str) -> list[frozenset[int]]:
        """One location set per trajectory of ``algorithm``."""
        return [frozenset(w) for w in self.walks[algorithm]]

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph(best_global_fitness=self.best_global_fitness, sense=self.sense)
        for node in self.nodes.values():
            attrs = {
                "label": node.label,
                "fitness": node.best_fitness,
                "start": node.is_start,
                "end": node.is_end,
                "best": node.is_best,
                "shared": node.is_shared,
                "size": node.size,
                "color": self._node_color(node),
            }
            for algo in self.algorithms:
                attrs[f"visits_{algo}"] = node.visits.get(algo, 0)
            g.add_node(node.id, **attrs)
        for (u, v), edge in self.edges.items():
            attrs = {"color": self.color(next(a for a in self.algorithms if edge.traversals.get(a)))}
            for algo in self.algorithms:
                attrs[f"traversals_{algo}"] = edge.traversals.get(algo, 0)
            attrs["weight"] = sum(edge.traversals.values())
            g.add_edge(u, v, **attrs)
        return g

    def _node_color(self, node: StnNode) -> str:
        if node.is_best:
            return BEST_COLOR
        if node.is_start:
            return START_COLOR
        if node.is_end:
            return END_COLOR
        if node.is_shared:
            return SHARED_COLOR
        return self.color(next(a for a in self.algorithms if node.visits.get(a)))


def _collapse(seq):
    out = []
    for x in seq:
        if not out or out[-1] != x:
            out.append(x)
    return out


def build_stn(dataset: Dataset, partition: PartitionResult | None = None) -> STN:
    """Merge every trajectory of every algorithm into one STN.

    Locations are raw solutions, or cluster ids when ``partition`` is given.
    Consecutive repeats of a location are collapsed, so there are no self
    loops. Node visit counts are numbers of distinct trajectories.
    """
    sense = dataset.sense
    tol = dataset.fitness_tol
    best_global = dataset.best_global_fitness

    if partition is not None:
        assignment = partition.assignment
        missing = [s for s in dataset.solutions() if s not in assignment]
        if missing:
            raise PartitionError(f"partition does not cover {len(set(missing))} solution(s), e.g. {missing[0]}")

        def locate(sol):
            return assignment[sol]

        def label(key, sol):
            return f"cluster {key}"
    else:

        def locate(sol):
            return sol

        def label(key, sol):
            return str(sol)

    ids: dict[object, int] = {}
    nodes: dict[int, StnNode] = {}
    edges: dict[tuple[int, int], StnEdge] = {}
    walks: dict[str, list[list[int]]] = {a: [] for a in dataset.names}

    for algo, traj in dataset.trajectories():
        walk = []
        for step in traj.steps:
            key = locate(step.solution)
            if key not in ids:
                ids[key] = len(ids)
                nodes[ids[key]] = StnNode(ids[key], label(key, step.solution), step.fitness)
            node = nodes[ids[key]]
            if better(step.fitness, node.best_fitness, sense):
                node.best_fitness = step.fitness
            walk.append(node.id)
        walk = _collapse(walk)
        walks[algo].append(walk)

        nodes[walk[0]].is_start = True
        nodes[walk[-1]].is_end = True
        for nid in set(walk):
            nodes[nid].visits[algo] = nodes[nid].visits.get(algo, 0) + 1
        for u, v in zip(walk, walk[1:]):
            edge = edges.setdefault((u, v), StnEdge(u, v))
            edge.traversals[algo] = edge.traversals.get(algo, 0) + 1

    for node in nodes.values():
        node.is_best = abs(node.best_fitness - best_global) <= tol

    return STN(nodes, edges, dataset.names, best_global, sense, walks)


def edge_multiset(stn: STN, algorithm: str) -> Counter:
    return Counter({(u, v): e.traversals[algorithm] for (u, v), e in stn.edges.items() if e.traversals.get(algorithm)})


_DOT_PLAIN = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _dot_id(value) -> str:
    text = str(value).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{text}"'


def _dot_key(key: str) -> str:
    return key if _DOT_PLAIN.match(key) else _dot_id(key)


def _dot_attr(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _dot_id(repr(value))
    if isinstance(value, int):
        return str(value)
    return _dot_id(value)


def to_dot(stn: STN) -> str:
    g = stn.to_networkx()
    lines = ["digraph STN {"]
    lines.append(f"  graph [sense={_dot_attr(stn.sense)}, best_global_fitness={_dot_attr(stn.best_global_fitness)}];")
    lines.append("  node [style=filled];")
    for nid, attrs in g.nodes(data=True):
        body = ", ".join(f"{_dot_key(k)}={_dot_attr(v)}" for k, v in attrs.items())
        lines.append(f"  {nid} [{body}];")
    for u, v, attrs in g.edges(data=True):
        body = ", ".join(f"{_dot_key(k)}={_dot_attr(v)}" for k, v in attrs.items())
        lines.append(f"  {u} -> {v} [{body}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_graphml(stn: STN) -> str:
    body = "\n".join(nx.generate_graphml(stn.to_networkx()))
    return '<?xml version="1.0" encoding="utf-8"?>\n' + body + "\n"


def export_graph(stn: STN, fmt: str = "dot") -> str:
    if fmt == "dot":
        return to_dot(stn)
    if fmt == "graphml":
        return to_graphml(stn)
    raise ValueError(f"unknown graph format {fmt!r}; expected 'dot' or 'graphml'")
