"""Per-algorithm STN features used to build the winner-selection prompt."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

from .stn_graph import STN
from .trajectory_io import FITNESS_TOL, AlgorithmRuns, Dataset, optimum


@dataclass(frozen=True)
class AlgorithmFeatures:
    algorithm: str
    total_best_global_fitness: int
    connectivity: float
    avg_fitness: float
    trajectory_count: int
    best_fitness: float

    def as_row(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "total_best_global_fitness": self.total_best_global_fitness,
            "connectivity": self.connectivity,
            "avg_fitness": self.avg_fitness,
            "trajectory_count": self.trajectory_count,
            "best_fitness": self.best_fitness,
        }


def total_best_global_fitness(algo: AlgorithmRuns, best_global: float, tol: float = FITNESS_TOL) -> int:
    """Number of trajectories whose best fitness equals ``best_global``."""
    return sum(1 for t in algo.trajectories if abs(t.best_fitness - best_global) <= tol)


def connectivity(location_sets: Sequence[Iterable]) -> float:
    """Fraction of trajectory pairs that share at least one location.

    Works from an inverted index (location -> trajectories visiting it), so
    only pairs that actually overlap are ever enumerated. A single trajectory
    has connectivity 0.
    """
    m = len(location_sets)
    if m < 2:
        return 0.0
    visitors: dict[object, list[int]] = {}
    for idx, locs in enumerate(location_sets):
        for loc in set(locs):
            visitors.setdefault(loc, []).append(idx)
    overlapping = set()
    for trajs in visitors.values():
        if len(trajs) > 1:
            overlapping.update(combinations(trajs, 2))
    return len(overlapping) / (m * (m - 1) / 2)


def avg_fitness(algo: AlgorithmRuns, use_final: bool = False) -> float:
    """Mean of per-trajectory best fitness (or last-step fitness with ``use_final``)."""
    values = [t.final_fitness if use_final else t.best_fitness for t in algo.trajectories]
    return sum(values) / len(values)


def extract_features(algo: AlgorithmRuns, stn: STN, best_global: float, tol: float, use_final=False):
    return AlgorithmFeatures(
        algorithm=algo.name,
        total_best_global_fitness=total_best_global_fitness(algo, best_global, tol),
        connectivity=connectivity(stn.trajectory_locations(algo.name)),
        avg_fitness=avg_fitness(algo, use_final),
        trajectory_count=len(algo.trajectories),
        best_fitness=optimum((t.best_fitness for t in algo.trajectories), stn.sense),
    )


def extract_all(dataset: Dataset, stn: STN, use_final: bool = False) -> list[AlgorithmFeatures]:
    """Features for every algorithm, in dataset order."""
    best_global = dataset.best_global_fitness
    tol = dataset.fitness_tol
    return [extract_features(a, stn, best_global, tol, use_final) for a in dataset.algorithms]
