"""Regenerate the bundled two-algorithm fixture.

Two hill climbers on the 2-D Rastrigin function, sampled on a 0.25 lattice
so that runs revisit and share points:

* algo_1 takes single lattice steps from anywhere in [-5, 5]^2 and stalls in
  local minima;
* algo_2 starts nearer the centre with a wider neighbourhood, and exactly one
  of its runs is allowed to reach the origin (the global minimum).

Run from the repository root::

    python demos/make_fixture.py
"""

import json
import math
from pathlib import Path

import numpy as np

from stn_analyst.partitioning import PartitionConfig, cluster_limits
from stn_analyst.trajectory_io import load_dataset

OUT = Path(__file__).resolve().parents[1] / "src" / "stn_analyst" / "data" / "fixture"
GRID = 0.25


def rastrigin(x):
    return 10 * len(x) + sum(v * v - 10 * math.cos(2 * math.pi * v) for v in x)


def climb(rng, start, radius, steps, allow_origin):
    pos = start
    path = [pos]
    for _ in range(steps):
        moves = [(dx, dy) for dx in range(-radius, radius + 1) for dy in range(-radius, radius + 1) if dx or dy]
        dx, dy = moves[rng.integers(len(moves))]
        cand = (pos[0] + dx, pos[1] + dy)
        if max(abs(c) for c in cand) > 20 or (cand == (0, 0) and not allow_origin):
            continue
        if rastrigin([c * GRID for c in cand]) <= rastrigin([c * GRID for c in pos]):
            pos = cand
            path.append(pos)
    return path


def write(name, runs):
    lines = []
    for run_id, path in enumerate(runs, start=1):
        for p in path:
            x = [c * GRID for c in p]
            lines.append(f"{run_id}\t{rastrigin(x):.6f}\t{x[0]:g},{x[1]:g}\n")
    (OUT / f"{name}.tsv").write_text("".join(lines), encoding="utf-8")


def main():
    rng = np.random.default_rng(2024)
    OUT.mkdir(parents=True, exist_ok=True)
    algo_1 = [climb(rng, tuple(rng.integers(-20, 21, 2)), 1, 60, False) for _ in range(10)]
    algo_2 = [climb(rng, tuple(rng.integers(-8, 9, 2)), 2, 60, False) for _ in range(9)]
    algo_2.insert(0, climb(rng, (3, -2), 2, 200, True) + [(0, 0)])
    write("algo_1", algo_1)
    write("algo_2", algo_2)

    # pick a cluster number inside the reachable range, like a user would
    dataset = load_dataset([(OUT / "algo_1.tsv", "algo_1"), (OUT / "algo_2.tsv", "algo_2")])
    config = PartitionConfig(5, 5, "Euclidean")
    limits = cluster_limits(dataset.solutions(), config)
    cluster_number = limits.min_clusters + (limits.max_clusters - limits.min_clusters) * 3 // 5
    print(f"limits {limits.min_clusters}..{limits.max_clusters}, using {cluster_number}")
    manifest = {
        "inputs": [{"path": "algo_1.tsv", "name": "algo_1"}, {"path": "algo_2.tsv", "name": "algo_2"}],
        "sense": "minimize",
        "space": "continuous",
        "partition": {"cluster_size_pct": 5, "volume_size_pct": 5, "measure": "Euclidean", "cluster_number": cluster_number},
        "output_dir": "out",
    }
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
