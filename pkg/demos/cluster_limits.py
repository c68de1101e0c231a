"""How the two percentage caps bound the number of clusters.

Tighter caps forbid more merges, so the fewest reachable clusters rises,
while the most is always the number of distinct solutions.

    python demos/cluster_limits.py
"""

from importlib.resources import files

from stn_analyst import PartitionConfig, build_stn, cluster_limits, load_dataset, partition

fixture = files("stn_analyst") / "data" / "fixture"
dataset = load_dataset([(fixture / "algo_1.tsv", "algo_1"), (fixture / "algo_2.tsv", "algo_2")])
solutions = dataset.solutions()

print("size%  volume%   min  max")
for size in (2, 5, 20, 100):
    for volume in (1, 5, 100):
        limits = cluster_limits(solutions, PartitionConfig(size, volume))
        print(f"{size:5}  {volume:7}  {limits.min_clusters:4} {limits.max_clusters:4}")

# Partitioning at any k inside the limits gives a coarser STN.
config = PartitionConfig(5, 5, "Euclidean", cluster_number=40)
result = partition(solutions, config)
stn = build_stn(dataset, result)
print(f"\nk=40: {len(stn.nodes)} nodes, {len(stn.edges)} edges")
print(f"cluster 0 holds {len(result.members(0))} solution(s), medoid {result.representative[0]}")
