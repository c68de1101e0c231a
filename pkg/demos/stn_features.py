"""Build a search trajectory network from the bundled fixture and read off
the per-algorithm features that go into the winner-selection prompt.

    python demos/stn_features.py
"""

from importlib.resources import files

from stn_analyst import build_stn, extract_all, load_dataset, render_task_a
from stn_analyst.prompt_engine import extract_block

fixture = files("stn_analyst") / "data" / "fixture"
dataset = load_dataset([(fixture / "algo_1.tsv", "algo_1"), (fixture / "algo_2.tsv", "algo_2")])

# One node per distinct solution; consecutive repeats inside a run collapse.
stn = build_stn(dataset)
print(f"{len(stn.nodes)} nodes, {len(stn.edges)} edges")
print(f"best fitness found by any run: {stn.best_global_fitness}")
shared = sum(n.is_shared for n in stn.nodes.values())
print(f"{shared} nodes visited by both algorithms")

for f in extract_all(dataset, stn):
    print(f"{f.algorithm:>8}: best x{f.total_best_global_fitness}, "
          f"connectivity {f.connectivity:.3f}, mean best {f.avg_fitness:.3f}")

# The DATA block of the prompt states the same numbers as sentences.
prompt = render_task_a(extract_all(dataset, stn), dataset.sense)
print()
print(extract_block(prompt.text, "DATA"))
