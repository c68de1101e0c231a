"""The whole command-line pipeline against the built-in stub endpoint.

Copies the fixture to a scratch directory, then runs
analyze -> prompt -> ask -> evaluate -> render and prints the scorecards.
Nothing leaves the machine.

    python demos/offline_pipeline.py
"""

import shutil
import tempfile
from importlib.resources import as_file, files
from pathlib import Path

from stn_analyst.cli import main

work = Path(tempfile.mkdtemp(prefix="stn-demo-"))
with as_file(files("stn_analyst") / "data" / "fixture") as src:
    shutil.copytree(src, work / "fixture")
manifest = str(work / "fixture" / "manifest.json")
out = work / "fixture" / "out"

for argv in (
    ["analyze", "-m", manifest],
    ["prompt", "-m", manifest, "--task", "A"],
    ["prompt", "-m", manifest, "--task", "B"],
    ["ask", "-m", manifest, "--task", "A", "--offline"],
    ["ask", "-m", manifest, "--task", "B", "--offline"],
    ["ask", "-m", manifest, "--task", "C", "--offline"],
    ["evaluate", str(out / "cases"), "-m", manifest, "--offline"],
    ["render", "-m", manifest],
):
    print("$ stn-analyst", " ".join(argv))
    code = main(argv)
    if code:
        raise SystemExit(code)

print("\nartifacts in", out)
for path in sorted(out.iterdir()):
    print("  ", path.name)
