"""Reading and writing raw search-trajectory logs.

A trajectory file is UTF-8 TSV with one step per line::

    run<TAB>fitness<TAB>solution

Continuous solutions are comma-separated reals, discrete solutions are opaque
tokens. Blank lines and lines starting with ``#`` are ignored. Files ending in
``.gz`` are decompressed transparently.
"""

from __future__ import annotations

import gzip
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

MINIMIZE = "minimize"
MAXIMIZE = "maximize"
DISCRETE = "discrete"
CONTINUOUS = "continuous"

SENSES = (MINIMIZE, MAXIMIZE)
SPACES = (DISCRETE, CONTINUOUS)

#: absolute tolerance for comparing non-integer fitness values
FITNESS_TOL = 1e-9


class TrajectoryFormatError(ValueError):
    """Malformed trajectory input; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class DatasetError(ValueError):
    """Inconsistent or invalid combination of trajectory files."""


@dataclass(frozen=True)
class SolutionPoint:
    kind: str
    value: str | tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.value)

    def __str__(self) -> str:
        if self.kind == DISCRETE:
            return self.value
        return ",".join(repr(x) for x in self.value)


@dataclass(frozen=True)
class Step:
    fitness: float
    solution: SolutionPoint


def better(a: float, b: float, sense: str) -> bool:
    """True when fitness ``a`` is strictly better than ``b``."""
    return a < b if sense == MINIMIZE else a > b


def optimum(values: Iterable[float], sense: str) -> float:
    return min(values) if sense == MINIMIZE else max(values)


@dataclass(frozen=True)
class Trajectory:
    run_id: int
    steps: tuple[Step, ...]
    sense: str = MINIMIZE

    @property
    def best_fitness(self) -> float:
        return optimum((s.fitness for s in self.steps), self.sense)

    @property
    def final_fitness(self) -> float:
        return self.steps[-1].fitness

    @property
    def solutions(self) -> list[SolutionPoint]:
        return [s.solution for s in self.steps]


@dataclass(frozen=True)
class AlgorithmRuns:
    name: str
    trajectories: tuple[Trajectory, ...]

    @property
    def best_fitness(self) -> float:
        sense = self.trajectories[0].sense
        return optimum((t.best_fitness for t in self.trajectories), sense)


@dataclass(frozen=True)
class Dataset:
    algorithms: tuple[AlgorithmRuns, ...]
    sense: str = MINIMIZE
    space: str = CONTINUOUS
    names: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(a.name for a in self.algorithms))

    def __getitem__(self, name: str) -> AlgorithmRuns:
        for algo in self.algorithms:
            if algo.name == name:
                return algo
        raise KeyError(name)

    def trajectories(self):
        """Yield ``(algorithm_name, trajectory)`` in dataset order."""
        for algo in self.algorithms:
            for traj in algo.trajectories:
                yield algo.name, traj

    def solutions(self) -> list[SolutionPoint]:
        """Every visited solution, in visiting order (duplicates kept)."""
        return [s.solution for _, t in self.trajectories() for s in t.steps]

    @property
    def best_global_fitness(self) -> float:
        return optimum((a.best_fitness for a in self.algorithms), self.sense)

    @property
    def fitness_tol(self) -> float:
        return fitness_tolerance(s.fitness for _, t in self.trajectories() for s in t.steps)


def fitness_tolerance(values: Iterable[float]) -> float:
    """Exact comparison for integer-valued fitness, ``FITNESS_TOL`` otherwise."""
    return 0.0 if all(float(v).is_integer() for v in values) else FITNESS_TOL


def _open_text(path: str | os.PathLike):
    path = os.fspath(path)
    if path.endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def _guess_space(token: str) -> str:
    try:
        values = [float(x) for x in token.split(",")]
    except ValueError:
        return DISCRETE
    return CONTINUOUS if all(math.isfinite(v) for v in values) else DISCRETE


def parse_lines(
    lines: Iterable[str],
    algorithm_name: str,
    sense: str = MINIMIZE,
    space: str | None = None,
    path: str | None = None,
) -> AlgorithmRuns:
    """Parse TSV lines into runs; ``space=None`` infers it from the first step."""
    if sense not in SENSES:
        raise ValueError(f"unknown sense {sense!r}")
    if space is not None and space not in SPACES:
        raise ValueError(f"unknown space {space!r}")

    runs: dict[int, list[Step]] = {}
    dim = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise TrajectoryFormatError(f"expected 3 tab-separated columns, got {len(parts)}", path, lineno)
        run_s, fit_s, sol_s = (p.strip() for p in parts)
        try:
            run_id = int(run_s)
        except ValueError:
            raise TrajectoryFormatError(f"run id {run_s!r} is not an integer", path, lineno) from None
        if run_id < 1:
            raise TrajectoryFormatError(f"run id must be >= 1, got {run_id}", path, lineno)
        try:
            fitness = float(fit_s)
        except ValueError:
            raise TrajectoryFormatError(f"fitness {fit_s!r} is not a number", path, lineno) from None
        if not math.isfinite(fitness):
            raise TrajectoryFormatError(f"fitness {fit_s!r} is not finite", path, lineno)
        if not sol_s:
            raise TrajectoryFormatError("empty solution", path, lineno)

        if space is None:
            space = _guess_space(sol_s)
        if space == CONTINUOUS:
            try:
                coords = tuple(float(x) for x in sol_s.split(","))
            except ValueError:
                raise DatasetError(
                    f"{path or algorithm_name}:{lineno}: non-numeric solution {sol_s!r} in a continuous dataset"
                ) from None
            if not all(math.isfinite(c) for c in coords):
                raise TrajectoryFormatError(f"solution {sol_s!r} has non-finite coordinates", path, lineno)
            if dim is None:
                dim = len(coords)
            elif len(coords) != dim:
                raise TrajectoryFormatError(
                    f"solution dimension {len(coords)} differs from {dim} seen earlier", path, lineno
                )
            point = SolutionPoint(CONTINUOUS, coords)
        else:
            point = SolutionPoint(DISCRETE, sol_s)
        runs.setdefault(run_id, []).append(Step(fitness, point))

    if not runs:
        raise TrajectoryFormatError("no trajectory steps found (empty file)", path)
    trajectories = tuple(Trajectory(rid, tuple(steps), sense) for rid, steps in runs.items())
    return AlgorithmRuns(algorithm_name, trajectories)


def parse_trajectory_file(
    path: str | os.PathLike,
    algorithm_name: str,
    sense: str = MINIMIZE,
    space: str | None = None,
) -> AlgorithmRuns:
    """Parse one algorithm's trajectory file.

    Runs are returned in order of first appearance of their run id; steps keep
    line order within each run.
    """
    try:
        with _open_text(path) as fh:
            return parse_lines(fh, algorithm_name, sense, space, path=os.fspath(path))
    except (OSError, EOFError, UnicodeDecodeError) as exc:
        raise TrajectoryFormatError(f"cannot read file: {exc}", os.fspath(path)) from exc


def _space_of(algo: AlgorithmRuns) -> str:
    return algo.trajectories[0].steps[0].solution.kind


def validate_dataset(dataset: Dataset) -> Dataset:
    names = [a.name for a in dataset.algorithms]
    if not names:
        raise DatasetError("a dataset needs at least one algorithm")
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise DatasetError(f"duplicate algorithm name(s): {', '.join(dupes)}")
    kinds = {s.kind for s in dataset.solutions()}
    if len(kinds) > 1 or (kinds and kinds != {dataset.space}):
        raise DatasetError(
            f"inconsistent search space: dataset declared {dataset.space}, files contain {sorted(kinds)}"
        )
    if dataset.space == CONTINUOUS:
        dims = {s.dim for s in dataset.solutions()}
        if len(dims) > 1:
            raise DatasetError(f"inconsistent solution dimensions across files: {sorted(dims)}")
    return dataset


def load_dataset(
    inputs: Sequence[tuple[str | os.PathLike, str]],
    sense: str = MINIMIZE,
    space: str | None = None,
) -> Dataset:
    """Load ``(path, algorithm_name)`` pairs into a validated :class:`Dataset`.

    With ``space=None`` each file's space is inferred and all files must agree.
    """
    if not inputs:
        raise DatasetError("no input files given")
    names = [name for _, name in inputs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise DatasetError(f"duplicate algorithm name(s): {', '.join(dupes)}")

    algos = [parse_trajectory_file(p, name, sense, space) for p, name in inputs]
    kinds = {_space_of(a) for a in algos}
    if len(kinds) > 1:
        detail = ", ".join(f"{a.name}={_space_of(a)}" for a in algos)
        raise DatasetError(f"inconsistent search space across files ({detail})")
    return validate_dataset(Dataset(tuple(algos), sense, space or kinds.pop()))


def format_runs(algo: AlgorithmRuns) -> str:
    """Serialize runs back to the TSV format (``repr`` floats, lossless)."""
    out = []
    for traj in algo.trajectories:
        for step in traj.steps:
            out.append(f"{traj.run_id}\t{step.fitness!r}\t{step.solution}\n")
    return "".join(out)


def write_trajectory_file(path: str | os.PathLike, algo: AlgorithmRuns) -> None:
    path = os.fspath(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "wt", encoding="utf-8") as fh:
        fh.write(format_runs(algo))


def random_dataset(
    rng,
    n_algorithms: int = 2,
    n_runs: int = 10,
    n_steps: int = 20,
    dim: int = 2,
    grid: int = 5,
    sense: str = MINIMIZE,
    integer_fitness: bool = False,
) -> Dataset:
    """Random walks on a coarse lattice, so runs revisit and share solutions.

    ``rng`` is a :class:`numpy.random.Generator`. Fitness is the sphere
    function of the lattice point, so equal solutions have equal fitness.
    """
    algos = []
    for a in range(n_algorithms):
        runs = []
        m = int(rng.integers(1, n_runs + 1))
        for r in range(m):
            pos = rng.integers(0, grid, size=dim)
            steps = []
            for _ in range(int(rng.integers(1, n_steps + 1))):
                coords = tuple(float(x) / 2 for x in pos)
                fit = float(sum(int(x) ** 2 for x in pos))
                if not integer_fitness:
                    fit = fit / 4 + 0.1
                steps.append(Step(fit, SolutionPoint(CONTINUOUS, coords)))
                move = rng.integers(-1, 2, size=dim)
                pos = (pos + move).clip(0, grid - 1)
            runs.append(Trajectory(r + 1, tuple(steps), sense))
        algos.append(AlgorithmRuns(f"algo_{a + 1}", tuple(runs)))
    return Dataset(tuple(algos), sense, CONTINUOUS)
