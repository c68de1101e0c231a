"""Constrained agglomerative clustering of solutions into STN locations.

Clusters are merged bottom-up with complete linkage. A merge is only allowed
when the merged cluster holds at most ``cluster_size_pct`` percent of the
distinct solutions and spans at most ``volume_size_pct`` percent of the
dataset's bounding-box volume. The greedy merge sequence is deterministic, so
the partition at ``k`` clusters always refines the one at ``k - 1``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .trajectory_io import CONTINUOUS, DISCRETE, SolutionPoint

HAMMING = "Hamming"
EUCLIDEAN = "Euclidean"
MANHATTAN = "Manhattan"
MEASURES = (HAMMING, EUCLIDEAN, MANHATTAN)

# slack for float round-off in the percentage checks
_PCT_EPS = 1e-9


class PartitionError(ValueError):
    pass


class ClusterLimitError(PartitionError):
    """Requested cluster number falls outside the reachable range."""

    def __init__(self, cluster_number: int, limits: "ClusterLimits"):
        self.cluster_number = cluster_number
        self.limits = limits
        super().__init__(
            f"cluster number {cluster_number} outside limits "
            f"[{limits.min_clusters}, {limits.max_clusters}]"
        )


@dataclass(frozen=True)
class PartitionConfig:
    cluster_size_pct: float
    volume_size_pct: float
    measure: str = EUCLIDEAN
    cluster_number: int = 1

    def __post_init__(self):
        for name in ("cluster_size_pct", "volume_size_pct"):
            v = getattr(self, name)
            if not 0 < v <= 100:
                raise PartitionError(f"{name} must be in (0, 100], got {v}")
        if self.measure not in MEASURES:
            raise PartitionError(f"unknown distance measure {self.measure!r}; expected one of {MEASURES}")
        if int(self.cluster_number) != self.cluster_number or self.cluster_number < 1:
            raise PartitionError(f"cluster_number must be an integer >= 1, got {self.cluster_number}")

    def replace(self, **changes) -> "PartitionConfig":
        values = dict(
            cluster_size_pct=self.cluster_size_pct,
            volume_size_pct=self.volume_size_pct,
            measure=self.measure,
            cluster_number=self.cluster_number,
        )
        values.update(changes)
        return PartitionConfig(**values)


@dataclass(frozen=True)
class ClusterLimits:
    min_clusters: int
    max_clusters: int

    def __contains__(self, k: int) -> bool:
        return self.min_clusters <= k <= self.max_clusters


@dataclass(frozen=True)
class PartitionResult:
    """Cluster labels for the distinct solutions, in first-appearance order."""

    solutions: tuple[SolutionPoint, ...]
    labels: tuple[int, ...]
    medoids: tuple[int, ...]

    @property
    def cluster_count(self) -> int:
        return len(self.medoids)

    @property
    def assignment(self) -> dict[SolutionPoint, int]:
        return dict(zip(self.solutions, self.labels))

    @property
    def representative(self) -> dict[int, SolutionPoint]:
        return {cid: self.solutions[i] for cid, i in enumerate(self.medoids)}

    def members(self, cluster_id: int) -> list[SolutionPoint]:
        return [s for s, c in zip(self.solutions, self.labels) if c == cluster_id]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["solution_index", "cluster_id"])
        writer.writerows(enumerate(self.labels))
        return buf.getvalue()


def distance(a: SolutionPoint, b: SolutionPoint, measure: str) -> float:
    if measure == HAMMING:
        if a.kind != DISCRETE or b.kind != DISCRETE:
            raise PartitionError("Hamming distance needs discrete solutions")
        if len(a.value) != len(b.value):
            raise PartitionError(f"Hamming distance needs equal lengths, got {len(a.value)} and {len(b.value)}")
        return float(sum(x != y for x, y in zip(a.value, b.value)))
    if measure not in (EUCLIDEAN, MANHATTAN):
        raise PartitionError(f"unknown distance measure {measure!r}")
    if a.kind != CONTINUOUS or b.kind != CONTINUOUS:
        raise PartitionError(f"{measure} distance needs continuous solutions")
    if len(a.value) != len(b.value):
        raise PartitionError(f"dimension mismatch: {len(a.value)} vs {len(b.value)}")
    diff = np.subtract(a.value, b.value)
    if measure == EUCLIDEAN:
        return float(np.sqrt(np.dot(diff, diff)))
    return float(np.abs(diff).sum())


def distinct_solutions(solutions: Sequence[SolutionPoint]) -> list[SolutionPoint]:
    return list(dict.fromkeys(solutions))


def _check_compatible(points: Sequence[SolutionPoint], measure: str) -> None:
    kinds = {p.kind for p in points}
    if len(kinds) > 1:
        raise PartitionError("cannot partition a mix of discrete and continuous solutions")
    kind = kinds.pop()
    if measure == HAMMING and kind != DISCRETE:
        raise PartitionError("Hamming distance needs discrete solutions")
    if measure != HAMMING and kind != CONTINUOUS:
        raise PartitionError(f"{measure} distance needs continuous solutions")
    lengths = {len(p.value) for p in points}
    if len(lengths) > 1:
        raise PartitionError(f"solutions differ in length/dimension: {sorted(lengths)}")


def _pairwise(points: Sequence[SolutionPoint], measure: str) -> np.ndarray:
    if measure == HAMMING:
        X = np.array([[ord(c) for c in p.value] for p in points], dtype=np.int64)
        return (X[:, None, :] != X[None, :, :]).sum(axis=2).astype(float)
    X = np.array([p.value for p in points], dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    if measure == EUCLIDEAN:
        return np.sqrt((diff**2).sum(axis=2))
    return np.abs(diff).sum(axis=2)


class _Span:
    """Spanned-volume bookkeeping for one cluster per slot.

    Continuous: bounding-box volume over the axes where the dataset has
    nonzero range (zero-range axes contribute a factor of 1). Discrete: the
    number of strings in the per-position symbol box, minus one, so that
    singletons span nothing and the whole dataset spans everything.
    """

    def __init__(self, points: Sequence[SolutionPoint]):
        self.discrete = points[0].kind == DISCRETE
        if self.discrete:
            self.boxes = [[{c} for c in p.value] for p in points]
            total = [set() for _ in points[0].value]
            for p in points:
                for pos, c in enumerate(p.value):
                    total[pos].add(c)
            self.total = float(np.prod([len(s) for s in total])) - 1.0
        else:
            X = np.array([p.value for p in points], dtype=float)
            rng = X.max(axis=0) - X.min(axis=0)
            self.active = rng > 0
            self.lo = X.copy()
            self.hi = X.copy()
            self.total = float(np.prod(rng[self.active]))

    def fraction_with(self, i: int, others: np.ndarray) -> np.ndarray:
        """Volume fraction of cluster ``i`` merged with each cluster in ``others``."""
        if self.total <= 0:
            return np.zeros(len(others))
        if self.discrete:
            box = self.boxes[i]
            out = np.empty(len(others))
            for n, k in enumerate(others):
                card = 1.0
                for a, b in zip(box, self.boxes[k]):
                    card *= len(a | b)
                out[n] = (card - 1.0) / self.total
            return out
        lo = np.minimum(self.lo[i], self.lo[others])[:, self.active]
        hi = np.maximum(self.hi[i], self.hi[others])[:, self.active]
        return np.prod(hi - lo, axis=1) / self.total

    def merge(self, i: int, j: int) -> None:
        if self.discrete:
            self.boxes[i] = [a | b for a, b in zip(self.boxes[i], self.boxes[j])]
        else:
            self.lo[i] = np.minimum(self.lo[i], self.lo[j])
            self.hi[i] = np.maximum(self.hi[i], self.hi[j])


def _agglomerate(points: Sequence[SolutionPoint], config: PartitionConfig, stop_at: int = 1):
    """Run constrained complete-linkage merges until ``stop_at`` clusters remain
    or no merge is allowed. Returns ``(labels_by_slot, distances)`` where each
    point is labelled with the slot (lowest member index) of its cluster."""
    n = len(points)
    D = _pairwise(points, config.measure)
    link = D.copy()
    np.fill_diagonal(link, np.inf)
    size = np.ones(n, dtype=int)
    alive = np.ones(n, dtype=bool)
    owner = np.arange(n)
    span = _Span(points)
    size_cap = config.cluster_size_pct / 100.0 * n * (1 + _PCT_EPS)
    vol_cap = config.volume_size_pct / 100.0 + _PCT_EPS

    # allowed[i, k] for i < k; only rows/cols of a merged cluster change
    allowed = np.zeros((n, n), dtype=bool)
    for i in range(n - 1):
        others = np.arange(i + 1, n)
        ok = size[i] + size[others] <= size_cap
        ok &= span.fraction_with(i, others) <= vol_cap
        allowed[i, i + 1 :] = ok

    masked = np.where(allowed, link, np.inf)
    count = n
    while count > stop_at:
        flat = int(np.argmin(masked))
        i, j = divmod(flat, n)
        if not np.isfinite(masked[i, j]):
            break
        # i < j always: only the upper triangle is ever finite
        link[i] = np.maximum(link[i], link[j])
        link[:, i] = link[i]
        link[i, i] = np.inf
        link[j, :] = np.inf
        link[:, j] = np.inf
        size[i] += size[j]
        span.merge(i, j)
        alive[j] = False
        owner[owner == j] = i
        count -= 1

        masked[j, :] = np.inf
        masked[:, j] = np.inf
        others = np.flatnonzero(alive)
        others = others[others != i]
        ok = size[i] + size[others] <= size_cap
        if ok.any():
            ok[ok] &= span.fraction_with(i, others[ok]) <= vol_cap
        row = np.where(ok, link[i, others], np.inf)
        lower, upper = others < i, others > i
        masked[others[lower], i] = row[lower]
        masked[i, others[upper]] = row[upper]
    return owner, D


def cluster_limits(solutions: Sequence[SolutionPoint], config: PartitionConfig) -> ClusterLimits:
    """Fewest clusters reachable without breaking either percentage cap, and
    the number of distinct solutions (no partitioning)."""
    points = distinct_solutions(solutions)
    if not points:
        raise PartitionError("cannot compute cluster limits of an empty solution set")
    _check_compatible(points, config.measure)
    owner, _ = _agglomerate(points, config, stop_at=1)
    return ClusterLimits(len(set(owner.tolist())), len(points))


def partition(
    solutions: Sequence[SolutionPoint],
    config: PartitionConfig,
    limits: ClusterLimits | None = None,
) -> PartitionResult:
    """Partition the distinct solutions into exactly ``config.cluster_number`` clusters.

    Raises :class:`ClusterLimitError` when the requested number is not
    reachable under the percentage caps.
    """
    points = distinct_solutions(solutions)
    if not points:
        raise PartitionError("cannot partition an empty solution set")
    _check_compatible(points, config.measure)
    k = int(config.cluster_number)
    if k > len(points):
        raise ClusterLimitError(k, limits or cluster_limits(points, config))
    owner, D = _agglomerate(points, config, stop_at=k)
    slots = sorted(set(owner.tolist()))
    if len(slots) != k:
        raise ClusterLimitError(k, limits or ClusterLimits(len(slots), len(points)))

    relabel = {slot: cid for cid, slot in enumerate(slots)}
    labels = tuple(relabel[s] for s in owner.tolist())
    medoids = []
    owner_arr = np.asarray(owner)
    for slot in slots:
        idx = np.flatnonzero(owner_arr == slot)
        cost = D[np.ix_(idx, idx)].sum(axis=1)
        medoids.append(int(idx[int(np.argmin(cost))]))
    return PartitionResult(tuple(points), labels, tuple(medoids))


def identity_partition(solutions: Sequence[SolutionPoint]) -> PartitionResult:
    points = distinct_solutions(solutions)
    idx = tuple(range(len(points)))
    return PartitionResult(tuple(points), idx, idx)


def read_partition_csv(text: str) -> list[int]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [int(r["cluster_id"]) for r in sorted(rows, key=lambda r: int(r["solution_index"]))]
