"""Brute-force reference computations, deliberately naive.

None of these import the code paths they check beyond the plain data
classes.
"""

import itertools
import math


def trajectory_best(fitnesses, sense):
    best = fitnesses[0]
    for f in fitnesses[1:]:
        if (sense == "minimize" and f < best) or (sense == "maximize" and f > best):
            best = f
    return best


def features_oracle(dataset, location_of=None, tol=None):
    """Dict name -> (count, connectivity, avg) by linear scans and pairwise
    set intersection. ``location_of`` maps a solution to its location (raw
    solution when omitted)."""
    location_of = location_of or (lambda s: s)
    all_fit = [s.fitness for a in dataset.algorithms for t in a.trajectories for s in t.steps]
    if tol is None:
        tol = 0.0 if all(float(f).is_integer() for f in all_fit) else 1e-9
    bests = {
        a.name: [trajectory_best([s.fitness for s in t.steps], dataset.sense) for t in a.trajectories]
        for a in dataset.algorithms
    }
    global_best = trajectory_best([b for bs in bests.values() for b in bs], dataset.sense)
    out = {}
    for a in dataset.algorithms:
        count = 0
        for b in bests[a.name]:
            if abs(b - global_best) <= tol:
                count += 1
        sets = [set(location_of(s.solution) for s in t.steps) for t in a.trajectories]
        m = len(sets)
        if m < 2:
            conn = 0.0
        else:
            pairs = 0
            for i in range(m):
                for j in range(i + 1, m):
                    if sets[i] & sets[j]:
                        pairs += 1
            conn = pairs / (m * (m - 1) / 2)
        total = 0.0
        for b in bests[a.name]:
            total += b
        out[a.name] = (count, conn, total / m)
    return out


def complete_linkage_dist(a, b, dist):
    return max(dist(x, y) for x in a for y in b)


def euclid(p, q):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(p, q)))


def naive_complete_linkage(points, k, dist=euclid):
    """Unconstrained complete-linkage clusters (as sorted index tuples) at k clusters."""
    clusters = [[i] for i in range(len(points))]
    while len(clusters) > k:
        best = None
        for (i, a), (j, b) in itertools.combinations(enumerate(clusters), 2):
            d = complete_linkage_dist([points[x] for x in a], [points[x] for x in b], dist)
            if best is None or d < best[0]:
                best = (d, i, j)
        _, i, j = best
        clusters[i] = clusters[i] + clusters[j]
        del clusters[j]
    return sorted(tuple(sorted(c)) for c in clusters)


def bbox_volume_fraction(members, all_points):
    dims = len(all_points[0])
    num = den = 1.0
    for d in range(dims):
        lo, hi = min(p[d] for p in all_points), max(p[d] for p in all_points)
        if hi == lo:
            continue
        den *= hi - lo
        num *= max(p[d] for p in members) - min(p[d] for p in members)
    return num / den
