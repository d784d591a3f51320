"""Hard nonparametric clustering with a per-cluster penalty.

Minimizes sum of within-cluster squared distances plus lambda per cluster.
A point spawns a new cluster whenever its squared distance to every existing
centroid exceeds lambda; lambda therefore carries squared-distance units,
matching the objective (the common informal phrasing "farther than lambda
away" understates this by a square root).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_ORACLE_MAX_N = 9


@dataclass(frozen=True)
class DpMeansConfig:
    lam: float
    max_iters: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class DpMeansResult:
    k: int
    centroids: np.ndarray  # (k, d)
    assignment: np.ndarray  # (n,)
    objective: float
    n_iters: int
    converged: bool
    objective_trace: list[float]


def clustering_objective(points: np.ndarray, assignment: np.ndarray, lam: float) -> float:
    """Within-cluster squared distance to member means, plus lambda per cluster."""
    points = np.asarray(points, dtype=float)
    assignment = np.asarray(assignment, dtype=int)
    if len(assignment) != len(points):
        raise ValueError("assignment must cover all points")
    if len(assignment) and assignment.min() < 0:
        raise ValueError("cluster index out of range")
    labels = np.unique(assignment)
    k = len(labels)
    cost = 0.0
    for c in labels:
        members = points[assignment == c]
        mu = members.mean(axis=0)
        cost += float(((members - mu) ** 2).sum())
    return cost + lam * k


def dp_means_cluster(points, config: DpMeansConfig) -> DpMeansResult:
    """Penalized hard clustering by alternating assignment/update sweeps.

    Starts from a single cluster at the global centroid. Points are processed
    in input order; each sweep ends with a mean update and empty-cluster drop.
    Once assignments stabilize, clusters are greedily merged while a merge
    lowers the objective (fragments stranded by the sequential spawn rule
    otherwise persist, since a sweep can never empty two self-centered
    clusters into each other). The objective is non-increasing across sweeps
    and strictly decreasing across merges.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = len(points)
    if n == 0:
        raise ValueError("dp-means needs at least one point")

    centroids = [points.mean(axis=0)]
    assignment = np.zeros(n, dtype=int)
    trace: list[float] = []
    converged = False
    total_iters = 0

    while True:
        prev_assignment = None
        converged = False
        while total_iters < config.max_iters:
            total_iters += 1
            for i in range(n):
                mu = np.stack(centroids)
                d2 = ((points[i] - mu) ** 2).sum(axis=1)
                best = int(d2.argmin())
                if d2[best] > config.lam:
                    centroids.append(points[i].copy())
                    assignment[i] = len(centroids) - 1
                else:
                    assignment[i] = best

            # recompute means; drop clusters that lost all members
            kept = []
            remap = -np.ones(len(centroids), dtype=int)
            for c in range(len(centroids)):
                members = points[assignment == c]
                if len(members):
                    remap[c] = len(kept)
                    kept.append(members.mean(axis=0))
            centroids = kept
            assignment = remap[assignment]

            trace.append(clustering_objective(points, assignment, config.lam))
            if prev_assignment is not None and (assignment == prev_assignment).all():
                converged = True
                break
            prev_assignment = assignment.copy()

        merged = _best_merge(points, assignment, centroids, config.lam)
        if merged is None or total_iters >= config.max_iters:
            break
        assignment, centroids = merged
        trace.append(clustering_objective(points, assignment, config.lam))

    return DpMeansResult(
        k=len(centroids),
        centroids=np.stack(centroids),
        assignment=assignment,
        objective=trace[-1],
        n_iters=total_iters,
        converged=converged,
        objective_trace=trace,
    )


def _best_merge(points, assignment, centroids, lam):
    """Most objective-reducing pairwise cluster merge, or None.

    Merging a and b changes the objective by n_a*n_b/(n_a+n_b) *
    ||mu_a - mu_b||^2 - lam.
    """
    k = len(centroids)
    if k < 2:
        return None
    counts = np.bincount(assignment, minlength=k).astype(float)
    mu = np.stack(centroids)
    best_delta = -1e-12
    best_pair = None
    for a in range(k):
        for b in range(a + 1, k):
            gap = float(((mu[a] - mu[b]) ** 2).sum())
            delta = counts[a] * counts[b] / (counts[a] + counts[b]) * gap - lam
            if delta < best_delta:
                best_delta = delta
                best_pair = (a, b)
    if best_pair is None:
        return None
    a, b = best_pair
    new_assignment = assignment.copy()
    new_assignment[new_assignment == b] = a
    new_assignment[new_assignment > b] -= 1
    new_centroids = []
    for c in range(k - 1):
        new_centroids.append(points[new_assignment == c].mean(axis=0))
    return new_assignment, new_centroids


def set_partitions(n: int):
    """Yield all partitions of range(n) as tuples of index-tuples.

    Iterates restricted-growth strings: position j may take any label up to
    one past the maximum label used before it.
    """
    if n == 0:
        yield ()
        return
    a = [0] * n
    while True:
        blocks: dict[int, list[int]] = {}
        for i, c in enumerate(a):
            blocks.setdefault(c, []).append(i)
        yield tuple(tuple(blocks[c]) for c in sorted(blocks))
        j = n - 1
        while j > 0 and a[j] > max(a[:j]):
            j -= 1
        if j == 0:
            return
        a[j] += 1
        for k in range(j + 1, n):
            a[k] = 0


def brute_force_oracle(points, lam: float):
    """Exact minimum of the penalized objective by partition enumeration.

    Only feasible for n <= 9 (Bell numbers). Returns (objective, partition)
    where the partition is a tuple of index tuples.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = len(points)
    if n == 0:
        raise ValueError("oracle needs at least one point")
    if n > _ORACLE_MAX_N:
        raise ValueError(f"oracle limited to n <= {_ORACLE_MAX_N}, got {n}")
    best_cost = np.inf
    best_partition = None
    for partition in set_partitions(n):
        cost = lam * len(partition)
        for block in partition:
            members = points[list(block)]
            mu = members.mean(axis=0)
            cost += float(((members - mu) ** 2).sum())
        if cost < best_cost:
            best_cost = cost
            best_partition = partition
    return best_cost, best_partition
