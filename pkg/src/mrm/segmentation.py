"""Embedding-space segmentation: clustering, stratified sampling,
annotation agreement, and weak-region detection.

The same k-means clustering backs three uses: drawing representative
evaluation samples from an unlabeled corpus, binning queries for drift
tracking, and localizing score weaknesses to semantic regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, MrmError

KMEANS_MAX_ITER = 100
DEFAULT_WEAK_MARGIN = 0.15
DEFAULT_MIN_SUPPORT = 20
AUTO_K_RANGE = range(2, 11)


class TooFewSamples(MrmError):
    pass


class SampleTooLarge(MrmError):
    pass


class IdMismatch(MrmError):
    pass


class UnclusteredId(MrmError):
    pass


@dataclass(frozen=True)
class Clustering:
    k: int
    assignments: dict[str, int]  # sample id -> cluster index in [0, k)
    centroids: np.ndarray        # (k, dim)
    inertia: float
    seed: int

    def members(self, cluster: int) -> list[str]:
        return [sid for sid, c in self.assignments.items() if c == cluster]

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for c in self.assignments.values():
            counts[c] += 1
        return counts


@dataclass(frozen=True)
class WeakRegionReport:
    global_score: float
    per_cluster: tuple[tuple[int, int, float, float], ...]  # (cluster, n, mean, delta)
    flagged: frozenset[int]
    exemplar_ids: dict[int, tuple[str, ...]]  # flagged cluster -> lowest-scored ids
    margin: float
    min_support: int


def _as_matrix(embeddings: dict[str, np.ndarray]) -> tuple[list[str], np.ndarray]:
    ids = sorted(embeddings)
    dims = {np.asarray(embeddings[i]).shape for i in ids}
    if len(dims) > 1:
        raise DimensionMismatch(f"embeddings have mixed dims: {dims}")
    return ids, np.asarray([np.asarray(embeddings[i], dtype=np.float64) for i in ids])


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: first centroid uniform, rest D^2-weighted."""
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total == 0:
            centroids[j] = X[rng.integers(n)]
            continue
        probs = d2 / total
        centroids[j] = X[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((X - centroids[j]) ** 2, axis=1))
    return centroids


def cluster(embeddings: dict[str, np.ndarray], k: int, seed: int) -> Clustering:
    """Seeded k-means over id-keyed vectors.

    Runs to an assignment fixpoint or KMEANS_MAX_ITER. Empty clusters are
    reseeded from the point farthest from its centroid, so every cluster
    index stays populated. Deterministic for fixed inputs and seed.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ids, X = _as_matrix(embeddings)
    n = len(ids)
    if n < k:
        raise TooFewSamples(f"{n} samples for k={k}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(X, k, rng)
    assign = np.full(n, -1)
    for _ in range(KMEANS_MAX_ITER):
        dists = np.linalg.norm(X[:, None, :] - centroids[None, :, :], axis=2)
        new_assign = np.argmin(dists, axis=1)
        for j in range(k):
            if not np.any(new_assign == j):
                # farthest point from its current centroid becomes the new seed
                worst = int(np.argmax(dists[np.arange(n), new_assign]))
                centroids[j] = X[worst]
                new_assign[worst] = j
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            centroids[j] = X[assign == j].mean(axis=0)
    dists = np.linalg.norm(X - centroids[assign], axis=1)
    inertia = float(np.sum(dists**2))
    return Clustering(
        k=k,
        assignments={sid: int(c) for sid, c in zip(ids, assign)},
        centroids=centroids,
        inertia=inertia,
        seed=seed,
    )


def silhouette_score(X: np.ndarray, assign: np.ndarray) -> float:
    """Mean silhouette over all points; O(n^2), fine at review-corpus scale."""
    n = X.shape[0]
    labels = np.unique(assign)
    if len(labels) < 2:
        return -1.0
    dmat = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
    scores = np.zeros(n)
    for i in range(n):
        own = assign == assign[i]
        own_count = own.sum() - 1
        if own_count == 0:
            scores[i] = 0.0
            continue
        a = dmat[i][own].sum() / own_count
        b = min(dmat[i][assign == lab].mean() for lab in labels if lab != assign[i])
        scores[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(scores.mean())


def choose_k(embeddings: dict[str, np.ndarray], seed: int) -> int:
    """Max-silhouette k over AUTO_K_RANGE (capped below the sample count)."""
    ids, X = _as_matrix(embeddings)
    best_k, best_s = 2, -np.inf
    for k in AUTO_K_RANGE:
        if k >= len(ids):
            break
        cl = cluster(embeddings, k, seed)
        assign = np.asarray([cl.assignments[i] for i in sorted(embeddings)])
        s = silhouette_score(X, assign)
        if s > best_s:
            best_k, best_s = k, s
    return best_k


def stratified_sample(clustering: Clustering, n: int, seed: int) -> list[str]:
    """Draw n ids with per-cluster allocation proportional to cluster size.

    Largest-remainder rounding; when n covers every cluster, each nonempty
    cluster gets at least one slot. Within-cluster draws are uniform
    without replacement, seeded.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    population = len(clustering.assignments)
    if n > population:
        raise SampleTooLarge(f"n={n} exceeds population {population}")
    sizes = clustering.sizes()
    quotas = [n * s / population for s in sizes]
    alloc = [math.floor(q) for q in quotas]
    remainders = sorted(
        range(clustering.k), key=lambda j: (-(quotas[j] - alloc[j]), j)
    )
    for j in remainders[: n - sum(alloc)]:
        alloc[j] += 1
    nonempty = [j for j in range(clustering.k) if sizes[j] > 0]
    if n >= len(nonempty):
        # repair zero allocations by taking from the largest allocation
        for j in nonempty:
            while alloc[j] == 0:
                donor = max(
                    (d for d in nonempty if alloc[d] > 1),
                    key=lambda d: (alloc[d], -d),
                )
                alloc[donor] -= 1
                alloc[j] += 1
    rng = np.random.default_rng(seed)
    chosen: list[str] = []
    for j in range(clustering.k):
        if alloc[j] == 0:
            continue
        members = sorted(clustering.members(j))
        picks = rng.choice(len(members), size=alloc[j], replace=False)
        chosen.extend(members[int(p)] for p in sorted(picks))
    return chosen


def cohens_kappa(labels_a: dict[str, str], labels_b: dict[str, str]) -> float:
    """Chance-corrected agreement between two annotators over the same ids."""
    if set(labels_a) != set(labels_b):
        raise IdMismatch("annotator id sets differ")
    ids = sorted(labels_a)
    n = len(ids)
    if n < 2:
        raise ValueError("kappa needs at least 2 items")
    p_o = sum(labels_a[i] == labels_b[i] for i in ids) / n
    cats = sorted({*labels_a.values(), *labels_b.values()})
    p_e = sum(
        (sum(labels_a[i] == c for i in ids) / n) * (sum(labels_b[i] == c for i in ids) / n)
        for c in cats
    )
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def detect_weak_clusters(
    scores: dict[str, float],
    clustering: Clustering,
    margin: float = DEFAULT_WEAK_MARGIN,
    min_support: int = DEFAULT_MIN_SUPPORT,
    max_exemplars: int = 5,
) -> WeakRegionReport:
    """Flag clusters whose mean score trails the global mean by `margin`,
    with at least `min_support` scored members. Scores must share an
    orientation (higher is better)."""
    unclustered = set(scores) - set(clustering.assignments)
    if unclustered:
        raise UnclusteredId(f"scored ids missing from clustering: {sorted(unclustered)[:5]}")
    if not scores:
        raise ValueError("scores must be non-empty")
    global_score = sum(scores.values()) / len(scores)
    per_cluster: list[tuple[int, int, float, float]] = []
    flagged: set[int] = set()
    exemplars: dict[int, tuple[str, ...]] = {}
    for j in range(clustering.k):
        member_scores = {
            sid: scores[sid] for sid in clustering.members(j) if sid in scores
        }
        if not member_scores:
            continue
        mean = sum(member_scores.values()) / len(member_scores)
        per_cluster.append((j, len(member_scores), mean, mean - global_score))
        if len(member_scores) >= min_support and mean <= global_score - margin:
            flagged.add(j)
            worst = sorted(member_scores, key=lambda sid: (member_scores[sid], sid))
            exemplars[j] = tuple(worst[:max_exemplars])
    return WeakRegionReport(
        global_score=global_score,
        per_cluster=tuple(per_cluster),
        flagged=frozenset(flagged),
        exemplar_ids=exemplars,
        margin=margin,
        min_support=min_support,
    )
