import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrm.segmentation import (
    IdMismatch,
    SampleTooLarge,
    TooFewSamples,
    UnclusteredId,
    cluster,
    cohens_kappa,
    detect_weak_clusters,
    stratified_sample,
)


def blob_embeddings(rng, centers, per_blob):
    """Tight separated blobs; returns (embeddings, blob assignment by id)."""
    embeddings, truth = {}, {}
    for b, center in enumerate(centers):
        for i in range(per_blob):
            sid = f"b{b}_{i}"
            embeddings[sid] = np.asarray(center) + rng.normal(0, 0.01, size=len(center))
            truth[sid] = b
    return embeddings, truth


# --- cluster -------------------------------------------------------------------

def test_two_separated_blobs_recovered():
    rng = np.random.default_rng(0)
    embeddings, truth = blob_embeddings(rng, [(0.0, 0.0), (10.0, 10.0)], per_blob=20)
    result = cluster(embeddings, k=2, seed=1)
    by_blob = {0: set(), 1: set()}
    for sid, c in result.assignments.items():
        by_blob[truth[sid]].add(c)
    assert all(len(cs) == 1 for cs in by_blob.values())
    assert by_blob[0] != by_blob[1]


def test_n_equals_k_zero_inertia():
    embeddings = {f"s{i}": np.array([float(i), 0.0]) for i in range(4)}
    result = cluster(embeddings, k=4, seed=0)
    assert result.inertia == pytest.approx(0.0, abs=1e-12)
    assert sorted(result.assignments.values()) == [0, 1, 2, 3]


def test_cluster_determinism():
    rng = np.random.default_rng(7)
    embeddings, _ = blob_embeddings(rng, [(0, 0), (5, 5), (9, 0)], per_blob=10)
    a = cluster(embeddings, k=3, seed=42)
    b = cluster(embeddings, k=3, seed=42)
    assert a.assignments == b.assignments
    assert a.inertia == b.inertia


def test_inertia_matches_definition():
    rng = np.random.default_rng(3)
    embeddings, _ = blob_embeddings(rng, [(0, 0), (4, 4)], per_blob=8)
    result = cluster(embeddings, k=2, seed=5)
    manual = sum(
        float(np.sum((embeddings[sid] - result.centroids[c]) ** 2))
        for sid, c in result.assignments.items()
    )
    assert result.inertia == pytest.approx(manual, rel=1e-12)


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        cluster({"a": np.array([0.0])}, k=2, seed=0)


# --- stratified sampling ----------------------------------------------------------

def _clustering_with_sizes(sizes):
    embeddings = {}
    for c, size in enumerate(sizes):
        for i in range(size):
            embeddings[f"c{c}_{i:03d}"] = np.array([float(c) * 100.0, float(i) * 0.001])
    return cluster(embeddings, k=len(sizes), seed=0)


def test_largest_remainder_60_40():
    clustering = _clustering_with_sizes([60, 40])
    picked = stratified_sample(clustering, n=10, seed=1)
    by_cluster = {}
    for sid in picked:
        by_cluster.setdefault(clustering.assignments[sid], 0)
        by_cluster[clustering.assignments[sid]] += 1
    # largest-remainder arithmetic: quotas 6.0 and 4.0 exactly
    assert sorted(by_cluster.values(), reverse=True) == [6, 4]
    assert len(set(picked)) == 10


def test_full_population_sample():
    clustering = _clustering_with_sizes([5, 3])
    picked = stratified_sample(clustering, n=8, seed=2)
    assert sorted(picked) == sorted(clustering.assignments)


def test_single_cluster_plain_uniform():
    clustering = _clustering_with_sizes([12])
    picked = stratified_sample(clustering, n=5, seed=3)
    assert len(picked) == len(set(picked)) == 5


def test_sample_too_large():
    clustering = _clustering_with_sizes([4])
    with pytest.raises(SampleTooLarge):
        stratified_sample(clustering, n=5, seed=0)


def test_min_one_slot_per_cluster_when_n_covers_k():
    clustering = _clustering_with_sizes([97, 2, 1])
    picked = stratified_sample(clustering, n=3, seed=4)
    covered = {clustering.assignments[sid] for sid in picked}
    assert covered == {0, 1, 2}


@given(
    sizes=st.lists(st.integers(1, 30), min_size=1, max_size=4),
    seed=st.integers(0, 2**32 - 1),
    data=st.data(),
)
@settings(max_examples=40, deadline=None)
def test_allocations_sum_and_no_duplicates(sizes, seed, data):
    clustering = _clustering_with_sizes(sizes)
    n = data.draw(st.integers(1, sum(sizes)))
    picked = stratified_sample(clustering, n, seed)
    assert len(picked) == n
    assert len(set(picked)) == n


# --- kappa ---------------------------------------------------------------------

def test_kappa_perfect_agreement():
    labels = {f"i{k}": ("pos" if k % 2 else "neg") for k in range(6)}
    assert cohens_kappa(labels, dict(labels)) == 1.0


def test_kappa_hand_computed_balanced_case():
    # 8 items, 6 agreements, both raters split 4/4:
    # p_o = 0.75, p_e = 0.5, kappa = (0.75 - 0.5) / 0.5 = 0.5
    a = {f"i{k}": lab for k, lab in enumerate("PPPPNNNN")}
    b = {f"i{k}": lab for k, lab in enumerate("PPPNPNNN")}
    assert cohens_kappa(a, b) == pytest.approx(0.5, abs=1e-12)


def test_kappa_constant_rater_not_positive():
    a = {f"i{k}": lab for k, lab in enumerate("PPNNPPNN")}
    b = {f"i{k}": "P" for k in range(8)}
    assert cohens_kappa(a, b) <= 0.0


def test_kappa_id_mismatch():
    with pytest.raises(IdMismatch):
        cohens_kappa({"a": "x", "b": "y"}, {"a": "x", "c": "y"})


@given(st.permutations(["red", "blue", "green"]))
def test_kappa_invariant_under_relabeling(perm):
    mapping = dict(zip(["red", "blue", "green"], perm))
    a = {f"i{k}": lab for k, lab in enumerate(["red", "blue", "green", "red", "blue", "red"])}
    b = {f"i{k}": lab for k, lab in enumerate(["red", "green", "green", "blue", "blue", "red"])}
    base = cohens_kappa(a, b)
    relabeled = cohens_kappa(
        {k: mapping[v] for k, v in a.items()}, {k: mapping[v] for k, v in b.items()}
    )
    assert relabeled == pytest.approx(base, abs=1e-12)


# --- weak clusters ----------------------------------------------------------------

def _planted_weak_setup(seed=0):
    rng = np.random.default_rng(seed)
    embeddings, truth = blob_embeddings(rng, [(0, 0), (10, 0), (0, 10)], per_blob=25)
    clustering = cluster(embeddings, k=3, seed=seed)
    scores = {}
    for sid, blob in truth.items():
        scores[sid] = 0.3 if blob == 2 else 0.9
    return clustering, scores, truth


def test_uniform_scores_flag_nothing():
    clustering, scores, _ = _planted_weak_setup()
    report = detect_weak_clusters(
        {sid: 0.8 for sid in scores}, clustering, margin=0.1, min_support=5
    )
    assert report.flagged == frozenset()


def test_planted_weak_cluster_flagged():
    clustering, scores, truth = _planted_weak_setup()
    # means 0.9 / 0.9 / 0.3, global 0.7; margin 0.2 flags only the planted blob
    report = detect_weak_clusters(scores, clustering, margin=0.2, min_support=5)
    assert len(report.flagged) == 1
    flagged_cluster = next(iter(report.flagged))
    members = {sid for sid, c in clustering.assignments.items() if c == flagged_cluster}
    assert members == {sid for sid, b in truth.items() if b == 2}
    assert len(report.exemplar_ids[flagged_cluster]) == 5


def test_min_support_suppresses_small_clusters():
    clustering, scores, _ = _planted_weak_setup()
    report = detect_weak_clusters(scores, clustering, margin=0.2, min_support=26)
    assert report.flagged == frozenset()


def test_unclustered_id_rejected():
    clustering, scores, _ = _planted_weak_setup()
    scores["ghost"] = 0.1
    with pytest.raises(UnclusteredId):
        detect_weak_clusters(scores, clustering, margin=0.2, min_support=5)


def test_infinite_margin_flags_nothing_and_zero_margin_flags_all_below():
    clustering, scores, _ = _planted_weak_setup()
    assert (
        detect_weak_clusters(scores, clustering, margin=float("inf"), min_support=1).flagged
        == frozenset()
    )
    report = detect_weak_clusters(scores, clustering, margin=0.0, min_support=1)
    global_score = report.global_score
    expected = {c for c, n, mean, d in report.per_cluster if mean <= global_score}
    assert report.flagged == expected
    assert len(report.flagged) >= 1


def test_choose_k_recovers_blob_count():
    from mrm.segmentation import choose_k

    rng = np.random.default_rng(11)
    embeddings, _ = blob_embeddings(rng, [(0, 0), (10, 0), (0, 10)], per_blob=12)
    assert choose_k(embeddings, seed=2) == 3
