import random

import pytest
from hypothesis import given, strategies as st

from genpatch.miner import (
    ClusterMember,
    KeyedHunk,
    PatchCluster,
    classify_spread,
    cluster,
    dump_clusters,
    load_clusters,
)


def kh(i, key, patch=None):
    return KeyedHunk(ClusterMember(f"h{i}", patch or f"p{i}"), key)


def test_two_equal_keys_one_cluster():
    clusters, stats = cluster([kh(0, "A"), kh(1, "A"), kh(2, "B")])
    assert [c.size for c in clusters] == [2]
    assert (stats.total_hunks, stats.unique_hunks, stats.clusterable_hunks, stats.cluster_count) == (3, 1, 2, 1)


def test_distinct_keys_no_cluster():
    clusters, stats = cluster([kh(i, f"K{i}") for i in range(5)])
    assert clusters == [] and stats.unique_hunks == 5


def test_spread():
    m = lambda i, p: ClusterMember(f"h{i}", p)
    assert classify_spread([m(0, "P"), m(1, "P")]) == (True, False)
    assert classify_spread([m(0, "P"), m(1, "Q")]) == (False, True)
    assert classify_spread([m(0, "P1"), m(1, "P1"), m(2, "P2")]) == (True, True)
    with pytest.raises(ValueError):
        classify_spread([m(0, "P")])


def test_cluster_invariants():
    with pytest.raises(ValueError):
        PatchCluster("c", "k", (ClusterMember("h", "p"),), True, False)
    with pytest.raises(ValueError):
        PatchCluster("c", "k", (ClusterMember("h", "p"), ClusterMember("g", "q")), False, False)


def test_synthetic_corpus_five_templates():
    rng = random.Random(7)
    sizes = [60, 40, 30, 20, 10]
    hunks = [kh(f"t{t}_{j}", f"T{t}", f"p{rng.randrange(50)}") for t, n in enumerate(sizes) for j in range(n)]
    hunks += [kh(f"u{j}", f"U{j}") for j in range(40)]
    rng.shuffle(hunks)
    clusters, stats = cluster(hunks)
    assert len(clusters) == 5 and sum(c.size for c in clusters) == 160
    assert [c.size for c in clusters] == sizes


def test_order_and_serialization():
    clusters, _ = cluster([kh(i, "A") for i in range(2)] + [kh(i + 2, "B") for i in range(3)])
    assert [c.shape_key for c in clusters] == ["B", "A"]
    assert load_clusters(dump_clusters(clusters)) == clusters


@given(st.lists(st.tuples(st.sampled_from("ABCDEFG"), st.sampled_from("pqrs")), max_size=40), st.randoms())
def test_partition_and_permutation_invariance(items, rnd):
    hunks = [kh(i, k, p) for i, (k, p) in enumerate(items)]
    clusters, stats = cluster(hunks)
    members = [m.hunk_id for c in clusters for m in c.members]
    assert len(members) == len(set(members)) == stats.clusterable_hunks
    keys = {h.member.hunk_id: h.key for h in hunks}
    for c in clusters:
        assert all(keys[m.hunk_id] == c.shape_key for m in c.members)
        assert c.is_vertical or c.is_horizontal
    shuffled = list(hunks)
    rnd.shuffle(shuffled)
    assert cluster(shuffled) == (clusters, stats)
