import numpy as np
import pytest

from zombiescan import (LouvainConfig, Partition, ValidationError, build_graph,
                        community_views, louvain, modularity, move_gain, symmetrize)
from zombiescan.community import read_partition_csv, write_partition_csv
from zombiescan.graph import UndirectedGraph

from conftest import random_graph
from oracles import dense_adjacency, modularity_dense

TWO_TRIANGLES = [(0, 1, 0), (1, 2, 0), (2, 0, 0), (3, 4, 0), (4, 5, 0), (5, 3, 0)]


def und_from_arcs(arcs, n):
    return symmetrize(build_graph(arcs, n))


def clique_arcs(nodes):
    return [(u, v, 0) for u in nodes for v in nodes if u < v]


class TestModularity:
    def test_singleton_distinct_pairs_is_exactly_zero(self):
        for seed in range(5):
            g, _ = random_graph(seed, 14, 0.2)
            und = symmetrize(g)
            q = modularity(und, Partition.singletons(14), "distinct-pairs")
            assert q == 0.0

    def test_two_triangles_standard_half(self):
        und = und_from_arcs(TWO_TRIANGLES, 6)
        p = Partition([0, 0, 0, 1, 1, 1])
        assert modularity(und, p, "standard") == pytest.approx(0.5, abs=1e-12)
        # confirmed by the dense double loop with the diagonal included
        oracle = modularity_dense(dense_adjacency(und), p.assignment, True)
        assert oracle == pytest.approx(0.5, abs=1e-12)

    def test_two_triangles_distinct_pairs_two_thirds(self):
        und = und_from_arcs(TWO_TRIANGLES, 6)
        p = Partition([0, 0, 0, 1, 1, 1])
        assert modularity(und, p, "distinct-pairs") == pytest.approx(2 / 3, abs=1e-12)
        oracle = modularity_dense(dense_adjacency(und), p.assignment, False)
        assert oracle == pytest.approx(2 / 3, abs=1e-12)

    @pytest.mark.parametrize("variant,diag", [("standard", True), ("distinct-pairs", False)])
    def test_matches_dense_oracle_on_random_partitions(self, variant, diag):
        rng = np.random.Generator(np.random.PCG64(17))
        for seed in range(10):
            n = int(rng.integers(5, 25))
            g, _ = random_graph(seed + 100, n, 0.25)
            und = symmetrize(g)
            if und.total_weight == 0:
                continue
            p = Partition(rng.integers(0, 4, size=n))
            expected = modularity_dense(dense_adjacency(und), p.assignment, diag)
            assert modularity(und, p, variant) == pytest.approx(expected, abs=1e-12)

    def test_standard_range_bounds(self):
        und = und_from_arcs(TWO_TRIANGLES, 6)
        for labels in ([0] * 6, [0, 1, 2, 3, 4, 5], [0, 0, 1, 1, 2, 2]):
            q = modularity(und, Partition(labels), "standard")
            assert -0.5 - 1e-12 <= q <= 1.0 + 1e-12

    def test_size_mismatch_rejected(self):
        und = und_from_arcs(TWO_TRIANGLES, 6)
        with pytest.raises(ValidationError):
            modularity(und, Partition([0, 0]), "standard")

    def test_edgeless_graph_rejected(self):
        und = symmetrize(build_graph([], 3))
        with pytest.raises(ValidationError):
            modularity(und, Partition.singletons(3), "standard")


class TestMoveGain:
    def test_disconnected_community_has_negative_gain(self):
        und = und_from_arcs(TWO_TRIANGLES, 6)
        labels = np.array([0, 0, 0, 1, 1, 1])
        assert move_gain(und, labels, 0, 1) < 0

    def test_joining_a_neighbor_from_isolation_gains(self):
        und = und_from_arcs([(0, 1, 0)], 2)
        assert move_gain(und, np.array([0, 1]), 1, 0) > 0

    def test_matches_recompute_from_scratch(self):
        rng = np.random.Generator(np.random.PCG64(5150))
        for seed in range(8):
            n = int(rng.integers(6, 13))
            g, _ = random_graph(seed + 300, n, 0.3)
            und = symmetrize(g)
            if und.total_weight == 0:
                continue
            labels = np.asarray(rng.integers(0, 3, size=n))
            a = dense_adjacency(und)
            for node in range(n):
                for target in range(3):
                    if target == labels[node]:
                        continue
                    before = modularity_dense(a, labels, True)
                    moved = labels.copy()
                    moved[node] = target
                    after = modularity_dense(a, moved, True)
                    assert move_gain(und, labels, node, target) == \
                        pytest.approx(after - before, abs=1e-12)


class TestLouvain:
    def test_two_disjoint_ten_cliques(self):
        arcs = clique_arcs(range(10)) + clique_arcs(range(10, 20))
        und = und_from_arcs(arcs, 20)
        dend = louvain(und, LouvainConfig(seed=1))
        p = dend.partition
        assert p.community_count == 2
        assert len(set(p.assignment[:10])) == 1
        assert len(set(p.assignment[10:])) == 1
        assert modularity(und, p, "standard") == pytest.approx(0.5, abs=1e-12)

    def test_complete_graph_is_one_community(self):
        und = und_from_arcs(clique_arcs(range(5)), 5)
        assert louvain(und, LouvainConfig(seed=3)).partition.community_count == 1

    def test_modularity_non_decreasing_across_levels(self):
        g, _ = random_graph(8, 40, 0.08)
        und = symmetrize(g)
        dend = louvain(und, LouvainConfig(seed=2))
        mods = [level.modularity for level in dend.levels]
        assert all(b >= a - 1e-12 for a, b in zip(mods, mods[1:]))

    def test_beats_singleton_partition(self):
        g, _ = random_graph(9, 30, 0.1)
        und = symmetrize(g)
        dend = louvain(und, LouvainConfig(seed=4))
        q = modularity(und, dend.partition, "standard")
        q0 = modularity(und, Partition.singletons(30), "standard")
        assert q >= q0

    def test_dendrogram_composes_to_flattened(self):
        g, _ = random_graph(10, 35, 0.09)
        dend = louvain(symmetrize(g), LouvainConfig(seed=5))
        assert dend.flattened() == dend.partition

    def test_deterministic_for_fixed_seed(self):
        g, _ = random_graph(12, 40, 0.1)
        und = symmetrize(g)
        a = louvain(und, LouvainConfig(seed=7)).partition
        b = louvain(und, LouvainConfig(seed=7)).partition
        assert a == b

    def test_edgeless_graph_stays_singletons(self):
        und = symmetrize(build_graph([], 4))
        dend = louvain(und)
        assert dend.partition == Partition.singletons(4)
        assert dend.levels == []

    def test_planted_partition_recovery(self):
        # committed corpus: 4 blocks x 50, p_in 0.3, p_out 0.01, seed 1234
        from conftest import DATA
        from oracles import adjusted_rand_index
        from zombiescan.ingest import parse_weibo_network
        from zombiescan.synth import read_truth_csv

        g = parse_weibo_network(f"{DATA}/planted_4x50/weibo_network.txt").to_graph()
        truth = read_truth_csv(f"{DATA}/planted_4x50/truth.csv")
        und = symmetrize(g)
        dend = louvain(und, LouvainConfig())
        ari = adjusted_rand_index(dend.partition.assignment, truth.block_ids)
        assert ari >= 0.95
        q = modularity(und, dend.partition, "standard")
        q_planted = modularity(und, Partition(truth.block_ids), "standard")
        assert abs(q - q_planted) <= 0.02

    def test_aggregation_preserves_modularity(self):
        from zombiescan.community import _aggregate

        g, _ = random_graph(6, 25, 0.15)
        und = symmetrize(g)
        rng = np.random.Generator(np.random.PCG64(0))
        p = Partition(rng.integers(0, 4, size=25))
        agg = _aggregate(und, p)
        q_orig = modularity(und, p, "standard")
        q_agg = modularity(agg, Partition.singletons(agg.node_count), "standard")
        assert q_agg == pytest.approx(q_orig, abs=1e-12)
        assert agg.total_weight == pytest.approx(und.total_weight, abs=1e-9)


class TestCommunityViews:
    def test_two_cycle_single_community(self, two_cycle):
        views = community_views(two_cycle, Partition([0, 0]))
        assert len(views) == 1
        assert views[0].arc_count == 2

    def test_singleton_partition_views_have_no_arcs(self, two_cycle):
        views = community_views(two_cycle, Partition.singletons(2))
        assert [v.arc_count for v in views] == [0, 0]

    def test_union_of_views_is_intra_community_arcs(self):
        g, arcs = random_graph(13, 18, 0.2)
        rng = np.random.Generator(np.random.PCG64(2))
        p = Partition(rng.integers(0, 3, size=18))
        got = set()
        for cid, view in enumerate(community_views(g, p)):
            for u, v in view.arcs():
                got.add((view.to_parent(u), view.to_parent(v)))
        expected = {(u, v) for u, v in set(arcs)
                    if p.assignment[u] == p.assignment[v]}
        assert got == expected


class TestPartition:
    def test_dense_relabeling_by_first_appearance(self):
        p = Partition([5, 5, 2, 9, 2])
        assert list(p.assignment) == [0, 0, 1, 2, 1]
        assert p.community_count == 3

    def test_members_cover_all_nodes_once(self):
        rng = np.random.Generator(np.random.PCG64(44))
        p = Partition(rng.integers(0, 6, size=30))
        seen = np.concatenate([p.members(c) for c in range(p.community_count)])
        assert sorted(seen) == list(range(30))

    def test_csv_round_trip(self, tmp_path):
        p = Partition([0, 1, 0, 2, 1])
        path = tmp_path / "partition.csv"
        write_partition_csv(p, path)
        assert read_partition_csv(path, 5) == p

    def test_csv_with_uids(self, tmp_path):
        p = Partition([0, 1])
        path = tmp_path / "partition.csv"
        write_partition_csv(p, path, uids=["u100", "u200"])
        text = path.read_text()
        assert "u100,0" in text and "u200,1" in text

    def test_csv_incomplete_coverage_rejected(self, tmp_path):
        path = tmp_path / "partition.csv"
        path.write_text("node_id,community_id\n0,0\n")
        with pytest.raises(ValidationError, match="cover"):
            read_partition_csv(path, 2)


def test_self_loop_degree_convention():
    # one edge {0,1} plus a self-loop of weight 2 at node 0
    und = UndirectedGraph.from_edges(2, np.array([0, 0]), np.array([1, 0]),
                                     np.array([1.0, 2.0]))
    assert und.degree_weights[0] == 3.0  # self-loop counts once
    assert und.degree_weights[1] == 1.0
    assert und.total_weight == 2.0
    assert und.self_weight(0) == 2.0
