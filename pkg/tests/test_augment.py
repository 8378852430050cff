import math

import numpy as np
import pytest

from gca.augment import (
    build_plan,
    edge_drop_probs,
    feature_mask_probs,
    feature_weights,
    sample_view,
)
from gca.centrality import EdgeWeights, NodeCentrality, degree_centrality, edge_centrality
from gca.graph import from_edges
from gca.oracle import gnp_graph

E = math.e


def _feats(n, f=2):
    return np.zeros((n, f), dtype=np.float32)


def _pair_weights(graph, per_pair):
    """Expand per-undirected-pair weights to CSR arc order."""
    src, dst = graph.arcs()
    lookup = {}
    u, v = graph.undirected_pairs()
    for k, (a, b) in enumerate(zip(u.tolist(), v.tolist())):
        lookup[(a, b)] = per_pair[k]
        lookup[(b, a)] = per_pair[k]
    return EdgeWeights(values=np.array([lookup[(int(a), int(b))] for a, b in zip(src, dst)]))


class TestEdgeDropProbs:
    def test_hand_worked_normalization(self):
        g = from_edges(4, [(0, 1), (1, 2), (2, 3)], _feats(4))
        w = _pair_weights(g, [1.0, E, E**2])
        probs = edge_drop_probs(g, w, 0.3, 0.7)
        expected = _pair_weights(g, [0.6, 0.3, 0.0]).values
        assert np.allclose(probs, expected, atol=1e-12)

    def test_equal_weights_fall_back_to_uniform(self):
        g = from_edges(3, [(0, 1), (1, 2)], _feats(3))
        w = EdgeWeights(values=np.full(g.num_arcs, 4.2))
        assert np.allclose(edge_drop_probs(g, w, 0.3, 0.7), 0.3)
        assert np.allclose(edge_drop_probs(g, w, 0.9, 0.7), 0.7)

    def test_max_weight_edge_never_dropped(self):
        g = from_edges(4, [(0, 1), (1, 2), (2, 3)], _feats(4))
        w = _pair_weights(g, [5.0, 2.0, 1.0])
        probs = edge_drop_probs(g, w, 0.4, 0.8)
        u, v = g.undirected_pairs()
        src, dst = g.arcs()
        top = [k for k, (a, b) in enumerate(zip(src, dst)) if {int(a), int(b)} == {0, 1}]
        assert all(probs[k] == 0.0 for k in top)

    def test_zero_weight_clamped_to_smallest_positive(self):
        g = from_edges(4, [(0, 1), (1, 2), (2, 3)], _feats(4))
        w = _pair_weights(g, [0.0, 1.0, E])
        probs = edge_drop_probs(g, w, 0.3, 0.7)
        clamped = _pair_weights(g, [1.0, 1.0, E]).values
        ref = edge_drop_probs(g, EdgeWeights(values=clamped), 0.3, 0.7)
        assert np.allclose(probs, ref)

    def test_all_zero_weights_uniform(self):
        g = from_edges(3, [(0, 1), (1, 2)], _feats(3))
        w = EdgeWeights(values=np.zeros(g.num_arcs))
        assert np.allclose(edge_drop_probs(g, w, 0.25, 0.7), 0.25)

    def test_cap_applies(self):
        g = from_edges(4, [(0, 1), (1, 2), (2, 3)], _feats(4))
        w = _pair_weights(g, [1.0, 100.0, 10000.0])
        probs = edge_drop_probs(g, w, 0.9, 0.5)
        assert probs.max() <= 0.5 + 1e-15

    def test_monotone_in_weight(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            g = gnp_graph(10, 0.4, rng)
            if g.num_arcs == 0:
                continue
            nc = degree_centrality(g)
            w = edge_centrality(g, nc)
            probs = edge_drop_probs(g, w, 0.5, 0.9)
            order = np.argsort(w.values)
            assert np.all(np.diff(probs[order]) <= 1e-12)

    def test_directed_arcs_independent(self):
        g = from_edges(3, [(0, 1), (1, 2)], _feats(3), directed=True)
        w = EdgeWeights(values=np.array([1.0, E**2]))
        probs = edge_drop_probs(g, w, 0.3, 0.7)
        # s = (0, 2), mean 1: (2-0)/(2-1)*0.3 = 0.6 and 0
        assert np.allclose(probs, [0.6, 0.0])

    def test_invalid_budget_rejected(self):
        g = from_edges(2, [(0, 1)], _feats(2))
        w = EdgeWeights(values=np.ones(2))
        with pytest.raises(ValueError):
            edge_drop_probs(g, w, 1.0, 0.7)
        with pytest.raises(ValueError):
            edge_drop_probs(g, w, 0.5, 0.0)


class TestFeatureWeights:
    def test_binary_occurrence_counts(self):
        x = np.array([[1, 0], [1, 1]], dtype=np.float32)
        g = from_edges(2, [(0, 1)], x)
        assert g.binary_features
        nc = NodeCentrality("degree", np.array([1.0, 2.0]))
        assert np.allclose(feature_weights(g, nc), [3.0, 2.0])

    def test_dense_uses_magnitude(self):
        x = np.array([[-1.0, 0.5]], dtype=np.float32)
        g = from_edges(1, [], x)
        assert not g.binary_features
        nc = NodeCentrality("degree", np.array([2.0]))
        assert np.allclose(feature_weights(g, nc), [2.0, 1.0])

    def test_all_zero_column(self):
        x = np.array([[1, 0], [1, 0]], dtype=np.float32)
        g = from_edges(2, [(0, 1)], x)
        nc = NodeCentrality("degree", np.array([1.0, 1.0]))
        assert feature_weights(g, nc)[1] == 0.0


class TestFeatureMaskProbs:
    def test_same_normalization_as_edges(self):
        probs = feature_mask_probs(np.array([1.0, E, E**2]), 0.3, 0.7)
        assert np.allclose(probs, [0.6, 0.3, 0.0], atol=1e-12)

    def test_zero_budget(self):
        assert np.allclose(feature_mask_probs(np.array([1.0, 2.0]), 0.0, 0.7), 0.0)

    def test_equal_weights_uniform(self):
        assert np.allclose(feature_mask_probs(np.full(4, 3.0), 0.2, 0.7), 0.2)


class TestBuildPlan:
    def test_uniform_ablation(self, karate):
        plan = build_plan(karate, "degree", 0.3, 0.2, 0.7,
                          adaptive_topology=False, adaptive_attribute=False)
        assert np.allclose(plan.edge_drop_probs, 0.3)
        assert np.allclose(plan.feature_mask_probs, 0.2)

    def test_adaptive_plan_invariants(self, karate):
        plan = build_plan(karate, "degree", 0.4, 0.3, 0.7)
        assert plan.edge_drop_probs.shape == (karate.num_arcs,)
        assert plan.feature_mask_probs.shape == (karate.num_features,)
        assert np.all(plan.edge_drop_probs >= 0) and np.all(plan.edge_drop_probs <= 0.7)
        assert np.all(plan.feature_mask_probs >= 0) and np.all(plan.feature_mask_probs <= 0.7)
        # the most central edge survives deterministically
        assert plan.edge_drop_probs.min() == 0.0

    def test_paired_arcs_carry_equal_probability(self, karate):
        plan = build_plan(karate, "eigenvector", 0.4, 0.1, 0.7)
        src, dst = karate.arcs()
        lookup = dict(zip(zip(src.tolist(), dst.tolist()), plan.edge_drop_probs))
        for (u, v), p in lookup.items():
            assert lookup[(v, u)] == p

    def test_zero_budgets_identity_plan(self, karate):
        plan = build_plan(karate, "degree", 0.0, 0.0, 0.7)
        assert np.all(plan.edge_drop_probs == 0.0)
        assert np.all(plan.feature_mask_probs == 0.0)

    def test_mixed_flags(self, karate):
        plan = build_plan(karate, "degree", 0.4, 0.3, 0.7,
                          adaptive_topology=False, adaptive_attribute=True)
        assert np.allclose(plan.edge_drop_probs, 0.4)
        assert plan.feature_mask_probs.min() == 0.0

    def test_reused_centrality_matches_fresh(self, karate):
        nc = degree_centrality(karate)
        a = build_plan(karate, "degree", 0.4, 0.3, 0.7)
        b = build_plan(karate, "degree", 0.4, 0.3, 0.7, nc=nc)
        assert np.array_equal(a.edge_drop_probs, b.edge_drop_probs)
        assert np.array_equal(a.feature_mask_probs, b.feature_mask_probs)


class TestSampleView:
    def test_identity_plan_reproduces_input(self, karate):
        plan = build_plan(karate, "degree", 0.0, 0.0, 0.7)
        view = sample_view(karate, plan, np.random.default_rng(0))
        assert np.array_equal(view.row_offsets, karate.row_offsets)
        assert np.array_equal(view.col_indices, karate.col_indices)
        assert np.array_equal(view.features, karate.features)

    def test_view_is_structurally_valid(self, karate):
        plan = build_plan(karate, "degree", 0.5, 0.4, 0.9)
        view = sample_view(karate, plan, np.random.default_rng(1))
        view.validate()
        assert not view.directed

    def test_edges_are_subset(self, karate):
        plan = build_plan(karate, "degree", 0.5, 0.1, 0.9)
        src0, dst0 = karate.arcs()
        original = set(zip(src0.tolist(), dst0.tolist()))
        view = sample_view(karate, plan, np.random.default_rng(2))
        src, dst = view.arcs()
        assert set(zip(src.tolist(), dst.tolist())) <= original

    def test_masked_dimension_is_zero_everywhere(self):
        x = np.ones((5, 3), dtype=np.float32)
        g = from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)], x)
        plan = build_plan(g, "degree", 0.0, 0.0, 0.99,
                          adaptive_topology=False, adaptive_attribute=False)
        probs = plan.feature_mask_probs.copy()
        probs[1] = 0.99
        plan = type(plan)(
            edge_drop_probs=plan.edge_drop_probs,
            feature_mask_probs=probs,
            p_e=plan.p_e, p_f=plan.p_f, p_tau=plan.p_tau,
            adaptive_topology=False, adaptive_attribute=False,
        )
        rng = np.random.default_rng(3)
        saw_masked = False
        for _ in range(50):
            view = sample_view(g, plan, rng)
            col = view.features[:, 1]
            assert np.all(col == 0.0) or np.all(col == 1.0)
            saw_masked = saw_masked or np.all(col == 0.0)
        assert saw_masked

    def test_mask_frequency_within_3_sigma(self):
        x = np.ones((4, 2), dtype=np.float32)
        g = from_edges(4, [(0, 1), (2, 3)], x)
        plan = build_plan(g, "degree", 0.0, 0.7, 0.7,
                          adaptive_topology=False, adaptive_attribute=False)
        rng = np.random.default_rng(4)
        trials = 10_000
        masked = sum(
            1 for _ in range(trials)
            if np.all(sample_view(g, plan, rng).features[:, 0] == 0.0)
        )
        sigma = math.sqrt(trials * 0.7 * 0.3)
        assert abs(masked - trials * 0.7) < 3 * sigma

    def test_edge_drop_frequency_within_3_sigma(self, karate):
        plan = build_plan(karate, "degree", 0.4, 0.0, 0.8)
        rng = np.random.default_rng(5)
        trials = 5000
        kept_arcs = np.zeros(trials)
        for t in range(trials):
            kept_arcs[t] = sample_view(karate, plan, rng).num_arcs
        expected_kept = karate.num_arcs - plan.edge_drop_probs.sum()
        # each undirected pair drops two arcs at once
        src, dst = karate.arcs()
        first_arc = src < dst
        pair_prob = plan.edge_drop_probs[first_arc]
        sigma = math.sqrt(np.sum(4 * pair_prob * (1 - pair_prob)) / trials)
        assert abs(kept_arcs.mean() - expected_kept) < 3 * max(sigma, 1e-9)

    def test_atomic_pair_removal(self, karate):
        plan = build_plan(karate, "degree", 0.6, 0.0, 0.9)
        for seed in range(5):
            view = sample_view(karate, plan, np.random.default_rng(seed))
            view.validate()  # symmetry check would fail on one-sided drops

    def test_deterministic_given_generator_state(self, karate):
        plan = build_plan(karate, "degree", 0.5, 0.5, 0.9)
        a = sample_view(karate, plan, np.random.default_rng(42))
        b = sample_view(karate, plan, np.random.default_rng(42))
        assert np.array_equal(a.col_indices, b.col_indices)
        assert np.array_equal(a.features, b.features)

    def test_directed_graph_sampling(self):
        g = from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)], _feats(4), directed=True)
        plan = build_plan(g, "degree", 0.5, 0.0, 0.9,
                          adaptive_topology=False, adaptive_attribute=False)
        view = sample_view(g, plan, np.random.default_rng(6))
        view.validate()
        assert view.directed

    def test_plan_dimension_mismatch_rejected(self, karate):
        g_small = from_edges(2, [(0, 1)], _feats(2))
        plan = build_plan(g_small, "degree", 0.3, 0.3, 0.7)
        with pytest.raises(ValueError):
            sample_view(karate, plan, np.random.default_rng(0))

    def test_labels_preserved(self, karate):
        plan = build_plan(karate, "degree", 0.5, 0.5, 0.9)
        view = sample_view(karate, plan, np.random.default_rng(7))
        assert np.array_equal(view.labels, karate.labels)
        assert view.num_classes == karate.num_classes
