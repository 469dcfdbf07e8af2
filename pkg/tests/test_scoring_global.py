import math

import numpy as np
import pytest

from gee import (
    Graph,
    Partition,
    SearchOptions,
    fit,
    gen_sbm,
    global_score,
    graph_density_vector,
    jsd,
    model_density_vector,
)
from gee.gcl import FitNonConvergenceError
from gee.scoring_global import (
    alpha_grid_search,
    density_vector_length,
    flatten_block_matrix,
    split_divergence,
)

from conftest import random_embedding, spectral_embedding


def jsd_oracle(p, q):
    # independent check: average Kullback-Leibler distance to the midpoint
    m = [(a + b) / 2.0 for a, b in zip(p, q)]
    def kl(a, b):
        return sum(ai * math.log2(ai / bi) for ai, bi in zip(a, b) if ai > 0)
    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


class TestJsd:
    def test_identity_exact_zero(self):
        v = np.array([0.2, 0.3, 0.5])
        assert jsd(v, v) == 0.0

    def test_disjoint_supports(self):
        assert jsd(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)

    def test_half_half_vs_point_mass(self):
        val = jsd(np.array([0.5, 0.5]), np.array([1.0, 0.0]))
        assert val == pytest.approx(0.311278124459133, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            jsd(np.array([1.0]), np.array([0.5, 0.5]))

    def test_against_kl_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = rng.integers(2, 12)
            p = rng.random(n)
            q = rng.random(n)
            p /= p.sum()
            q /= q.sum()
            assert jsd(p, q) == pytest.approx(jsd_oracle(p, q), abs=1e-12)

    def test_zero_entries_ignored(self):
        p = np.array([0.5, 0.5, 0.0])
        q = np.array([0.25, 0.75, 0.0])
        assert jsd(p, q) == pytest.approx(jsd_oracle(p.tolist(), q.tolist()), abs=1e-14)


class TestGraphDensityVector:
    def test_directed_three_cycle_split_partition(self):
        g = Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], directed=True)
        part = Partition(np.array([0, 1, 1]), 2)
        c = graph_density_vector(g, part)
        assert np.allclose(c, [1 / 3, 1 / 3, 0.0, 1 / 3])

    def test_all_internal_edges(self):
        edges = [(i, j, 1.0) for i in range(5) for j in range(5) if i < j]
        edges += [(5, 6, 1.0)]
        g = Graph.from_edges(7, edges, directed=False)
        part = Partition(np.array([0, 0, 0, 0, 0, 1, 1]), 2)
        c = graph_density_vector(g, part)
        # undirected ordering: (c_01, c_0, c_1)
        assert np.allclose(c, [0.0, 10 / 11, 1 / 11])

    def test_weighted_proportions(self):
        g = Graph.from_edges(4, [(0, 1, 9.0), (1, 2, 1.0)], directed=True,
                             weighted=True)
        part = Partition(np.array([0, 0, 1, 1]), 2)
        c = graph_density_vector(g, part)
        assert c.sum() == pytest.approx(1.0)
        # internal mass of block 0 is the weight-9 edge
        assert c[-2] == pytest.approx(0.9)

    def test_sums_to_one(self):
        g, part = gen_sbm(40, 4, 0.4, 0.1, directed=True, seed=1)
        c = graph_density_vector(g, part)
        assert c.shape[0] == density_vector_length(4, True)
        assert abs(c.sum() - 1.0) <= 1e-12

    def test_single_community_rejected(self):
        g = Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)], directed=True)
        with pytest.raises(ValueError, match="communities"):
            graph_density_vector(g, Partition(np.zeros(3, dtype=int), 1))


class TestFlattenOrdering:
    def test_directed_order(self):
        m = np.arange(9, dtype=float).reshape(3, 3)
        v = flatten_block_matrix(m, directed=True)
        # pairs (0,1),(1,0),(0,2),(2,0),(1,2),(2,1) then the diagonal
        assert v.tolist() == [1, 3, 2, 6, 5, 7, 0, 4, 8]

    def test_undirected_order(self):
        m = np.arange(9, dtype=float).reshape(3, 3)
        v = flatten_block_matrix(m, directed=False)
        assert v.tolist() == [1, 2, 5, 0, 4, 8]


class TestModelDensityVector:
    def test_sums_to_one_and_matches_ordering(self):
        g, part = gen_sbm(30, 3, 0.5, 0.1, directed=True, seed=2)
        rng = np.random.default_rng(2)
        e = random_embedding(30, 2, rng)
        model = fit(g, e, alpha=1.0)
        b = model_density_vector(model, g, part)
        assert b.shape[0] == density_vector_length(3, True)
        assert b.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(b >= 0)


class TestSplitDivergence:
    def test_matches_manual_renormalization(self):
        c = np.array([0.2, 0.1, 0.4, 0.3])
        b = np.array([0.15, 0.15, 0.5, 0.2])
        ell = 2
        got = split_divergence(c, b, ell, directed=True)
        ext = jsd(c[:2] / c[:2].sum(), b[:2] / b[:2].sum())
        internal = jsd(c[2:] / c[2:].sum(), b[2:] / b[2:].sum())
        assert got == pytest.approx(0.5 * (ext + internal), abs=1e-14)

    def test_zero_mass_conventions(self):
        c = np.array([0.0, 0.0, 0.6, 0.4])
        b = np.array([0.0, 0.0, 0.5, 0.5])
        assert split_divergence(c, b, 2, True) == pytest.approx(
            0.5 * jsd(np.array([0.6, 0.4]), np.array([0.5, 0.5])), abs=1e-14)
        b2 = np.array([0.5, 0.0, 0.25, 0.25])
        assert split_divergence(c, b2, 2, True) >= 0.5


class TestAlphaGridSearch:
    def test_stopping_rule_five_consecutive(self):
        values = {0.0: 0.5, 0.25: 0.4, 0.5: 0.41, 0.75: 0.42, 1.0: 0.43,
                  1.25: 0.44, 1.5: 0.45, 1.75: 0.2}
        seen = []

        def evaluate(alpha):
            seen.append(alpha)
            return values[alpha]

        best, best_alpha, curve, failures = alpha_grid_search(
            evaluate, SearchOptions())
        assert (best, best_alpha) == (0.4, 0.25)
        assert seen == [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5]
        assert len(curve) == 7 and not failures

    def test_failures_recorded_and_search_continues(self):
        def evaluate(alpha):
            if alpha == 0.25:
                raise FitNonConvergenceError("boom", 0.5, 3)
            return 1.0 / (1.0 + alpha)

        best, best_alpha, curve, failures = alpha_grid_search(
            evaluate, SearchOptions(alpha_max=2.0))
        assert failures == [(0.25, 0.5)]
        assert best_alpha == 2.0  # improving all the way to the cap

    def test_hard_cap(self):
        best, best_alpha, curve, _ = alpha_grid_search(
            lambda a: 1.0 / (1.0 + a), SearchOptions(alpha_step=8.0, alpha_max=32.0))
        assert best_alpha == 32.0
        assert curve[-1][0] == 32.0


class TestGlobalScore:
    def test_perfect_model_scores_zero(self):
        # complete digraph: all pair probabilities fit to 1, so the model
        # block masses equal the observed ones exactly at alpha = 0
        edges = [(i, j, 1.0) for i in range(3) for j in range(3) if i != j]
        g = Graph.from_edges(3, edges, directed=True)
        part = Partition(np.array([0, 1, 1]), 2)
        rng = np.random.default_rng(3)
        e = random_embedding(3, 2, rng)
        res = global_score(g, e, part)
        assert res.score <= 1e-12
        assert res.best_alpha == 0.0

    def test_score_in_unit_interval_and_curve(self):
        g, part = gen_sbm(40, 4, 0.5, 0.05, directed=True, seed=4)
        rng = np.random.default_rng(4)
        e = random_embedding(40, 3, rng)
        res = global_score(g, e, part)
        assert 0.0 <= res.score <= 1.0
        assert all(0.0 <= v <= 1.0 for _, v in res.curve)
        assert res.best_alpha in {a for a, _ in res.curve}

    def test_grid_determinism(self):
        g, part = gen_sbm(30, 3, 0.5, 0.05, directed=True, seed=5)
        rng = np.random.default_rng(5)
        e = random_embedding(30, 2, rng)
        r1 = global_score(g, e, part)
        r2 = global_score(g, e, part)
        assert r1.curve == r2.curve and r1.best_alpha == r2.best_alpha

    def test_affine_invariance_smoke(self):
        g, part = gen_sbm(25, 3, 0.5, 0.05, directed=True, seed=6)
        rng = np.random.default_rng(6)
        e = random_embedding(25, 2, rng)
        theta = 0.7
        rot = np.array([[np.cos(theta), -np.sin(theta)],
                        [np.sin(theta), np.cos(theta)]])
        from gee import Embedding
        e2 = Embedding.from_coords(3.0 * e.coords @ rot.T + np.array([5.0, -2.0]))
        r1 = global_score(g, e, part)
        r2 = global_score(g, e2, part)
        assert len(r1.curve) == len(r2.curve)
        for (a1, v1), (a2, v2) in zip(r1.curve, r2.curve):
            assert a1 == a2 and abs(v1 - v2) <= 1e-9

    def test_good_embedding_beats_random(self):
        g, part = gen_sbm(60, 3, 0.5, 0.02, directed=True, seed=7)
        good = spectral_embedding(g, 4)
        rng = np.random.default_rng(7)
        bad = random_embedding(60, 4, rng)
        assert global_score(g, good, part).score < global_score(g, bad, part).score

    def test_split_mode_scores(self):
        g, part = gen_sbm(40, 4, 0.5, 0.05, directed=True, seed=8)
        rng = np.random.default_rng(8)
        e = random_embedding(40, 2, rng)
        res = global_score(g, e, part, SearchOptions(split_jsd=True))
        assert 0.0 <= res.score <= 1.0
