import numpy as np
import pytest

from gee import (
    DistanceKernel,
    Embedding,
    FitNonConvergenceError,
    Graph,
    ModelCache,
    Partition,
    check_feasibility,
    distance_extremes,
    expected_block_mass,
    fit,
    gen_sbm,
    kernel_eval,
)

from conftest import random_digraph, random_embedding


class TestKernel:
    def setup_method(self):
        self.kernel = DistanceKernel(2.0, 1.0, 3.0)

    def test_endpoints(self):
        assert kernel_eval(self.kernel, 1.0) == 1.0
        assert kernel_eval(self.kernel, 3.0) == 0.0

    def test_alpha_zero_neglects_distance(self):
        k0 = DistanceKernel(0.0, 1.0, 3.0)
        assert kernel_eval(k0, 2.0) == 1.0
        assert kernel_eval(k0, 3.0) == 1.0  # 0 ** 0 convention

    def test_linear_midpoint(self):
        k1 = DistanceKernel(1.0, 1.0, 3.0)
        assert kernel_eval(k1, 2.0) == pytest.approx(0.5)

    def test_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            kernel_eval(self.kernel, 0.5)
        with pytest.raises(ValueError, match="outside"):
            kernel_eval(self.kernel, 3.5)

    def test_monotone_non_increasing(self):
        d = np.linspace(1.0, 3.0, 101)
        vals = kernel_eval(self.kernel, d)
        assert np.all(np.diff(vals) <= 0)

    def test_clip_keeps_kernel_interior(self):
        k = DistanceKernel(2.0, 1.0, 3.0, clip=(0.001, 0.999))
        assert 0.0 < kernel_eval(k, 3.0) < kernel_eval(k, 1.0) < 1.0

    def test_degenerate_geometry_constant(self):
        k = DistanceKernel(2.0, 1.0, 1.0)
        assert kernel_eval(k, 1.0) == 1.0

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            DistanceKernel(-1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            DistanceKernel(1.0, 0.0, 1.0, clip=(0.5, 0.4))


class TestDistanceExtremes:
    def test_right_triangle(self):
        e = Embedding.from_coords(np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]]))
        assert distance_extremes(e) == (3.0, 5.0)

    def test_coincident_pair_gives_zero_min(self):
        e = Embedding.from_coords(np.array([[1.0, 1.0], [1.0, 1.0], [4.0, 5.0]]))
        d_min, d_max = distance_extremes(e)
        assert d_min == 0.0 and d_max == 5.0

    def test_all_identical_rejected(self):
        coords = np.zeros((3, 2))
        with pytest.raises(ValueError):
            distance_extremes(coords)


class TestFeasibility:
    def test_directed_cycle_feasible(self):
        g = Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], directed=True)
        assert check_feasibility(g).feasible

    def test_out_star_degenerate(self):
        g = Graph.from_edges(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)], directed=True)
        rep = check_feasibility(g)
        assert rep.degenerate and rep.kind == "star" and rep.center == 0

    def test_mixed_star_degenerate(self):
        g = Graph.from_edges(4, [(0, 1, 1.0), (2, 0, 1.0), (0, 3, 1.0), (3, 0, 1.0)],
                             directed=True)
        rep = check_feasibility(g)
        assert rep.degenerate and rep.kind == "star"

    def test_two_node_degenerate(self):
        g = Graph.from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)], directed=True)
        rep = check_feasibility(g)
        assert rep.degenerate and rep.kind == "two_nodes"

    def test_star_plus_extra_edge_feasible(self):
        g = Graph.from_edges(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 2, 1.0)],
                             directed=True)
        assert check_feasibility(g).feasible


def _degree_errors(model, graph):
    p = model.probability_matrix(clamp=False)
    out = np.abs(p.sum(axis=1) - graph.w_out) / np.maximum(graph.w_out, 1.0)
    inn = np.abs(p.sum(axis=0) - graph.w_in) / np.maximum(graph.w_in, 1.0)
    return max(out.max(), inn.max())


class TestFit:
    def test_symmetric_cycle_uniform_weights(self):
        # equilateral coordinates: every pairwise distance equal, so the
        # kernel is constant and symmetry forces uniform weights
        g = Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], directed=True)
        e = Embedding.from_coords(
            np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]]))
        m = fit(g, e, alpha=1.0)
        p = m.probability_matrix(clamp=False)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-7)
        off = p[~np.eye(3, dtype=bool)]
        assert np.allclose(off, off[0], rtol=1e-6)

    def test_random_digraph_degree_systems(self):
        rng = np.random.default_rng(5)
        g = random_digraph(20, rng, density=0.3)
        e = random_embedding(20, 3, rng)
        m = fit(g, e, alpha=1.5)
        assert _degree_errors(m, g) <= 1e-8

    def test_weighted_digraph_degree_systems(self):
        rng = np.random.default_rng(11)
        g = random_digraph(25, rng, density=0.25, weighted=True)
        e = random_embedding(25, 2, rng)
        m = fit(g, e, alpha=2.0)
        assert _degree_errors(m, g) <= 1e-8

    def test_undirected_degree_system(self):
        g, _ = gen_sbm(24, 2, 0.6, 0.2, directed=False, seed=3)
        rng = np.random.default_rng(4)
        e = random_embedding(24, 2, rng)
        m = fit(g, e, alpha=1.0)
        p = m.probability_matrix(clamp=False)
        err = np.abs(p.sum(axis=1) - g.w_out) / np.maximum(g.w_out, 1.0)
        assert err.max() <= 1e-8
        assert np.allclose(p, p.T)

    def test_alpha_zero_embedding_independent(self):
        rng = np.random.default_rng(7)
        g = random_digraph(15, rng, density=0.3)
        e1 = random_embedding(15, 2, rng)
        e2 = random_embedding(15, 5, rng)
        p1 = fit(g, e1, alpha=0.0).probability_matrix(clamp=False)
        p2 = fit(g, e2, alpha=0.0).probability_matrix(clamp=False)
        assert np.allclose(p1, p2, atol=1e-9)
        assert _degree_errors(fit(g, e1, alpha=0.0), g) <= 1e-8

    def test_alpha_zero_close_to_classical_product_form(self):
        # the distance-free fit stays within O(max_degree / total) of the
        # classical product-form probabilities
        rng = np.random.default_rng(19)
        g = random_digraph(40, rng, density=0.3)
        e = random_embedding(40, 2, rng)
        p = fit(g, e, alpha=0.0).probability_matrix(clamp=False)
        classic = np.outer(g.w_out, g.w_in) / g.total_weight
        np.fill_diagonal(classic, 0.0)
        sel = classic > 0
        rel = np.abs(p[sel] - classic[sel]) / classic[sel]
        assert rel.max() < 5 * g.w_out.max() / g.total_weight

    def test_gauge_first_positive_out_weight_is_one(self):
        rng = np.random.default_rng(9)
        g = random_digraph(12, rng, density=0.35)
        e = random_embedding(12, 2, rng)
        m = fit(g, e, alpha=1.0)
        first_pos = np.flatnonzero(m.x_out > 0)[0]
        assert m.x_out[first_pos] == pytest.approx(1.0)

    def test_unique_solution_from_perturbed_starts(self):
        rng = np.random.default_rng(13)
        g = random_digraph(18, rng, density=0.3)
        e = random_embedding(18, 2, rng)
        base = fit(g, e, alpha=1.0)
        w = g.total_weight
        x0 = (g.w_out / np.sqrt(w), g.w_in / np.sqrt(w))
        for scale in (2.0, 0.5):
            other = fit(g, e, alpha=1.0, x0=(x0[0] * scale, x0[1] * scale))
            d = np.abs(base.probability_matrix(clamp=False)
                       - other.probability_matrix(clamp=False))
            assert d.max() <= 1e-6

    def test_zero_degree_side_gets_zero_weight(self):
        # node 0 has outgoing edges only, so its in-weight must be 0
        rng = np.random.default_rng(2)
        edges = [(0, j, 1.0) for j in range(1, 5)]
        edges += [(i, j, 1.0) for i in range(1, 8) for j in range(1, 8)
                  if i != j and (i + j) % 3 != 0]
        g = Graph.from_edges(8, edges, directed=True)
        assert g.w_in[0] == 0.0 and g.w_out[0] > 0
        e = random_embedding(8, 2, rng)
        m = fit(g, e, alpha=1.0)
        assert m.x_in[0] == 0.0
        assert m.x_out[0] > 0
        p = m.probability_matrix(clamp=False)
        assert np.abs(p.sum(axis=0) - g.w_in).max() <= 1e-7

    def test_degenerate_star_deterministic(self):
        g = Graph.from_edges(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)], directed=True)
        rng = np.random.default_rng(3)
        e = random_embedding(4, 2, rng)
        m = fit(g, e, alpha=1.0)
        assert m.degenerate and m.iterations == 0
        adj = np.zeros((4, 4))
        adj[0, 1] = adj[0, 2] = adj[0, 3] = 1.0
        assert np.array_equal(m.deterministic_p, adj)

    def test_degenerate_two_node_deterministic(self):
        g = Graph.from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)], directed=True)
        e = Embedding.from_coords(np.array([[0.0, 0.0], [1.0, 0.0]]))
        m = fit(g, e, alpha=2.0)
        assert m.degenerate
        assert np.array_equal(m.deterministic_p, np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_non_convergence_carries_residual(self):
        rng = np.random.default_rng(17)
        g = random_digraph(20, rng, density=0.3)
        e = random_embedding(20, 2, rng)
        with pytest.raises(FitNonConvergenceError) as err:
            fit(g, e, alpha=1.0, max_iter=1)
        assert err.value.residual > 0

    def test_loops_variant_degree_systems(self):
        rng = np.random.default_rng(23)
        g = random_digraph(15, rng, density=0.3)
        e = random_embedding(15, 2, rng)
        d_min, d_max = distance_extremes(e)
        loop_d = np.full(15, 0.5 * (d_min + d_max))
        m = fit(g, e, alpha=1.0, allow_loops=True, loop_distances=loop_d,
                extremes=(0.0, d_max))
        p = m.probability_matrix(clamp=False)
        assert np.all(np.diagonal(p) > 0)
        out = np.abs(p.sum(axis=1) - g.w_out) / np.maximum(g.w_out, 1.0)
        inn = np.abs(p.sum(axis=0) - g.w_in) / np.maximum(g.w_in, 1.0)
        assert max(out.max(), inn.max()) <= 1e-8


class TestExpectedBlockMass:
    def _brute_force(self, model, graph, partition):
        p = model.probability_matrix(clamp=True)
        ell = partition.n_communities
        labels = partition.assign
        mass = np.zeros((ell, ell))
        for u in range(graph.n):
            for v in range(graph.n):
                if u == v:
                    continue
                if graph.directed:
                    mass[labels[u], labels[v]] += p[u, v]
                elif u < v:
                    a, b = sorted((labels[u], labels[v]))
                    mass[a, b] += p[u, v]
        return mass / mass.sum()

    def test_matches_brute_force_directed(self):
        g, part = gen_sbm(30, 3, 0.5, 0.1, directed=True, seed=8)
        rng = np.random.default_rng(8)
        e = random_embedding(30, 2, rng)
        m = fit(g, e, alpha=1.0)
        got = expected_block_mass(m, g, part)
        assert np.allclose(got, self._brute_force(m, g, part), atol=1e-12)
        assert got.sum() == pytest.approx(1.0, abs=1e-12)

    def test_matches_brute_force_undirected(self):
        g, part = gen_sbm(30, 3, 0.5, 0.1, directed=False, seed=9)
        rng = np.random.default_rng(9)
        e = random_embedding(30, 2, rng)
        m = fit(g, e, alpha=0.5)
        got = expected_block_mass(m, g, part)
        assert np.allclose(got, self._brute_force(m, g, part), atol=1e-12)
        assert np.all(np.tril(got, -1) == 0)

    def test_alpha_zero_two_equal_regular_blocks_symmetric(self):
        # directed circulant: every node has out- and in-degree 2
        edges = [(i, (i + 1) % 6, 1.0) for i in range(6)]
        edges += [(i, (i + 2) % 6, 1.0) for i in range(6)]
        g = Graph.from_edges(6, edges, directed=True)
        part = Partition(np.array([0, 0, 0, 1, 1, 1]), 2)
        rng = np.random.default_rng(10)
        e = random_embedding(6, 2, rng)
        m = fit(g, e, alpha=0.0)
        mass = expected_block_mass(m, g, part)
        assert mass[0, 1] == pytest.approx(mass[1, 0], rel=1e-9)


class TestModelCache:
    def test_cache_reuses_models(self):
        rng = np.random.default_rng(21)
        g = random_digraph(15, rng, density=0.3)
        e = random_embedding(15, 2, rng)
        cache = ModelCache(g, e)
        assert cache.model(1.0) is cache.model(1.0)
        assert cache.model(1.0) is not cache.model(1.25)

    def test_cache_matches_standalone_fit(self):
        rng = np.random.default_rng(22)
        g = random_digraph(15, rng, density=0.3)
        e = random_embedding(15, 2, rng)
        cache = ModelCache(g, e)
        pa = cache.model(0.75).probability_matrix(clamp=False)
        pb = fit(g, e, alpha=0.75).probability_matrix(clamp=False)
        assert np.allclose(pa, pb, atol=1e-12)
