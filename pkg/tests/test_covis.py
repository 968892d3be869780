from itertools import combinations

import numpy as np
import pytest

from semloop.covis import CovisibilityGraph, adjacency_matrix, graph_to_dot, subgraph_to_dot
from semloop.errors import DuplicateKeyframe, UnknownKeyframe, UnknownVertex

from conftest import make_obs, make_record


def integrate_log(graph, log):
    """log: list of (kf_id, [track ids])."""
    for kf_id, tracks in log:
        graph.integrate_keyframe(make_record(kf_id, [make_obs(t, (t, 0.0, 1.0)) for t in tracks]))


class TestEdges:
    def test_two_coobservations_do_not_make_an_edge(self):
        g = CovisibilityGraph()
        integrate_log(g, [(0, [1, 2]), (1, [1, 2])])
        assert not g.edges

    def test_third_coobservation_adds_edge(self):
        g = CovisibilityGraph()
        integrate_log(g, [(0, [1, 2]), (1, [1, 2]), (2, [1, 2])])
        assert g.has_edge(0, 1)

    def test_unseen_track_creates_isolated_vertex(self):
        g = CovisibilityGraph()
        integrate_log(g, [(0, [1, 2]), (1, [1, 2]), (2, [1, 2])])
        n_edges = len(g.edges)
        g.integrate_keyframe(make_record(3, [make_obs(99, (5.0, 5.0, 1.0))]))
        assert len(g.landmarks) == 3
        assert len(g.edges) == n_edges

    def test_edge_set_matches_brute_force_recount(self, rng):
        g = CovisibilityGraph()
        log = []
        for kf in range(30):
            tracks = sorted(rng.choice(8, size=rng.integers(1, 5), replace=False).tolist())
            log.append((kf, tracks))
        integrate_log(g, log)
        counts = {}
        for _, tracks in log:
            lm_ids = [g._track_to_lm[t] for t in tracks]
            for a, b in combinations(sorted(set(lm_ids)), 2):
                counts[(a, b)] = counts.get((a, b), 0) + 1
        expected = {k for k, v in counts.items() if v >= 3}
        assert g.edges == expected

    def test_replay_is_deterministic(self, rng):
        logs = []
        for kf in range(20):
            logs.append((kf, sorted(rng.choice(6, size=rng.integers(1, 4), replace=False).tolist())))
        g1, g2 = CovisibilityGraph(), CovisibilityGraph()
        integrate_log(g1, logs)
        integrate_log(g2, logs)
        assert g1.edges == g2.edges
        assert set(g1.landmarks) == set(g2.landmarks)
        for k in g1.landmarks:
            assert np.array_equal(g1.landmarks[k].center, g2.landmarks[k].center)


class TestIntegration:
    def test_duplicate_keyframe_rejected(self):
        g = CovisibilityGraph()
        integrate_log(g, [(0, [1])])
        with pytest.raises(DuplicateKeyframe):
            integrate_log(g, [(0, [1])])

    def test_non_monotone_id_rejected(self):
        g = CovisibilityGraph()
        integrate_log(g, [(5, [1])])
        with pytest.raises(DuplicateKeyframe):
            integrate_log(g, [(3, [1])])

    def test_center_running_mean(self):
        g = CovisibilityGraph()
        g.integrate_keyframe(make_record(0, [make_obs(7, (1.0, 0.0, 1.0))]))
        g.integrate_keyframe(make_record(1, [make_obs(7, (3.0, 0.0, 1.0))]))
        lm = g.landmarks[0]
        assert np.allclose(lm.center, (2.0, 0.0, 1.0))

    def test_axes_running_max(self):
        g = CovisibilityGraph()
        g.integrate_keyframe(make_record(0, [make_obs(7, (0, 0, 1), axes=(0.5, 0.3, 0.2))]))
        g.integrate_keyframe(make_record(1, [make_obs(7, (0, 0, 1), axes=(0.4, 0.4, 0.1))]))
        assert g.landmarks[0].axes.tolist() == [0.5, 0.4, 0.2]

    def test_nearest_center_association_without_track_ids(self):
        g = CovisibilityGraph()
        g.integrate_keyframe(make_record(0, [make_obs(None, (0.0, 0.0, 1.0), class_id=2)]))
        # within gate, same class: associates
        g.integrate_keyframe(make_record(1, [make_obs(None, (0.3, 0.0, 1.0), class_id=2)]))
        assert len(g.landmarks) == 1
        # within gate, different class: new landmark
        g.integrate_keyframe(make_record(2, [make_obs(None, (0.2, 0.0, 1.0), class_id=1)]))
        assert len(g.landmarks) == 2
        # beyond gate: new landmark
        g.integrate_keyframe(make_record(3, [make_obs(None, (2.0, 0.0, 1.0), class_id=2)]))
        assert len(g.landmarks) == 3


class TestSubgraphs:
    def build(self):
        g = CovisibilityGraph()
        log = [(k, ["A", "B"]) for k in range(3)]
        log += [(k + 3, ["B", "D"]) for k in range(3)]
        log.append((6, ["A", "B", "C"]))
        # track ids must be ints; map letters
        m = {"A": 1, "B": 2, "C": 3, "D": 4}
        integrate_log(g, [(k, [m[t] for t in ts]) for k, ts in log])
        return g, {v: g._track_to_lm[t] for v, t in m.items()}

    def test_vertex_induced_restriction(self):
        g, ids = self.build()
        sub = g.subgraph_for(6)
        assert set(sub.vertex_ids) == {ids["A"], ids["B"], ids["C"]}
        assert sub.edges == frozenset({tuple(sorted((ids["A"], ids["B"])))})

    def test_unknown_keyframe(self):
        g, _ = self.build()
        with pytest.raises(UnknownKeyframe):
            g.subgraph_for(99)

    def test_empty_keyframe_gives_empty_subgraph(self):
        g, _ = self.build()
        g.integrate_keyframe(make_record(7, []))
        assert len(g.subgraph_for(7)) == 0

    def test_subgraph_never_adds_edges(self, rng):
        g = CovisibilityGraph()
        for kf in range(25):
            tracks = sorted(rng.choice(7, size=rng.integers(1, 5), replace=False).tolist())
            integrate_log(g, [(kf, tracks)])
        for kf in range(25):
            sub = g.subgraph_for(kf)
            assert sub.edges <= frozenset(g.edges)

    def test_full_graph_on_one_keyframe(self):
        g = CovisibilityGraph()
        integrate_log(g, [(0, [1, 2]), (1, [1, 2]), (2, [1, 2])])
        sub = g.subgraph_for(2)
        assert set(sub.vertex_ids) == set(g.landmarks)
        assert sub.edges == frozenset(g.edges)

    def test_covisible_keyframes(self):
        g, _ = self.build()
        assert g.covisible_keyframes(0) == {1, 2, 3, 4, 5, 6}
        assert 0 not in g.covisible_keyframes(0)


class TestAdjacency:
    def test_single_vertex(self):
        g = CovisibilityGraph()
        integrate_log(g, [(0, [1])])
        sub = g.subgraph_for(0)
        assert adjacency_matrix(sub, sub.vertex_ids).tolist() == [[0]]

    def test_pair_with_edge(self):
        g = CovisibilityGraph()
        integrate_log(g, [(0, [1, 2]), (1, [1, 2]), (2, [1, 2])])
        sub = g.subgraph_for(2)
        assert adjacency_matrix(sub, sub.vertex_ids).tolist() == [[0, 1], [1, 0]]

    def test_chain_has_four_ones(self):
        g = CovisibilityGraph()
        integrate_log(g, [(k, [1, 2]) for k in range(3)])
        integrate_log(g, [(k + 3, [2, 3]) for k in range(3)])
        g.integrate_keyframe(make_record(6, [make_obs(t, (t, 0, 1)) for t in (1, 2, 3)]))
        sub = g.subgraph_for(6)
        m = adjacency_matrix(sub, sub.vertex_ids)
        assert m.sum() == 4
        assert np.array_equal(m, m.T)
        assert np.diag(m).sum() == 0

    def test_unknown_vertex_and_duplicates_rejected(self):
        g = CovisibilityGraph()
        integrate_log(g, [(0, [1])])
        sub = g.subgraph_for(0)
        with pytest.raises(UnknownVertex):
            adjacency_matrix(sub, [99])
        with pytest.raises(UnknownVertex):
            adjacency_matrix(sub, [0, 0])

    def test_symmetric_zero_diagonal_for_any_order(self, rng):
        g = CovisibilityGraph()
        for kf in range(20):
            tracks = sorted(rng.choice(6, size=rng.integers(2, 5), replace=False).tolist())
            integrate_log(g, [(kf, tracks)])
        sub = g.subgraph_for(19)
        order = list(rng.permutation(sub.vertex_ids))
        m = adjacency_matrix(sub, order)
        assert np.array_equal(m, m.T)
        assert np.diag(m).sum() == 0


class TestDot:
    def test_graph_dot_contains_vertices_and_edges(self):
        g = CovisibilityGraph()
        integrate_log(g, [(k, [1, 2]) for k in range(3)])
        dot = graph_to_dot(g)
        assert "graph covis {" in dot
        assert "v0 -- v1" in dot

    def test_subgraph_coloring(self):
        g = CovisibilityGraph()
        integrate_log(g, [(k, [1, 2]) for k in range(3)])
        sub = g.subgraph_for(2)
        dot = subgraph_to_dot(sub, vertex_colors={0: "green", 1: "red"}, edge_colors={(0, 1): "green"})
        assert 'color="green"' in dot and 'color="red"' in dot
