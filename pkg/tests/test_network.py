"""Tests for topology queries and the consensus averaging update."""

import numpy as np
import pytest

from transportfilter.errors import DimensionError, ScenarioError
from transportfilter.network import (
    ParticleEnsemble,
    Topology,
    consensus_step,
    is_connected,
    topology_from_neighbor_lists,
)

from oracles import consensus_mean_matrix

TABLE2 = Topology(np.array([[1, 1, 1], [1, 1, 0], [1, 0, 1]]))
TABLE3 = Topology(
    np.array(
        [
            [1, 1, 1, 1, 1],
            [1, 1, 0, 0, 0],
            [1, 0, 1, 0, 0],
            [1, 0, 0, 1, 0],
            [1, 0, 0, 0, 1],
        ]
    )
)


class TestTopology:
    def test_table2_neighbors(self):
        assert TABLE2.neighbors(0) == (0, 1, 2)
        assert TABLE2.neighbors(1) == (0, 1)
        assert TABLE2.neighbors(2) == (0, 2)

    def test_identity_adjacency(self):
        topo = Topology(np.eye(4))
        for l in range(4):
            assert topo.neighbors(l) == (l,)

    def test_complete_graph(self):
        topo = Topology(np.ones((5, 5)))
        assert topo.neighbors(2) == (0, 1, 2, 3, 4)

    def test_requires_self_loops(self):
        with pytest.raises(DimensionError):
            Topology(np.array([[0, 1], [1, 0]]))

    def test_out_of_range_agent(self):
        with pytest.raises(DimensionError):
            TABLE2.neighbors(3)

    def test_from_neighbor_lists(self):
        topo = topology_from_neighbor_lists(3, [[0, 1, 2], [0, 1], [0, 2]])
        np.testing.assert_array_equal(topo.adjacency, TABLE2.adjacency)


class TestIsConnected:
    def test_table3_star(self):
        assert is_connected(TABLE3)

    def test_isolated_agents(self):
        assert not is_connected(Topology(np.eye(3)))

    def test_chain(self):
        chain = np.eye(4)
        for i in range(3):
            chain[i, i + 1] = chain[i + 1, i] = 1
        assert is_connected(Topology(chain))


class TestConsensusStep:
    def test_fixed_point(self):
        """Identical degenerate ensembles at the common mean are unchanged."""
        common = np.tile([1.0, -2.0], (5, 1))
        out = consensus_step([common, common.copy()], Topology(np.ones((2, 2))), 0.25)
        np.testing.assert_array_equal(out[0], common)
        np.testing.assert_array_equal(out[1], common)

    def test_hand_computed_update(self):
        """Two agents, complete graph, gamma 0.25: agent-1 particle at 0
        moves to 0 + 0.25 * ((1 - 0) + (4 - 0)) = 1.25."""
        states = [np.array([[0.0], [2.0]]), np.array([[4.0]])]
        out = consensus_step(states, Topology(np.ones((2, 2))), 0.25)
        assert out[0][0, 0] == pytest.approx(1.25)
        assert out[0][1, 0] == pytest.approx(2.0 + 0.25 * ((1.0 - 2.0) + (4.0 - 2.0)))
        assert out[1][0, 0] == pytest.approx(4.0 + 0.25 * ((1.0 - 4.0) + (4.0 - 4.0)))

    def test_means_follow_transition_matrix(self):
        """Ensemble means evolve exactly by the independently constructed
        N x N linear mean dynamics."""
        rng = np.random.default_rng(0)
        for topo in (TABLE2, TABLE3):
            n = topo.n_agents
            states = [rng.standard_normal((7, 3)) * (l + 1) for l in range(n)]
            means = np.array([s.mean(axis=0) for s in states])
            transition = consensus_mean_matrix(topo.adjacency, 0.1)
            out = consensus_step(states, topo, 0.1)
            new_means = np.array([s.mean(axis=0) for s in out])
            np.testing.assert_allclose(new_means, transition @ means, atol=1e-12)

    def test_small_gamma_limit(self):
        rng = np.random.default_rng(1)
        states = [rng.standard_normal((4, 2)) for _ in range(3)]
        out = consensus_step(states, TABLE2, 1e-12)
        for before, after in zip(states, out):
            np.testing.assert_allclose(after, before, atol=1e-10)

    def test_symmetric_uniform_topology_preserves_global_average(self):
        rng = np.random.default_rng(2)
        topo = Topology(np.ones((4, 4)))
        states = [rng.standard_normal((6, 2)) for _ in range(4)]
        total_before = np.mean([s.mean(axis=0) for s in states], axis=0)
        out = states
        for _ in range(20):
            out = consensus_step(out, topo, 0.2)
        total_after = np.mean([s.mean(axis=0) for s in out], axis=0)
        np.testing.assert_allclose(total_after, total_before, atol=1e-10)

    def test_convergence_to_agreement(self):
        rng = np.random.default_rng(3)
        states = [rng.standard_normal((5, 2)) + 10.0 * l for l in range(3)]
        out = states
        for _ in range(3000):
            out = consensus_step(out, TABLE2, 0.1)
        means = np.array([s.mean(axis=0) for s in out])
        spread = np.max(np.linalg.norm(means - means.mean(axis=0), axis=1))
        assert spread < 1e-8

    def test_literal_variant_scales_self_pull(self):
        """The printed-formula variant pulls toward the agent's own mean,
        scaled by its degree; agent means are then invariant."""
        states = [np.array([[0.0], [2.0]]), np.array([[4.0]])]
        out = consensus_step(states, Topology(np.ones((2, 2))), 0.25, literal=True)
        # agent 0, degree 2: 0 + 0.25 * 2 * (1 - 0) = 0.5
        assert out[0][0, 0] == pytest.approx(0.5)
        np.testing.assert_allclose(out[0].mean(axis=0), states[0].mean(axis=0))

    def test_gamma_guard(self):
        states = [np.zeros((2, 1)) for _ in range(3)]
        with pytest.raises(ScenarioError, match="gamma out of stable range"):
            consensus_step(states, TABLE2, 1.5)
        with pytest.raises(ScenarioError, match="gamma out of stable range"):
            consensus_step(states, TABLE2, 0.5)  # 0.5 * max degree 3 >= 1

    def test_dimension_agreement_required(self):
        states = [np.zeros((2, 1)), np.zeros((2, 2)), np.zeros((2, 1))]
        with pytest.raises(DimensionError):
            consensus_step(states, TABLE2, 0.1)


class TestParticleEnsemble:
    def test_mean_and_shape(self):
        ensemble = ParticleEnsemble(0, np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_array_equal(ensemble.mean(), [2.0, 3.0])
        assert ensemble.size == 2
        assert ensemble.dim == 2

    def test_rejects_flat_array(self):
        with pytest.raises(DimensionError):
            ParticleEnsemble(0, np.zeros(3))
